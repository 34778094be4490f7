// Keyed MAC (HMAC-SHA256) and small hex helpers.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dialed {

using Mac = std::array<uint8_t, 32>;

Mac hmac_sha256(const uint8_t* key, size_t key_len, const uint8_t* msg,
                size_t msg_len);
Mac hmac_sha256(const std::vector<uint8_t>& key, const std::vector<uint8_t>& msg);

// Constant-time comparison.
bool mac_equal(const Mac& a, const Mac& b);

std::string to_hex(const uint8_t* data, size_t len);
std::string to_hex(const std::vector<uint8_t>& data);
// Strict: even length, hex digits only.
std::optional<std::vector<uint8_t>> from_hex(const std::string& s);

} // namespace dialed
