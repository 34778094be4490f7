// Attestation report: serialization, token computation, and checking.
//
// Wire format (little-endian):
//   "DLD1"            4  magic
//   challenge        16
//   er_min            2
//   er_max            2
//   exec              1  (1 = set, 0 = cleared, 2 = cleared by the abort stub)
//   or_len            2
//   or_snapshot      or_len
//   token            32  HMAC-SHA256
//
// token = HMAC(key, challenge ‖ er_min ‖ er_max ‖ er_entry_image ‖
//              or_snapshot ‖ exec_byte)
// where er_entry_image is the full ER byte span at operation entry; only the
// device (with the run) and the verifier (re-deriving the image from the
// program it expects) can produce it.
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dialed/emulator.hpp"
#include "dialed/mac.hpp"

namespace dialed {

using AttestKey = std::array<uint8_t, 32>;
using Challenge = std::array<uint8_t, 16>;

struct ReportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExecStatus : uint8_t {
  Cleared = 0,
  Set = 1,
  ClearedByAbort = 2,
};
const char* exec_status_name(ExecStatus s);

struct Report {
  Challenge challenge{};
  uint16_t er_min = 0;
  uint16_t er_max = 0;
  ExecStatus exec = ExecStatus::Cleared;
  std::vector<uint8_t> or_snapshot;
  Mac token{};
};

std::vector<uint8_t> serialize_report(const Report& r);
// Throws ReportError on truncation, bad magic, or length mismatch.
Report parse_report(const std::vector<uint8_t>& bytes);

Mac compute_token(const AttestKey& key, const Challenge& challenge,
                  uint16_t er_min, uint16_t er_max,
                  const std::vector<uint8_t>& er_entry_image,
                  const std::vector<uint8_t>& or_snapshot, uint8_t exec_byte);

// Builds the signed report for a finished run.
Report attest(const RunResult& run, const MemoryLayout& layout,
              const AttestKey& key, const Challenge& challenge);

// Recomputes the token against the ER image the caller expects.
bool verify_token(const Report& r, const std::vector<uint8_t>& er_entry_image,
                  const AttestKey& key);

// Strict hex decoding into fixed-size key/challenge (64 / 32 hex digits).
AttestKey parse_key_hex(const std::string& hex);         // throws ReportError
Challenge parse_challenge_hex(const std::string& hex);   // throws ReportError

} // namespace dialed
