#include "dialed/pox.hpp"

namespace dialed {
namespace {

constexpr char kMagic[4] = {'D', 'L', 'D', '1'};

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xFF));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

uint8_t exec_byte_for(const RunResult& run) {
  if (run.exec) return static_cast<uint8_t>(ExecStatus::Set);
  if (run.reason == HaltReason::Aborted)
    return static_cast<uint8_t>(ExecStatus::ClearedByAbort);
  return static_cast<uint8_t>(ExecStatus::Cleared);
}

} // namespace

const char* exec_status_name(ExecStatus s) {
  switch (s) {
    case ExecStatus::Cleared: return "cleared";
    case ExecStatus::Set: return "set";
    case ExecStatus::ClearedByAbort: return "cleared-by-abort";
  }
  return "?";
}

std::vector<uint8_t> serialize_report(const Report& r) {
  std::vector<uint8_t> out;
  out.reserve(4 + 16 + 2 + 2 + 1 + 2 + r.or_snapshot.size() + 32);
  out.insert(out.end(), kMagic, kMagic + 4);
  out.insert(out.end(), r.challenge.begin(), r.challenge.end());
  put_u16(out, r.er_min);
  put_u16(out, r.er_max);
  out.push_back(static_cast<uint8_t>(r.exec));
  put_u16(out, static_cast<uint16_t>(r.or_snapshot.size()));
  out.insert(out.end(), r.or_snapshot.begin(), r.or_snapshot.end());
  out.insert(out.end(), r.token.begin(), r.token.end());
  return out;
}

Report parse_report(const std::vector<uint8_t>& bytes) {
  size_t fixed = 4 + 16 + 2 + 2 + 1 + 2;
  if (bytes.size() < fixed + 32) throw ReportError("report too short");
  if (!std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw ReportError("bad report magic");
  Report r;
  size_t off = 4;
  std::copy(bytes.begin() + off, bytes.begin() + off + 16, r.challenge.begin());
  off += 16;
  auto u16 = [&](size_t at) {
    return static_cast<uint16_t>(bytes[at] | (bytes[at + 1] << 8));
  };
  r.er_min = u16(off); off += 2;
  r.er_max = u16(off); off += 2;
  uint8_t exec = bytes[off++];
  if (exec > 2) throw ReportError("bad exec byte");
  r.exec = static_cast<ExecStatus>(exec);
  uint16_t or_len = u16(off); off += 2;
  if (bytes.size() != fixed + or_len + 32)
    throw ReportError("report length does not match or_len");
  r.or_snapshot.assign(bytes.begin() + off, bytes.begin() + off + or_len);
  off += or_len;
  std::copy(bytes.begin() + off, bytes.begin() + off + 32, r.token.begin());
  return r;
}

Mac compute_token(const AttestKey& key, const Challenge& challenge,
                  uint16_t er_min, uint16_t er_max,
                  const std::vector<uint8_t>& er_entry_image,
                  const std::vector<uint8_t>& or_snapshot, uint8_t exec_byte) {
  std::vector<uint8_t> msg;
  msg.reserve(16 + 4 + er_entry_image.size() + or_snapshot.size() + 1);
  msg.insert(msg.end(), challenge.begin(), challenge.end());
  put_u16(msg, er_min);
  put_u16(msg, er_max);
  msg.insert(msg.end(), er_entry_image.begin(), er_entry_image.end());
  msg.insert(msg.end(), or_snapshot.begin(), or_snapshot.end());
  msg.push_back(exec_byte);
  return hmac_sha256(key.data(), key.size(), msg.data(), msg.size());
}

Report attest(const RunResult& run, const MemoryLayout& layout,
              const AttestKey& key, const Challenge& challenge) {
  Report r;
  r.challenge = challenge;
  r.er_min = layout.er_min;
  r.er_max = layout.er_max;
  r.exec = static_cast<ExecStatus>(exec_byte_for(run));
  r.or_snapshot = run.or_snapshot;
  r.token = compute_token(key, challenge, r.er_min, r.er_max,
                          run.er_entry_image, r.or_snapshot,
                          static_cast<uint8_t>(r.exec));
  return r;
}

bool verify_token(const Report& r, const std::vector<uint8_t>& er_entry_image,
                  const AttestKey& key) {
  Mac expect = compute_token(key, r.challenge, r.er_min, r.er_max,
                             er_entry_image, r.or_snapshot,
                             static_cast<uint8_t>(r.exec));
  return mac_equal(expect, r.token);
}

AttestKey parse_key_hex(const std::string& hex) {
  auto bytes = from_hex(hex);
  if (!bytes || bytes->size() != 32)
    throw ReportError("key must be 64 hex digits");
  AttestKey k{};
  std::copy(bytes->begin(), bytes->end(), k.begin());
  return k;
}

Challenge parse_challenge_hex(const std::string& hex) {
  auto bytes = from_hex(hex);
  if (!bytes || bytes->size() != 16)
    throw ReportError("challenge must be 32 hex digits");
  Challenge c{};
  std::copy(bytes->begin(), bytes->end(), c.begin());
  return c;
}

} // namespace dialed
