// MAC, report serialization, and token tests. The HMAC oracle values are the
// published RFC 4231 test vectors; everything else is exercised by
// construction + independent recomputation.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dialed/asm_text.hpp"
#include "dialed/emulator.hpp"
#include "dialed/layout.hpp"
#include "dialed/mac.hpp"
#include "dialed/pox.hpp"

using namespace dialed;

namespace {

const char* kLayoutText =
    "er_min = 0x4000\n"
    "er_max = 0x43ff\n"
    "or_min = 0xe000\n"
    "or_max = 0xe03e\n"
    "stack_init = 0x3ffe\n"
    "periph_min = 0x0100\n"
    "periph_max = 0x010f\n";

MemoryLayout small_layout() { return parse_layout(kLayoutText); }

AttestKey test_key() {
  return parse_key_hex(
      "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f");
}

Challenge test_challenge() {
  return parse_challenge_hex("00112233445566778899aabbccddeeff");
}

RunResult quick_run(const char* text) {
  return run_operation(parse_assembly(text), small_layout(), {});
}

} // namespace

TEST_CASE("hmac-sha256 matches the rfc 4231 vectors") {
  // Test case 2: key "Jefe", data "what do ya want for nothing?".
  std::vector<uint8_t> key = {'J', 'e', 'f', 'e'};
  std::string data = "what do ya want for nothing?";
  Mac mac = hmac_sha256(key.data(), key.size(),
                        reinterpret_cast<const uint8_t*>(data.data()),
                        data.size());
  CHECK(to_hex(mac.data(), mac.size()) ==
        "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");

  // Test case 1: key = 0x0b x20, data "Hi There".
  std::vector<uint8_t> key1(20, 0x0b);
  std::string data1 = "Hi There";
  Mac mac1 = hmac_sha256(key1.data(), key1.size(),
                         reinterpret_cast<const uint8_t*>(data1.data()),
                         data1.size());
  CHECK(to_hex(mac1.data(), mac1.size()) ==
        "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
}

TEST_CASE("hex helpers round-trip and reject junk") {
  std::vector<uint8_t> bytes = {0x00, 0xFF, 0x5A, 0x01};
  CHECK(to_hex(bytes) == "00ff5a01");
  CHECK(from_hex("00ff5a01").value() == bytes);
  CHECK(from_hex("00FF5A01").value() == bytes);
  CHECK(!from_hex("0g").has_value());
  CHECK(!from_hex("abc").has_value());
  CHECK(from_hex("").value().empty());
}

TEST_CASE("key and challenge parsing enforce exact lengths") {
  CHECK_THROWS_AS(parse_key_hex("abcd"), ReportError);
  CHECK_THROWS_AS(parse_challenge_hex("abcd"), ReportError);
  CHECK_NOTHROW(test_key());
  CHECK_NOTHROW(test_challenge());
}

TEST_CASE("reports serialize and parse back exactly") {
  auto run = quick_run("    mov #1, r5\n    halt\n");
  Report r = attest(run, small_layout(), test_key(), test_challenge());
  CHECK(r.exec == ExecStatus::Set);
  CHECK(r.or_snapshot.size() == small_layout().or_len());

  auto bytes = serialize_report(r);
  // 4 magic + 16 challenge + 2+2 bounds + 1 exec + 2 length + snapshot + 32.
  CHECK(bytes.size() == 27 + r.or_snapshot.size() + 32);
  Report back = parse_report(bytes);
  CHECK(back.challenge == r.challenge);
  CHECK(back.er_min == r.er_min);
  CHECK(back.er_max == r.er_max);
  CHECK(back.exec == r.exec);
  CHECK(back.or_snapshot == r.or_snapshot);
  CHECK(back.token == r.token);
}

TEST_CASE("malformed report bytes are rejected") {
  auto run = quick_run("    halt\n");
  auto bytes = serialize_report(attest(run, small_layout(), test_key(),
                                       test_challenge()));
  auto expect_throw = [](std::vector<uint8_t> b) {
    CHECK_THROWS_AS(parse_report(b), ReportError);
  };
  expect_throw({});                                    // empty
  expect_throw({0, 1, 2});                             // way short
  auto bad_magic = bytes;
  bad_magic[0] ^= 0xFF;
  expect_throw(bad_magic);
  auto truncated = bytes;
  truncated.pop_back();
  expect_throw(truncated);
  auto extended = bytes;
  extended.push_back(0);
  expect_throw(extended);
  auto bad_exec = bytes;
  bad_exec[24] = 7;  // exec byte offset: 4+16+2+2
  expect_throw(bad_exec);
}

TEST_CASE("the token binds the run and verifies against the entry image") {
  auto run = quick_run("    mov #1, r5\n    halt\n");
  Report r = attest(run, small_layout(), test_key(), test_challenge());
  CHECK(verify_token(r, run.er_entry_image, test_key()));

  // Recompute independently from the pieces.
  Mac again = compute_token(test_key(), r.challenge, r.er_min, r.er_max,
                            run.er_entry_image, r.or_snapshot,
                            static_cast<uint8_t>(r.exec));
  CHECK(mac_equal(again, r.token));
}

TEST_CASE("the token refuses every single-field tamper") {
  auto run = quick_run("    mov #1, r5\n    halt\n");
  auto key = test_key();
  Report r = attest(run, small_layout(), key, test_challenge());

  Report t = r;
  t.challenge[0] ^= 1;
  CHECK(!verify_token(t, run.er_entry_image, key));

  t = r;
  t.exec = ExecStatus::Cleared;
  CHECK(!verify_token(t, run.er_entry_image, key));

  t = r;
  t.or_snapshot[0] ^= 1;
  CHECK(!verify_token(t, run.er_entry_image, key));

  t = r;
  t.er_min ^= 2;
  CHECK(!verify_token(t, run.er_entry_image, key));

  auto image = run.er_entry_image;
  image[3] ^= 0x80;
  CHECK(!verify_token(r, image, key));

  auto other_key = key;
  other_key[31] ^= 1;
  CHECK(!verify_token(r, run.er_entry_image, other_key));
}

TEST_CASE("exec byte reflects how the run ended") {
  auto ok = quick_run("    halt\n");
  CHECK(attest(ok, small_layout(), test_key(), test_challenge()).exec ==
        ExecStatus::Set);

  auto aborted = quick_run("    jmp .L11\n.L11:\n    halt\n");
  CHECK(attest(aborted, small_layout(), test_key(), test_challenge()).exec ==
        ExecStatus::ClearedByAbort);

  auto tampered = quick_run("    mov #1, &0x4100\n    halt\n");
  CHECK(attest(tampered, small_layout(), test_key(), test_challenge()).exec ==
        ExecStatus::Cleared);
}

TEST_CASE("any single bit flip in a report is caught") {
  auto run = quick_run("    mov #7, &0xe010\n    halt\n");
  Report r = attest(run, small_layout(), test_key(), test_challenge());
  auto bytes = serialize_report(r);
  // Spot-check a few positions here (the acceptance gate sweeps all of them).
  for (size_t pos : {size_t(0), size_t(5), size_t(24), size_t(30),
                     bytes.size() - 1, bytes.size() - 33}) {
    for (int bit : {0, 7}) {
      auto mutated = bytes;
      mutated[pos] ^= static_cast<uint8_t>(1u << bit);
      bool rejected;
      try {
        Report m = parse_report(mutated);
        rejected = !verify_token(m, run.er_entry_image, test_key());
      } catch (const ReportError&) {
        rejected = true;
      }
      CHECK(rejected);
    }
  }
}
