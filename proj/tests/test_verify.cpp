// Verifier: authenticity checks, log replay, and attack classification.
//
// The scenarios are constructive: each verdict is produced by an actual
// device run (honest, misconfigured, or attacked through its inputs), never
// by hand-assembled report bytes — except the malformed-bytes cases.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <string>
#include <vector>

#include "dialed/asm_text.hpp"
#include "dialed/emulator.hpp"
#include "dialed/encode.hpp"
#include "dialed/instrument.hpp"
#include "dialed/layout.hpp"
#include "dialed/pox.hpp"
#include "dialed/verify.hpp"

using namespace dialed;

namespace {

const char* kLayoutText = R"(
er_min = 0x4000
er_max = 0x7fff
or_min = 0xe000
or_max = 0xeffe
stack_init = 0x3ffe
periph_min = 0x0100
periph_max = 0x010f
port.CMD_IN = 0x0100
port.P3OUT = 0x0102
)";

MemoryLayout lay() { return parse_layout(kLayoutText); }

AttestKey test_key() {
  AttestKey k{};
  for (size_t i = 0; i < k.size(); ++i) k[i] = static_cast<uint8_t>(3 * i + 1);
  return k;
}

Challenge test_challenge() {
  Challenge c{};
  for (size_t i = 0; i < c.size(); ++i) c[i] = static_cast<uint8_t>(5 * i + 2);
  return c;
}

std::vector<uint8_t> attest_bytes(const RunResult& run) {
  return serialize_report(attest(run, lay(), test_key(), test_challenge()));
}

VerifyResult verify_bytes(const std::vector<uint8_t>& bytes,
                          const Program& dfa_prog) {
  return verify_report(bytes, dfa_prog, lay(), test_key(), test_challenge());
}

// A small operation exercising input reads, a loop, a call, and a gpio
// write: reads a count and that many samples, sums them, reports the sum.
const char* kSumApp = R"(
.const CMD = 0x0100
.const OUT = 0x0102
    mov #0, r10
    mov #0, r11
    mov &CMD, r9
again:
    cmp r9, r10
    jeq report
    mov &CMD, r8
    add r8, r11
    inc r10
    jmp again
report:
    call #emit
    halt
emit:
    mov r11, &OUT
    ret
)";

}  // namespace

TEST_CASE("an honest run verifies, and replay walks the same steps") {
  auto lo = lay();
  auto dfa = instrument_text(kSumApp, InstrumentMode::Dfa, lo);
  PeripheralTrace t{{"CMD_IN", 0x0100, 3},
                    {"CMD_IN", 0x0100, 0x10},
                    {"CMD_IN", 0x0100, 0x20},
                    {"CMD_IN", 0x0100, 0x30}};
  RunResult run = run_operation(dfa.program, lo, t);
  REQUIRE(run.reason == HaltReason::Completed);
  REQUIRE(run.exec);
  REQUIRE(run.gpio_log.size() == 1);
  CHECK(run.gpio_log[0].value == 0x60);

  VerifyResult vr = verify_bytes(attest_bytes(run), dfa.program);
  CHECK(vr.verdict == VerifyVerdict::Verified);
  CHECK(vr.detail.empty());
  CHECK(vr.replay_steps == run.steps);
}

TEST_CASE("operation arguments are adopted from the report and verified") {
  auto lo = lay();
  auto dfa = instrument_text("    mov r8, &0x0102\n    halt\n",
                             InstrumentMode::Dfa, lo);
  std::array<uint16_t, 8> args{0xcafe, 1, 2, 3, 4, 5, 6, 7};
  RunResult run = run_operation(dfa.program, lo, {}, args);
  REQUIRE(run.reason == HaltReason::Completed);
  REQUIRE(run.gpio_log.size() == 1);
  CHECK(run.gpio_log[0].value == 0xcafe);

  VerifyResult vr = verify_bytes(attest_bytes(run), dfa.program);
  CHECK(vr.verdict == VerifyVerdict::Verified);
}

TEST_CASE("verification demands the dfa-instrumented program") {
  auto lo = lay();
  auto cfa = instrument_text("    halt\n", InstrumentMode::Cfa, lo);
  auto plain = parse_assembly("    halt\n");
  std::vector<uint8_t> bytes(64, 0);
  CHECK_THROWS_AS(verify_bytes(bytes, cfa.program), std::invalid_argument);
  CHECK_THROWS_AS(verify_bytes(bytes, plain), std::invalid_argument);
}

TEST_CASE("authenticity rejections") {
  auto lo = lay();
  auto dfa = instrument_text(kSumApp, InstrumentMode::Dfa, lo);
  PeripheralTrace t{{"CMD_IN", 0x0100, 1}, {"CMD_IN", 0x0100, 0x42}};
  RunResult run = run_operation(dfa.program, lo, t);
  std::vector<uint8_t> good = attest_bytes(run);

  SUBCASE("truncated bytes") {
    std::vector<uint8_t> cut(good.begin(), good.begin() + 10);
    VerifyResult vr = verify_bytes(cut, dfa.program);
    CHECK(vr.verdict == VerifyVerdict::TokenInvalid);
    CHECK(vr.detail.find("malformed") != std::string::npos);
  }
  SUBCASE("bad magic") {
    auto bad = good;
    bad[0] ^= 0xff;
    CHECK(verify_bytes(bad, dfa.program).verdict ==
          VerifyVerdict::TokenInvalid);
  }
  SUBCASE("challenge the verifier never issued") {
    Challenge other = test_challenge();
    other[0] ^= 1;
    VerifyResult vr =
        verify_report(good, dfa.program, lo, test_key(), other);
    CHECK(vr.verdict == VerifyVerdict::TokenInvalid);
    CHECK(vr.detail.find("challenge") != std::string::npos);
  }
  SUBCASE("wrong key") {
    AttestKey other = test_key();
    other[31] ^= 1;
    VerifyResult vr =
        verify_report(good, dfa.program, lo, other, test_challenge());
    CHECK(vr.verdict == VerifyVerdict::TokenInvalid);
    CHECK(vr.detail.find("token") != std::string::npos);
  }
  SUBCASE("tampered log bytes fail the token, not the replay") {
    auto bad = good;
    bad[4 + 16 + 2 + 2 + 1 + 2 + 6] ^= 0x40;  // a byte inside or_snapshot
    VerifyResult vr = verify_bytes(bad, dfa.program);
    CHECK(vr.verdict == VerifyVerdict::TokenInvalid);
    CHECK(vr.detail.find("token") != std::string::npos);
  }
  SUBCASE("a different program image fails the token") {
    auto other = instrument_text(
        "    mov #0, r11\n    mov r11, &0x0102\n    halt\n",
        InstrumentMode::Dfa, lo);
    VerifyResult vr = verify_bytes(good, other.program);
    CHECK(vr.verdict == VerifyVerdict::TokenInvalid);
    CHECK(vr.detail.find("token") != std::string::npos);
  }
  SUBCASE("flipping the exec byte cannot launder an aborted run") {
    auto aborting = instrument_text("    mov r5, &0xeffe\n    halt\n",
                                    InstrumentMode::Dfa, lo);
    RunResult ar = run_operation(aborting.program, lo, {});
    REQUIRE(ar.reason == HaltReason::Aborted);
    auto bytes = attest_bytes(ar);
    bytes[4 + 16 + 2 + 2] = 1;  // exec byte: pretend the flag survived
    VerifyResult vr = verify_bytes(bytes, aborting.program);
    CHECK(vr.verdict == VerifyVerdict::TokenInvalid);
    CHECK(vr.detail.find("token") != std::string::npos);
  }
}

TEST_CASE("an abort-stub exit is reported as LogOverflowAbort") {
  auto lo = lay();
  auto dfa = instrument_text("    mov r5, &0xeffe\n    halt\n",
                             InstrumentMode::Dfa, lo);
  RunResult run = run_operation(dfa.program, lo, {});
  REQUIRE(run.reason == HaltReason::Aborted);
  REQUIRE_FALSE(run.exec);
  VerifyResult vr = verify_bytes(attest_bytes(run), dfa.program);
  CHECK(vr.verdict == VerifyVerdict::LogOverflowAbort);
  CHECK(vr.detail.find("abort") != std::string::npos);
}

TEST_CASE("a monitor-cleared flag is reported as ExecCleared") {
  auto lo = lay();
  auto dfa = instrument_text(R"(
    mov #200, r10
spin:
    dec r10
    jne spin
    halt
)",
                             InstrumentMode::Dfa, lo);
  DeviceRun dev(dfa.program, lo, {});
  for (int i = 0; i < 50; ++i) dev.step();
  // A mid-run external write into the program region: vetoed and flagged.
  CHECK_FALSE(dev.external_write(lo.er_min, Width::Word, 0xdead));
  RunResult run = dev.run();
  REQUIRE(run.reason == HaltReason::Completed);
  REQUIRE_FALSE(run.exec);
  VerifyResult vr = verify_bytes(attest_bytes(run), dfa.program);
  CHECK(vr.verdict == VerifyVerdict::ExecCleared);
  CHECK(vr.detail.find("monitor") != std::string::npos);
}

TEST_CASE("behavior steered by unrecorded pre-seeded memory cannot verify") {
  // The comparison below reads its memory destination without that read
  // being an input record (only source operands are classified). With
  // untouched memory the run replays exactly; with memory seeded before
  // launch, the device branches differently than the replay and the very
  // first transfer record disagrees.
  auto lo = lay();
  const char* src = R"(
    mov #0x10, r5
    cmp r5, &0x0200
    jeq skip
    mov #1, &0x0102
skip:
    halt
)";
  auto dfa = instrument_text(src, InstrumentMode::Dfa, lo);

  SUBCASE("untouched memory verifies") {
    RunResult run = run_operation(dfa.program, lo, {});
    REQUIRE(run.reason == HaltReason::Completed);
    CHECK(verify_bytes(attest_bytes(run), dfa.program).verdict ==
          VerifyVerdict::Verified);
  }
  SUBCASE("seeded memory yields LogInconsistent") {
    DeviceRun dev(dfa.program, lo, {});
    REQUIRE(dev.external_write(0x0200, Width::Word, 0x10));
    RunResult run = dev.run();
    REQUIRE(run.reason == HaltReason::Completed);
    REQUIRE(run.exec);
    REQUIRE(run.gpio_log.empty());  // the branch was taken on the device
    VerifyResult vr = verify_bytes(attest_bytes(run), dfa.program);
    CHECK(vr.verdict == VerifyVerdict::LogInconsistent);
    CHECK(vr.detail.find("log slot") != std::string::npos);
  }
}

TEST_CASE("a return address planted through logged inputs is classified as "
          "a control-flow attack") {
  auto lo = lay();
  // Reads a count, then copies that many input words through a cursor into a
  // two-slot stack buffer. A count of 3 overruns into the return-address
  // slot; the third input then decides where `ret` goes.
  const char* src = R"(
.const CMD = 0x0100
.const OUT = 0x0102
    call #job
end:
    halt
job:
    sub #4, r1
    mov &CMD, r11
    mov #0, r10
    mov r1, r9
fill:
    cmp r11, r10
    jeq done
    mov &CMD, r8
    mov r8, 0(r9)
    add #2, r9
    inc r10
    jmp fill
done:
    add #4, r1
    ret
evil:
    mov #0xff, &OUT
    jmp end
)";
  auto dfa = instrument_text(src, InstrumentMode::Dfa, lo);
  auto img = encode(dfa.program, lo.er_min);
  uint16_t evil_addr =
      img.index_to_addr[static_cast<size_t>(dfa.program.labels.at("evil"))];

  SUBCASE("in-bounds copy verifies") {
    PeripheralTrace t{{"CMD_IN", 0x0100, 2},
                      {"CMD_IN", 0x0100, 0xaaaa},
                      {"CMD_IN", 0x0100, 0xbbbb}};
    RunResult run = run_operation(dfa.program, lo, t);
    REQUIRE(run.reason == HaltReason::Completed);
    CHECK(run.gpio_log.empty());
    CHECK(verify_bytes(attest_bytes(run), dfa.program).verdict ==
          VerifyVerdict::Verified);
  }
  SUBCASE("overflowing copy that redirects ret is detected") {
    PeripheralTrace t{{"CMD_IN", 0x0100, 3},
                      {"CMD_IN", 0x0100, 0xaaaa},
                      {"CMD_IN", 0x0100, 0xbbbb},
                      {"CMD_IN", 0x0100, evil_addr}};
    RunResult run = run_operation(dfa.program, lo, t);
    // The device itself sees nothing wrong: stores stayed outside the log
    // region, and the hijacked target is real program code.
    REQUIRE(run.reason == HaltReason::Completed);
    REQUIRE(run.exec);
    REQUIRE(run.gpio_log.size() == 1);  // the gadget did run
    CHECK(run.gpio_log[0].value == 0xff);

    VerifyResult vr = verify_bytes(attest_bytes(run), dfa.program);
    CHECK(vr.verdict == VerifyVerdict::ControlFlowAttack);
    CHECK(vr.detail.find("return") != std::string::npos);
  }
}

TEST_CASE("an out-of-object indexed store is classified as a data-only "
          "attack, naming the victim") {
  auto lo = lay();
  const char* src = R"(
.const CMD = 0x0100
.const OUT = 0x0102
.object table 0x0200 8
.object flag 0x0208 2
    mov &CMD, r8
    mov &CMD, r9
    add r9, r9
    mov r8, table(r9)
    mov &flag, r10
    mov r10, &OUT
    halt
)";
  auto dfa = instrument_text(src, InstrumentMode::Dfa, lo);

  SUBCASE("in-bounds index verifies") {
    PeripheralTrace t{{"CMD_IN", 0x0100, 0x5a}, {"CMD_IN", 0x0100, 2}};
    RunResult run = run_operation(dfa.program, lo, t);
    REQUIRE(run.reason == HaltReason::Completed);
    CHECK(verify_bytes(attest_bytes(run), dfa.program).verdict ==
          VerifyVerdict::Verified);
  }
  SUBCASE("index reaching the neighboring object is detected") {
    PeripheralTrace t{{"CMD_IN", 0x0100, 0x5a}, {"CMD_IN", 0x0100, 4}};
    RunResult run = run_operation(dfa.program, lo, t);
    // Control flow is identical to the benign run; only the store address
    // differs, and the device completes with the flag intact.
    REQUIRE(run.reason == HaltReason::Completed);
    REQUIRE(run.exec);
    REQUIRE(run.gpio_log.size() == 1);
    CHECK(run.gpio_log[0].value == 0x5a);  // the overwrite was read back

    VerifyResult vr = verify_bytes(attest_bytes(run), dfa.program);
    CHECK(vr.verdict == VerifyVerdict::DataOnlyAttack);
    CHECK(vr.detail.find("'table'") != std::string::npos);
    CHECK(vr.detail.find("'flag'") != std::string::npos);
  }
  SUBCASE("index past every object reports an unmapped victim") {
    PeripheralTrace t{{"CMD_IN", 0x0100, 0x5a}, {"CMD_IN", 0x0100, 0x20}};
    RunResult run = run_operation(dfa.program, lo, t);
    REQUIRE(run.reason == HaltReason::Completed);
    VerifyResult vr = verify_bytes(attest_bytes(run), dfa.program);
    CHECK(vr.verdict == VerifyVerdict::DataOnlyAttack);
    CHECK(vr.detail.find("(unmapped)") != std::string::npos);
  }
}

TEST_CASE("verdict names and exit codes") {
  CHECK(std::string(verdict_name(VerifyVerdict::Verified)) == "Verified");
  CHECK(std::string(verdict_name(VerifyVerdict::DataOnlyAttack)) ==
        "DataOnlyAttack");
  CHECK(verdict_exit_code(VerifyVerdict::Verified) == 0);
  CHECK(verdict_exit_code(VerifyVerdict::TokenInvalid) == 2);
  CHECK(verdict_exit_code(VerifyVerdict::ExecCleared) == 3);
  CHECK(verdict_exit_code(VerifyVerdict::ControlFlowAttack) == 4);
  CHECK(verdict_exit_code(VerifyVerdict::DataOnlyAttack) == 5);
  CHECK(verdict_exit_code(VerifyVerdict::LogInconsistent) == 6);
  CHECK(verdict_exit_code(VerifyVerdict::LogOverflowAbort) == 7);
}
