// Report verification: token checks, execution-log replay, and attack
// classification.
//
// The verifier holds what the device is supposed to be running — the
// dfa-instrumented program, the memory layout, and the attestation key —
// plus the challenge it issued. Given a report it decides, in order:
//
//   1. authenticity — malformed bytes, a wrong challenge, mismatched region
//      bounds, or a bad token reject the report outright (TokenInvalid);
//   2. execution integrity — a cleared exec flag means the operation was
//      interrupted: by the instrumentation's own abort stub (LogOverflowAbort
//      — the stub runs on log exhaustion, a stale log pointer, or a guarded
//      store into the log) or by the monitor itself (ExecCleared);
//   3. log consistency — the program is re-executed locally. Reads that the
//      on-device classifier would have recorded (outside the live stack
//      interval) are answered from the reported log instead of replay
//      memory, and every template write into the log region must reproduce
//      the reported bytes exactly; the replay must reach the program's own
//      halt and leave a bit-identical log image (else LogInconsistent);
//   4. control flow — every transfer observed during replay must follow the
//      instrumented program's control-flow graph, with calls and returns
//      checked against a shadow stack (else ControlFlowAttack);
//   5. data flow — an indexed store whose constant anchor lies inside a
//      declared object must land inside that same object (else
//      DataOnlyAttack, naming the object actually hit).
//
// The first failing stage names the verdict. A report that passes all five
// is Verified: the exact execution, including every external input, has been
// reproduced on the verifier.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dialed/isa.hpp"
#include "dialed/layout.hpp"
#include "dialed/pox.hpp"

namespace dialed {

enum class VerifyVerdict : uint8_t {
  Verified,
  TokenInvalid,
  ExecCleared,
  ControlFlowAttack,
  DataOnlyAttack,
  LogInconsistent,
  LogOverflowAbort,
};
const char* verdict_name(VerifyVerdict v);
// Process exit code the CLI maps each verdict to (Verified = 0).
int verdict_exit_code(VerifyVerdict v);

struct VerifyResult {
  VerifyVerdict verdict = VerifyVerdict::TokenInvalid;
  std::string detail;       // one-line diagnosis; empty when Verified
  uint64_t replay_steps = 0;  // instructions replayed (0 if replay not reached)
};

// `program` must be the dfa-instrumented program (replay needs the complete
// input log the dfa templates produce); throws std::invalid_argument
// otherwise. Throws AsmError if the program cannot be encoded at er_min.
VerifyResult verify_report(const std::vector<uint8_t>& report_bytes,
                           const Program& program, const MemoryLayout& layout,
                           const AttestKey& key, const Challenge& challenge,
                           uint64_t max_steps = 2'000'000);

} // namespace dialed
