// Execution core and the monitored device.
//
// `execute_one` interprets a single instruction against a Machine, routing
// every data-memory access through a MemIf. The same interpreter drives both
// the device (DeviceRun, which adds peripherals and the execution monitor)
// and log replay on the verifier side, so the two can never drift.
//
// Cycle model: words fetched for the instruction + 1 per data-memory access.
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dialed/encode.hpp"
#include "dialed/isa.hpp"
#include "dialed/layout.hpp"

namespace dialed {

enum class AccessRole : uint8_t {
  SrcRead,   // source-operand data read
  DstRead,   // read-modify-write read of a memory destination
  DstWrite,  // destination store
  Stack,     // push/pop/call/ret stack word
};
const char* access_role_name(AccessRole r);

struct MemAccess {
  uint16_t addr = 0;
  Width width = Width::Word;
  uint16_t value = 0;   // value read or written
  AccessRole role = AccessRole::SrcRead;
  bool is_write = false;
};

// Data-memory port used by the interpreter. Implementations may substitute
// values on read (peripheral sampling, log replay) and veto or observe
// writes; the interpreter records whatever the port returned.
struct MemIf {
  virtual ~MemIf() = default;
  virtual uint16_t read(uint16_t addr, Width w, AccessRole role) = 0;
  virtual void write(uint16_t addr, Width w, uint16_t value, AccessRole role) = 0;
};

// Deterministic execution fault (odd-address word access, auto-increment on
// the program counter, stepping a halted machine, PC outside the program).
struct MachineFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Machine {
  std::array<uint16_t, 16> regs{};  // r1=SP; r2 mirrors flags on access
  bool c = false, z = false, n = false, v = false;
  int pc_index = 0;    // index of the instruction about to execute
  bool halted = false;

  uint16_t sr_pack() const {
    return static_cast<uint16_t>((c ? 1 : 0) | (z ? 2 : 0) | (n ? 4 : 0) |
                                 (v ? 0x100 : 0));
  }
  void sr_unpack(uint16_t w) {
    c = w & 1;
    z = w & 2;
    n = w & 4;
    v = w & 0x100;
  }
};

struct StepResult {
  int index = 0;          // instruction index that executed
  uint16_t pc_addr = 0;   // its address
  uint16_t next_pc = 0;   // address control transfers to (fallthrough, taken
                          // jump, call/ret target, or PC-write destination)
  bool halted = false;
  unsigned cycles = 0;
  std::vector<MemAccess> accesses;  // in execution order
};

// Executes p.instructions[m.pc_index]. Registers, flags, and memory are
// updated; m.pc_index is NOT advanced — the caller maps next_pc back to an
// instruction index (and decides what an unmappable address means).
StepResult execute_one(Machine& m, const Program& p, const EncodedImage& img,
                       MemIf& mem);

// ---------------------------------------------------------------------------
// Peripheral input trace: a FIFO of sampled port values. The port/addr column
// documents the intended consumer; consumption order is strictly file order,
// one entry per program-authored read from the peripheral window.

struct TraceEntry {
  std::string port;   // port name if known, else empty
  uint16_t addr = 0;  // advisory
  uint16_t value = 0;
};
using PeripheralTrace = std::vector<TraceEntry>;

// Lines: `PORT_NAME value` or `0xADDR value` (# comments, blank lines ok).
PeripheralTrace parse_trace(const std::string& text, const MemoryLayout& l);
PeripheralTrace load_trace(const std::string& path, const MemoryLayout& l);
std::string render_trace(const PeripheralTrace& t);

// ---------------------------------------------------------------------------
// Monitored device run.

enum class HaltReason : uint8_t {
  Running,    // not finished yet
  Completed,  // reached a designated exit (a HALT of the original program)
  Aborted,    // reached the instrumentation abort label
  LeftEr,     // control left the executable region
  StepLimit,  // ran past the step budget
  Fault,      // deterministic machine fault
};
const char* halt_reason_name(HaltReason r);

enum class ExecClearCause : uint8_t {
  None,            // exec still set
  ErWrite,         // program stored into its own code region
  OrWriteOutsideEr,
  ExternalTamper,  // external write into ER/OR while the operation ran
  Abort,
  LeftEr,
  StepLimit,
  Fault,
};
const char* exec_clear_cause_name(ExecClearCause c);

struct GpioEvent {
  uint16_t addr = 0;
  uint16_t value = 0;
  Width width = Width::Word;
};

struct RunResult {
  HaltReason reason = HaltReason::Running;
  bool exec = false;              // authenticated-execution flag at the end
  ExecClearCause cause = ExecClearCause::None;
  uint64_t steps = 0;
  uint64_t cycles = 0;
  uint16_t r4_final = 0;
  std::vector<GpioEvent> gpio_log;
  std::vector<uint8_t> er_entry_image;  // ER bytes at operation entry
  std::vector<uint8_t> or_snapshot;     // OR bytes at the end (or_len bytes)
  Machine machine;                      // final register/flag state
};

class DeviceRun : public MemIf {
 public:
  // Encodes the program at er_min, loads it, zeroes the rest of memory, and
  // arms the operation: SP = stack_init, r4 = or_max, PC at the first
  // instruction. Throws AsmError(ImageOverflow) if the image exceeds the ER.
  DeviceRun(Program program, MemoryLayout layout, PeripheralTrace trace);

  // One instruction. No-op once finished.
  void step();
  // Runs to completion or the step budget.
  static constexpr uint64_t kDefaultStepLimit = 2'000'000;
  RunResult run(uint64_t max_steps = kDefaultStepLimit);

  // External (non-CPU) write. Applied before the first step; once the
  // operation is running it is vetoed, and a veto that targeted ER or OR
  // also clears the exec flag.
  bool external_write(uint16_t addr, Width w, uint16_t value);

  // Operation arguments, handed over by the launcher in r8..r15. Only
  // effective before the first step.
  void set_entry_args(const std::array<uint16_t, 8>& args);

  bool finished() const { return reason_ != HaltReason::Running; }
  RunResult result() const;

  const Machine& machine() const { return m_; }
  const EncodedImage& image() const { return img_; }
  const Program& program() const { return prog_; }
  const MemoryLayout& layout() const { return layout_; }
  const std::vector<MemAccess>& last_accesses() const { return last_accesses_; }
  uint16_t read_word(uint16_t addr) const {
    return static_cast<uint16_t>(mem_[addr] | (mem_[static_cast<uint16_t>(addr + 1)] << 8));
  }

  // MemIf (interpreter side; peripherals sample on read, monitor sees writes)
  uint16_t read(uint16_t addr, Width w, AccessRole role) override;
  void write(uint16_t addr, Width w, uint16_t value, AccessRole role) override;

 private:
  void finish(HaltReason r, ExecClearCause c);
  void clear_exec(ExecClearCause c);

  Program prog_;
  MemoryLayout layout_;
  EncodedImage img_;
  PeripheralTrace trace_;
  size_t trace_pos_ = 0;
  std::array<uint8_t, 65536> mem_{};
  Machine m_;
  bool started_ = false;
  HaltReason reason_ = HaltReason::Running;
  bool exec_ = true;
  ExecClearCause cause_ = ExecClearCause::None;
  uint64_t steps_ = 0;
  uint64_t cycles_ = 0;
  int abort_index_ = -1;
  TemplateKind cur_ttag_ = TemplateKind::None;
  std::vector<GpioEvent> gpio_log_;
  std::vector<uint8_t> er_entry_image_;
  std::vector<MemAccess> last_accesses_;
};

// Convenience wrapper: construct, run, collect.
RunResult run_operation(const Program& program, const MemoryLayout& layout,
                        const PeripheralTrace& trace,
                        uint64_t max_steps = DeviceRun::kDefaultStepLimit);
RunResult run_operation(const Program& program, const MemoryLayout& layout,
                        const PeripheralTrace& trace,
                        const std::array<uint16_t, 8>& args,
                        uint64_t max_steps = DeviceRun::kDefaultStepLimit);

} // namespace dialed
