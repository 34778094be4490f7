#include "dialed/verify.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <sstream>

#include "dialed/cfg.hpp"
#include "dialed/emulator.hpp"
#include "dialed/encode.hpp"
#include "dialed/instrument.hpp"

namespace dialed {

const char* verdict_name(VerifyVerdict v) {
  switch (v) {
    case VerifyVerdict::Verified: return "Verified";
    case VerifyVerdict::TokenInvalid: return "TokenInvalid";
    case VerifyVerdict::ExecCleared: return "ExecCleared";
    case VerifyVerdict::ControlFlowAttack: return "ControlFlowAttack";
    case VerifyVerdict::DataOnlyAttack: return "DataOnlyAttack";
    case VerifyVerdict::LogInconsistent: return "LogInconsistent";
    case VerifyVerdict::LogOverflowAbort: return "LogOverflowAbort";
  }
  return "?";
}

int verdict_exit_code(VerifyVerdict v) {
  switch (v) {
    case VerifyVerdict::Verified: return 0;
    case VerifyVerdict::TokenInvalid: return 2;
    case VerifyVerdict::ExecCleared: return 3;
    case VerifyVerdict::ControlFlowAttack: return 4;
    case VerifyVerdict::DataOnlyAttack: return 5;
    case VerifyVerdict::LogInconsistent: return 6;
    case VerifyVerdict::LogOverflowAbort: return 7;
  }
  return 1;
}

namespace {

std::string hex4(uint16_t v) {
  std::ostringstream o;
  o << "0x" << std::hex << v;
  return o.str();
}

const ObjectEntry* object_containing(const std::vector<ObjectEntry>& objs,
                                     uint16_t addr) {
  for (const auto& o : objs)
    if (addr >= o.base && addr < static_cast<uint32_t>(o.base) + o.len)
      return &o;
  return nullptr;
}

// Replay-side memory: zeros plus the program image. Reads at recorded input
// sites are answered from the reported log; template writes into the log
// region are checked against it.
class ReplayMem final : public MemIf {
 public:
  ReplayMem(const MemoryLayout& lay, const std::vector<uint8_t>& dev_or,
            const Machine& m)
      : lay_(lay), dev_or_(dev_or), m_(m) {}

  std::array<uint8_t, 65536> mem{};

  // Per-step context, set by the replay loop before execute_one.
  TemplateKind ttag = TemplateKind::None;
  bool site = false;       // current instruction is a program-authored read site
  uint16_t sp_entry = 0;   // SP when the instruction started
  uint16_t bias = 0;       // classifier slack: 2 for sp-indexed sites, else 0

  std::optional<std::string> log_mismatch;

  uint16_t dev_or_word(uint16_t addr) const {
    size_t off = static_cast<size_t>(addr - lay_.or_min);
    return static_cast<uint16_t>(dev_or_[off] | (dev_or_[off + 1] << 8));
  }

  uint16_t read(uint16_t addr, Width w, AccessRole role) override {
    // The on-device classifier records a source read iff its address lies
    // outside the live stack interval at classification time. For sp-indexed
    // sites the classifier runs with SP two lower (its scratch push), hence
    // the bias.
    bool recorded = role == AccessRole::SrcRead &&
                    ttag == TemplateKind::None && site &&
                    (addr < static_cast<uint16_t>(sp_entry - bias) ||
                     addr > lay_.stack_init);
    if (recorded && !log_mismatch) {
      uint16_t r4 = m_.regs[4];
      if (r4 < lay_.or_min || r4 > lay_.or_max) {
        log_mismatch = "input read at " + hex4(addr) +
                       " has no remaining log slot";
        return 0;
      }
      uint16_t slot = dev_or_word(r4);
      uint16_t value = (w == Width::Byte) ? static_cast<uint16_t>(slot & 0xff)
                                          : slot;
      // Materialize the input so the template's own re-read (and any later
      // self-read) observes it — except inside the log region itself, which
      // must stay exactly what the templates write.
      if (!lay_.in_or(addr)) store(addr, w, value);
      return value;
    }
    return load(addr, w);
  }

  void write(uint16_t addr, Width w, uint16_t value, AccessRole) override {
    if (ttag != TemplateKind::None && lay_.in_or(addr) && !log_mismatch) {
      uint16_t expect = (w == Width::Byte)
                            ? dev_or_[addr - lay_.or_min]
                            : dev_or_word(addr);
      if (value != expect)
        log_mismatch = "log slot " + hex4(addr) + ": replay wrote " +
                       hex4(value) + " but the report holds " + hex4(expect);
    }
    store(addr, w, value);
  }

 private:
  uint16_t load(uint16_t a, Width w) const {
    if (w == Width::Byte) return mem[a];
    return static_cast<uint16_t>(mem[a] |
                                 (mem[static_cast<uint16_t>(a + 1)] << 8));
  }
  void store(uint16_t a, Width w, uint16_t v) {
    mem[a] = static_cast<uint8_t>(v);
    if (w == Width::Word)
      mem[static_cast<uint16_t>(a + 1)] = static_cast<uint8_t>(v >> 8);
  }

  const MemoryLayout& lay_;
  const std::vector<uint8_t>& dev_or_;
  const Machine& m_;
};

}  // namespace

VerifyResult verify_report(const std::vector<uint8_t>& report_bytes,
                           const Program& program, const MemoryLayout& layout,
                           const AttestKey& key, const Challenge& challenge,
                           uint64_t max_steps) {
  if (!program.instrumented || program.instrumented_mode != "dfa")
    throw std::invalid_argument(
        "verification requires the dfa-instrumented program");

  // --- 1. authenticity -----------------------------------------------------
  Report r;
  try {
    r = parse_report(report_bytes);
  } catch (const ReportError& e) {
    return {VerifyVerdict::TokenInvalid,
            std::string("malformed report: ") + e.what(), 0};
  }
  if (r.challenge != challenge)
    return {VerifyVerdict::TokenInvalid, "challenge mismatch", 0};
  if (r.er_min != layout.er_min || r.er_max != layout.er_max)
    return {VerifyVerdict::TokenInvalid,
            "executable-region bounds mismatch", 0};
  if (r.or_snapshot.size() != layout.or_len())
    return {VerifyVerdict::TokenInvalid, "log-region length mismatch", 0};

  EncodedImage img = encode(program, layout.er_min);
  std::vector<uint8_t> entry_image(
      static_cast<size_t>(layout.er_max) + 1 - layout.er_min, 0);
  std::copy(img.bytes.begin(), img.bytes.end(), entry_image.begin());
  if (!verify_token(r, entry_image, key))
    return {VerifyVerdict::TokenInvalid, "token mismatch", 0};

  // --- 2. execution integrity ---------------------------------------------
  if (r.exec == ExecStatus::ClearedByAbort)
    return {VerifyVerdict::LogOverflowAbort,
            "the instrumentation abort stub ran on the device", 0};
  if (r.exec != ExecStatus::Set)
    return {VerifyVerdict::ExecCleared,
            "the monitor cleared the execution flag", 0};

  // --- 3. replay -----------------------------------------------------------
  Cfg cfg = build_cfg(program, img);

  Machine m;
  m.regs[1] = layout.stack_init;
  m.regs[4] = layout.or_max;
  m.pc_index = 0;

  ReplayMem mem(layout, r.or_snapshot, m);
  std::copy(img.bytes.begin(), img.bytes.end(), mem.mem.begin() + img.base);

  // Adopt the reported operation arguments; the prologue's own pushes then
  // confirm them (and the stack-pointer slot) against the log.
  if (layout.or_len() >= 18) {
    for (int i = 0; i < 8; ++i) {
      uint16_t slot = static_cast<uint16_t>(layout.or_max - 2 - 2 * i);
      m.regs[static_cast<size_t>(8 + i)] = mem.dev_or_word(slot);
    }
  }

  std::vector<uint16_t> shadow;  // expected return addresses
  std::optional<std::string> cf_violation;
  struct IndexedStore {
    int index;
    uint16_t addr;
  };
  std::vector<IndexedStore> indexed_stores;
  uint64_t steps = 0;
  bool completed = false;

  while (true) {
    const Instruction& ins =
        program.instructions[static_cast<size_t>(m.pc_index)];
    mem.ttag = ins.ttag;
    mem.site = ins.ttag == TemplateKind::None && is_read_site(ins);
    mem.sp_entry = m.regs[1];
    mem.bias = static_cast<uint16_t>(
        mem.site && ins.src->mode == AddrMode::Indexed && ins.src->reg == 1
            ? 2
            : 0);

    int idx = m.pc_index;
    StepResult sr;
    try {
      sr = execute_one(m, program, img, mem);
    } catch (const MachineFault& f) {
      return {VerifyVerdict::LogInconsistent,
              std::string("replay fault: ") + f.what(), steps};
    }
    ++steps;

    if (mem.log_mismatch)
      return {VerifyVerdict::LogInconsistent, *mem.log_mismatch, steps};

    // Data-flow bookkeeping: program-authored indexed stores.
    if (ins.ttag == TemplateKind::None && ins.dst &&
        ins.dst->mode == AddrMode::Indexed) {
      for (const MemAccess& a : sr.accesses)
        if (a.role == AccessRole::DstWrite && a.is_write)
          indexed_stores.push_back({idx, a.addr});
    }

    // Control-flow conformance for this step's transfer.
    const CfSucc& s = cfg.succ[static_cast<size_t>(idx)];
    auto legal_direct = [&](uint16_t pc) {
      for (int t : s.direct)
        if (img.index_to_addr[static_cast<size_t>(t)] == pc) return true;
      return false;
    };
    if (!cf_violation && !sr.halted) {
      if (ins.op == Opcode::Ret) {
        if (shadow.empty()) {
          cf_violation = "return at " + hex4(sr.pc_addr) +
                         " with an empty call stack";
        } else {
          uint16_t want = shadow.back();
          shadow.pop_back();
          if (sr.next_pc != want)
            cf_violation = "return at " + hex4(sr.pc_addr) + " went to " +
                           hex4(sr.next_pc) + " instead of " + hex4(want);
        }
      } else if (ins.op == Opcode::Call) {
        if (s.return_site >= 0)
          shadow.push_back(
              img.index_to_addr[static_cast<size_t>(s.return_site)]);
        bool ok = s.dynamic ? img.addr_to_index.count(sr.next_pc) > 0
                            : legal_direct(sr.next_pc);
        if (!ok)
          cf_violation = "call at " + hex4(sr.pc_addr) +
                         " reached unexpected target " + hex4(sr.next_pc);
      } else if (is_jump(ins.op)) {
        if (!legal_direct(sr.next_pc))
          cf_violation = "jump at " + hex4(sr.pc_addr) +
                         " reached unexpected target " + hex4(sr.next_pc);
      } else if (s.dynamic) {
        if (img.addr_to_index.count(sr.next_pc) == 0)
          cf_violation = "dynamic transfer at " + hex4(sr.pc_addr) +
                         " left the program (" + hex4(sr.next_pc) + ")";
      }
    } else if (ins.op == Opcode::Ret && !shadow.empty() && !sr.halted) {
      shadow.pop_back();  // keep depth tracking past the first violation
    } else if (ins.op == Opcode::Call && s.return_site >= 0 && !sr.halted) {
      shadow.push_back(img.index_to_addr[static_cast<size_t>(s.return_site)]);
    }

    if (sr.halted) {
      if (ins.ttag == TemplateKind::Abort)
        return {VerifyVerdict::LogInconsistent,
                "replay reached the abort stub at " + hex4(sr.pc_addr),
                steps};
      completed = true;
      break;
    }

    auto it = img.addr_to_index.find(sr.next_pc);
    if (it == img.addr_to_index.end()) {
      if (cf_violation)
        return {VerifyVerdict::ControlFlowAttack, *cf_violation, steps};
      return {VerifyVerdict::ControlFlowAttack,
              "transfer at " + hex4(sr.pc_addr) + " to " + hex4(sr.next_pc) +
                  ", which is not an instruction",
              steps};
    }
    m.pc_index = it->second;

    if (steps >= max_steps)
      return {VerifyVerdict::LogInconsistent, "replay exceeded the step budget",
              steps};
  }
  (void)completed;

  // Final log image must be byte-identical to the report.
  for (size_t i = 0; i < r.or_snapshot.size(); ++i) {
    uint8_t replayed = mem.mem[layout.or_min + i];
    if (replayed != r.or_snapshot[i])
      return {VerifyVerdict::LogInconsistent,
              "log byte at " +
                  hex4(static_cast<uint16_t>(layout.or_min + i)) +
                  ": replay produced " + hex4(replayed) +
                  " but the report holds " + hex4(r.or_snapshot[i]),
              steps};
  }

  // --- 4. control flow -----------------------------------------------------
  if (cf_violation)
    return {VerifyVerdict::ControlFlowAttack, *cf_violation, steps};

  // --- 5. data flow --------------------------------------------------------
  for (const IndexedStore& st : indexed_stores) {
    const Operand& d = *program.instructions[static_cast<size_t>(st.index)].dst;
    const ObjectEntry* home = object_containing(program.object_map, d.value);
    if (!home) continue;
    if (st.addr >= home->base &&
        st.addr < static_cast<uint32_t>(home->base) + home->len)
      continue;
    const ObjectEntry* victim = object_containing(program.object_map, st.addr);
    return {VerifyVerdict::DataOnlyAttack,
            "store anchored in object '" + home->name + "' wrote " +
                hex4(st.addr) + " inside " +
                (victim ? "object '" + victim->name + "'"
                        : std::string("(unmapped)")),
            steps};
  }

  return {VerifyVerdict::Verified, "", steps};
}

} // namespace dialed
