#include "dialed/instrument.hpp"

#include <cstdio>
#include <string>
#include <vector>

#include "dialed/asm_text.hpp"

namespace dialed {

namespace {

constexpr const char* kReservedNames[] = {"OR_MIN", "OR_MAX", "OR_END",
                                          "STACK_EDGE"};

std::string hex(uint32_t v) {
  char buf[12];
  std::snprintf(buf, sizeof buf, "0x%x", v);
  return buf;
}

std::string reg_name(int r) { return "r" + std::to_string(r); }

bool is_mem_mode(AddrMode m) {
  return m == AddrMode::Indirect || m == AddrMode::IndirectAutoInc ||
         m == AddrMode::Indexed || m == AddrMode::Absolute;
}

bool mode_has_reg(AddrMode m) {
  return m == AddrMode::RegDirect || m == AddrMode::Indirect ||
         m == AddrMode::IndirectAutoInc || m == AddrMode::Indexed;
}

// Does the instruction update the status flags? (mov, bis, stack and
// control-transfer instructions do not.)
bool sets_flags(Opcode op) {
  switch (op) {
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Cmp:
    case Opcode::And:
    case Opcode::Xor:
    case Opcode::Dec:
    case Opcode::Inc:
      return true;
    default:
      return false;
  }
}

[[noreturn]] void reject(InstrumentErrorKind k, const Instruction* ins,
                         const std::string& msg) {
  throw InstrumentError(k, ins ? ins->source_line : 0, msg);
}

bool writes_pc(const Instruction& ins) {
  const auto reg_dst = [](const std::optional<Operand>& op) {
    return op && op->mode == AddrMode::RegDirect && op->reg == 0;
  };
  if (is_two_operand(ins.op)) return reg_dst(ins.dst);
  if (ins.op == Opcode::Pop || ins.op == Opcode::Dec || ins.op == Opcode::Inc)
    return reg_dst(ins.dst);
  return false;
}

void validate(const Program& p, InstrumentMode mode) {
  if (p.instrumented)
    throw InstrumentError(InstrumentErrorKind::AlreadyInstrumented, 0,
                          "program is already instrumented");
  if (p.instructions.empty())
    throw InstrumentError(InstrumentErrorKind::EmptyProgram, 0,
                          "nothing to instrument");

  for (const auto& [name, idx] : p.labels) {
    (void)idx;
    if (name == ".L11" || name.rfind(".Ldial", 0) == 0)
      throw InstrumentError(InstrumentErrorKind::ReservedSymbol, 0,
                            "label '" + name + "' is reserved");
    for (const char* r : kReservedNames)
      if (name == r)
        throw InstrumentError(InstrumentErrorKind::ReservedSymbol, 0,
                              "label '" + name + "' shadows a reserved constant");
  }
  for (const char* r : kReservedNames) {
    if (p.constants.count(r))
      throw InstrumentError(InstrumentErrorKind::ReservedSymbol, 0,
                            std::string("constant '") + r + "' is reserved");
    for (const auto& o : p.object_map)
      if (o.name == r)
        throw InstrumentError(InstrumentErrorKind::ReservedSymbol, 0,
                              std::string("object '") + r + "' is reserved");
  }

  const int n = static_cast<int>(p.instructions.size());
  for (int i = 0; i < n; ++i) {
    const Instruction& ins = p.instructions[i];

    for (const std::optional<Operand>* slot : {&ins.src, &ins.dst}) {
      if (!*slot) continue;
      const Operand& op = **slot;
      if (mode_has_reg(op.mode) && (op.reg == 2 || op.reg == 4))
        reject(InstrumentErrorKind::ReservedRegister, &ins,
               "r2 and r4 are reserved for instrumentation");
    }

    if (writes_pc(ins))
      reject(InstrumentErrorKind::PcWrite, &ins,
             "computed jumps by writing r0 cannot be rewritten");
    if (ins.src && ins.src->mode == AddrMode::IndirectAutoInc &&
        ins.src->reg == 0)
      reject(InstrumentErrorKind::PcWrite, &ins,
             "@r0+ advances the program counter");

    if (is_jump(ins.op) && ins.target && ins.target->label.empty())
      reject(InstrumentErrorKind::NumericTarget, &ins,
             "jump targets must be labels (addresses shift when rewriting)");
    if (ins.op == Opcode::Call && ins.dst &&
        ins.dst->mode == AddrMode::Immediate && ins.dst->sym.empty())
      reject(InstrumentErrorKind::NumericTarget, &ins,
             "call targets must be labels (addresses shift when rewriting)");

    if (mode != InstrumentMode::Dfa) continue;

    // Input-logging completeness checks.
    if ((ins.op == Opcode::Push || ins.op == Opcode::Call) && ins.dst &&
        is_mem_mode(ins.dst->mode))
      reject(InstrumentErrorKind::UnsupportedSite, &ins,
             "memory-operand push/call reads are not input-logged; load into "
             "a register first");

    if (!is_read_site(ins)) continue;
    const Operand& src = *ins.src;

    if (mode_has_reg(src.mode) && src.reg == 0)
      reject(InstrumentErrorKind::UnsupportedSite, &ins,
             "pc-relative reads cannot be classified");
    if (ins.width == Width::Byte &&
        !(ins.op == Opcode::Mov && ins.dst->mode == AddrMode::RegDirect))
      reject(InstrumentErrorKind::UnsupportedSite, &ins,
             "byte-width read sites must be mov.b into a register");
    if (mode_has_reg(src.mode) && ins.dst->mode == AddrMode::RegDirect &&
        ins.dst->reg == src.reg)
      reject(InstrumentErrorKind::UnsupportedSite, &ins,
             "read site destroys its own address register");
    if (is_mem_mode(ins.dst->mode)) {
      bool alias = false;
      if (mode_has_reg(src.mode) && mode_has_reg(ins.dst->mode) &&
          src.reg == ins.dst->reg)
        alias = true;
      if (src.mode == AddrMode::Absolute && ins.dst->mode == AddrMode::Absolute &&
          src.value == ins.dst->value)
        alias = true;
      if (alias)
        reject(InstrumentErrorKind::UnsupportedSite, &ins,
               "read site source aliases the destination");
    }

    // The classifier clobbers flags: reject when a conditional jump would
    // consume flags set at or before this site with no refresh in between.
    for (int j = i + 1; j < n; ++j) {
      const Opcode oj = p.instructions[j].op;
      if (is_conditional_jump(oj))
        reject(InstrumentErrorKind::UnsupportedSite, &ins,
               "flags are not preserved across a read site; hoist the load "
               "before the compare");
      if (sets_flags(oj) || oj == Opcode::Jmp || oj == Opcode::Call ||
          oj == Opcode::Ret || oj == Opcode::Halt)
        break;
    }
  }
}

struct Rewriter {
  const Program& p;
  InstrumentMode mode;
  const MemoryLayout& lay;
  std::vector<std::string> out;
  int next_label = 0;

  std::string fresh() { return ".Ldial" + std::to_string(next_label++); }
  void raw(std::string s) { out.push_back(std::move(s)); }
  void ins(const std::string& s) { out.push_back("    " + s); }
  void begin(const char* region) {
    raw(std::string("; DIALED-BEGIN ") + region);
  }
  void end() { raw("; DIALED-END"); }

  // The four-instruction evidence push: overflow guard, then store the value
  // at the log pointer and advance it downward.
  void log_push(const std::string& value) {
    ins("cmp #OR_MIN, r4");
    ins("jlo .L11");
    ins("mov " + value + ", @r4");
    ins("sub #2, r4");
  }

  // Control-transfer record with the caller's flags preserved.
  void cf_simple(const char* region, const std::string& value) {
    begin(region);
    ins("push r2");
    log_push(value);
    ins("pop r2");
    end();
  }

  // A conditional branch is rewritten into two arms, each of which records
  // the address execution actually continues at. The original condition is
  // evaluated first, on the original flags.
  void cf_branch(const Instruction& br) {
    const std::string taken = fresh();
    const std::string done = fresh();
    const std::string& target = br.target->label;
    begin("cf-branch");
    ins(std::string(opcode_name(br.op)) + " " + taken);
    ins("push r2");
    log_push("#" + done);
    ins("pop r2");
    ins("jmp " + done);
    raw(taken + ":");
    ins("push r2");
    log_push("#" + target);
    ins("pop r2");
    ins("jmp " + target);
    raw(done + ":");
    end();
  }

  // Store guards: abort unless the write target is outside [r4, OR_END),
  // the live part of the log (current slot, everything already recorded,
  // and the launch metadata). Flags are preserved.
  void guard_value_in_reg(const std::string& reg) {
    const std::string ok = fresh();
    ins("cmp r4, " + reg);
    ins("jlo " + ok);
    ins("cmp #OR_END, " + reg);
    ins("jhs " + ok);
    ins("jmp .L11");
    raw(ok + ":");
  }

  // push/call: the stored word lands at sp-2, which is exactly r1 once the
  // guard has pushed the saved status register.
  void guard_sp_store() {
    begin("write-guard");
    ins("push r2");
    guard_value_in_reg("r1");
    ins("pop r2");
    end();
  }

  void guard_indirect(int reg) {
    begin("write-guard");
    ins("push r2");
    guard_value_in_reg(reg_name(reg));
    ins("pop r2");
    end();
  }

  void guard_indexed(const Operand& dst) {
    const bool sp_base = dst.reg == 1;
    // With r1 as the base, the guard's own `push r2` has moved sp down by
    // two, so the offset is biased to land on the original target.
    const std::string off =
        sp_base ? "#" + hex(uint16_t(dst.value + 2))
                : (dst.sym.empty() ? "#" + hex(dst.value) : "#" + dst.sym);
    const std::string base = reg_name(dst.reg);
    begin("write-guard");
    ins("push r2");
    ins("add " + off + ", " + base);
    guard_value_in_reg(base);
    ins("sub " + off + ", " + base);
    ins("pop r2");
    end();
  }

  void guard_absolute(const Operand& dst) {
    begin("write-guard");
    if (!(dst.value >= lay.or_min && dst.value < lay.or_end())) {
      raw("; static store target outside the log region");
    } else {
      // Target is inside the region: abort unless it is strictly below the
      // log pointer (an already-consumed slot can never sit below r4).
      ins("push r2");
      ins("cmp #" + hex(dst.value) + ", r4");
      ins("jlo .L11");
      ins("jeq .L11");
      ins("pop r2");
    }
    end();
  }

  void guard_store(const Instruction& ins_) {
    if (ins_.op == Opcode::Push || ins_.op == Opcode::Call) {
      guard_sp_store();
      return;
    }
    const Operand& dst = *ins_.dst;
    switch (dst.mode) {
      case AddrMode::Indirect:
        guard_indirect(dst.reg);
        break;
      case AddrMode::Indexed:
        guard_indexed(dst);
        break;
      case AddrMode::Absolute:
        guard_absolute(dst);
        break;
      default:
        break;  // register destinations store nothing
    }
  }

  // Value expression recorded by a read-site classifier: the destination
  // register when the load already put the value there, otherwise a re-read
  // through the given address expression.
  std::string site_value(const Instruction& ins_, const std::string& addr_expr) {
    if (ins_.op == Opcode::Mov && ins_.dst->mode == AddrMode::RegDirect)
      return reg_name(ins_.dst->reg);
    return addr_expr;
  }

  // Classifier core: record the value unless the address (in `reg`) lies in
  // the operation's own stack interval.
  void classify_reg(const std::string& reg, const std::string& value) {
    const std::string log_lbl = fresh();
    const std::string skip = fresh();
    ins("cmp r1, " + reg);
    ins("jlo " + log_lbl);
    ins("cmp #STACK_EDGE, " + reg);
    ins("jlo " + skip);
    raw(log_lbl + ":");
    log_push(value);
    raw(skip + ":");
  }

  void read_log_plain(const Instruction& ins_) {
    begin("read-log");
    classify_reg(reg_name(ins_.src->reg),
                 site_value(ins_, "@" + reg_name(ins_.src->reg)));
    end();
  }

  void read_log_absolute(const Instruction& ins_) {
    const uint16_t addr = ins_.src->value;
    const bool below_edge = addr <= lay.stack_init;
    const std::string log_lbl = fresh();
    const std::string skip = fresh();
    begin("read-log");
    // sp > addr means the address sits below the stack, hence outside it.
    ins("cmp #" + hex(uint16_t(addr + 1)) + ", r1");
    ins("jhs " + log_lbl);
    // Whether the address clears the launch-time stack edge is static; the
    // branch sense encodes it (self-compare forces Z so the jump is total).
    ins("cmp r1, r1");
    ins((below_edge ? "jeq " : "jne ") + skip);
    raw(log_lbl + ":");
    log_push(site_value(ins_, render_operand(*ins_.src)));
    raw(skip + ":");
    end();
  }

  void read_log_indexed(const Instruction& ins_) {
    const Operand& src = *ins_.src;
    const std::string base = reg_name(src.reg);
    const std::string off =
        src.sym.empty() ? "#" + hex(src.value) : "#" + src.sym;
    begin("read-log-idx");
    ins("add " + off + ", " + base);
    classify_reg(base, site_value(ins_, "@" + base));
    ins("sub " + off + ", " + base);
    end();
  }

  void read_log_sp_indexed(const Instruction& ins_) {
    // sp-relative read: borrow a scratch register (saved on the stack, which
    // shifts sp by two — the biased offset and the classifier account for it).
    int scratch = 5;
    while (ins_.dst->mode == AddrMode::RegDirect && ins_.dst->reg == scratch)
      ++scratch;
    const std::string rs = reg_name(scratch);
    begin("read-log-spidx");
    ins("push " + rs);
    ins("mov r1, " + rs);
    ins("add #" + hex(uint16_t(ins_.src->value + 2)) + ", " + rs);
    classify_reg(rs, site_value(ins_, "@" + rs));
    ins("pop " + rs);
    end();
  }

  // Auto-increment reads are desugared: the rewritten instruction reads
  // without advancing, the classifier sees the pre-increment address, and an
  // explicit add performs the advance.
  void read_log_autoinc(const Instruction& ins_) {
    const std::string base = reg_name(ins_.src->reg);
    const int step = ins_.width == Width::Byte ? 1 : 2;
    begin("read-log");
    classify_reg(base, site_value(ins_, "@" + base));
    ins("add #" + std::to_string(step) + ", " + base);
    end();
  }

  void read_log(const Instruction& ins_) {
    switch (ins_.src->mode) {
      case AddrMode::Indirect:
        read_log_plain(ins_);
        break;
      case AddrMode::Absolute:
        read_log_absolute(ins_);
        break;
      case AddrMode::Indexed:
        if (ins_.src->reg == 1)
          read_log_sp_indexed(ins_);
        else
          read_log_indexed(ins_);
        break;
      default:
        break;
    }
  }
};

}  // namespace

bool is_read_site(const Instruction& ins) {
  return is_two_operand(ins.op) && ins.src && is_mem_mode(ins.src->mode);
}

unsigned count_read_sites(const Program& p) {
  unsigned n = 0;
  for (const auto& ins : p.instructions)
    if (is_read_site(ins)) ++n;
  return n;
}

bool is_cf_site(const Instruction& ins) {
  return is_jump(ins.op) || ins.op == Opcode::Call || ins.op == Opcode::Ret;
}

unsigned count_cf_sites(const Program& p) {
  unsigned n = 0;
  for (const auto& ins : p.instructions)
    if (is_cf_site(ins)) ++n;
  return n;
}

bool is_guarded_store(const Instruction& ins) {
  if (ins.op == Opcode::Push || ins.op == Opcode::Call) return true;
  if (is_two_operand(ins.op))
    return ins.dst && is_mem_mode(ins.dst->mode);
  if (ins.op == Opcode::Dec || ins.op == Opcode::Inc)
    return ins.dst && is_mem_mode(ins.dst->mode);
  return false;
}

Instrumented instrument(const Program& p, InstrumentMode mode,
                        const MemoryLayout& layout) {
  validate(p, mode);
  const bool dfa = mode == InstrumentMode::Dfa;

  Rewriter w{p, mode, layout, {}, 0};
  w.raw(std::string("; DIALED-INSTRUMENTED mode=") + (dfa ? "dfa" : "cfa"));
  w.raw(".const OR_MIN = " + hex(layout.or_min));
  w.raw(".const OR_MAX = " + hex(layout.or_max));
  w.raw(".const OR_END = " + hex(layout.or_end()));
  if (dfa) w.raw(".const STACK_EDGE = " + hex(uint16_t(layout.stack_init + 1)));
  for (const auto& [name, value] : p.constants)
    w.raw(".const " + name + " = " + hex(value));
  for (const auto& o : p.object_map)
    w.raw(".object " + o.name + " " + hex(o.base) + " " +
          std::to_string(o.len));

  // Launch check: the launcher must hand over a fresh log pointer.
  w.begin("entry-check");
  w.ins("cmp #OR_MAX, r4");
  w.ins("jne .L11");
  w.end();

  // Launch metadata: the stack pointer (the stack interval's upper edge)
  // and the operation arguments.
  if (dfa) {
    w.begin("entry-log");
    w.log_push("r1");
    for (int r = 8; r <= 15; ++r) w.log_push(reg_name(r));
    w.end();
  }

  const int n = static_cast<int>(p.instructions.size());
  for (int i = 0; i < n; ++i) {
    for (const auto& l : p.labels_at(i)) w.raw(l + ":");
    const Instruction& ins = p.instructions[i];

    if (is_conditional_jump(ins.op)) {
      w.cf_branch(ins);
      continue;
    }
    if (is_guarded_store(ins)) w.guard_store(ins);
    if (ins.op == Opcode::Jmp)
      w.cf_simple("cf-jmp", "#" + ins.target->label);
    else if (ins.op == Opcode::Call)
      w.cf_simple("cf-call", render_operand(*ins.dst));
    else if (ins.op == Opcode::Ret)
      w.cf_simple("cf-ret", "2(r1)");

    if (dfa && is_read_site(ins) &&
        ins.src->mode == AddrMode::IndirectAutoInc) {
      Instruction plain = ins;
      plain.src->mode = AddrMode::Indirect;
      w.ins(render_instruction(plain));
      w.read_log_autoinc(ins);
      continue;
    }

    w.ins(render_instruction(ins));
    if (dfa && is_read_site(ins)) w.read_log(ins);
  }
  for (const auto& l : w.p.labels_at(n)) w.raw(l + ":");

  w.begin("abort");
  w.raw(".L11:");
  w.ins("halt");
  w.end();

  std::string text;
  for (const auto& l : w.out) {
    text += l;
    text += '\n';
  }
  return {text, parse_assembly(text)};
}

Instrumented instrument_text(const std::string& source, InstrumentMode mode,
                             const MemoryLayout& layout) {
  return instrument(parse_assembly(source), mode, layout);
}

}  // namespace dialed
