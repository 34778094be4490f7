#include "dialed/emulator.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dialed/asm_text.hpp"

namespace dialed {
namespace {

uint16_t width_mask(Width w) { return w == Width::Byte ? 0x00FF : 0xFFFF; }
uint16_t sign_bit(Width w) { return w == Width::Byte ? 0x0080 : 0x8000; }

// One in-flight instruction: operand evaluation and effect application.
struct Exec {
  Machine& m;
  const Program& p;
  const EncodedImage& img;
  MemIf& port;
  const Instruction& ins;
  StepResult& out;
  uint16_t next_addr;  // fallthrough address; what a read of r0 yields

  uint16_t mem_read(uint16_t addr, Width w, AccessRole role) {
    if (w == Width::Word && (addr & 1))
      throw MachineFault("word read at odd address");
    uint16_t v = port.read(addr, w, role);
    if (w == Width::Byte) v &= 0xFF;
    out.accesses.push_back({addr, w, v, role, false});
    return v;
  }

  void mem_write(uint16_t addr, Width w, uint16_t v, AccessRole role) {
    if (w == Width::Word && (addr & 1))
      throw MachineFault("word write at odd address");
    if (w == Width::Byte) v &= 0xFF;
    port.write(addr, w, v, role);
    out.accesses.push_back({addr, w, v, role, true});
  }

  uint16_t reg_read(unsigned r) {
    if (r == 0) return next_addr;
    if (r == 2) return m.sr_pack();
    return m.regs[r];
  }

  void reg_write(unsigned r, uint16_t v, Width w) {
    if (w == Width::Byte) v &= 0xFF;  // byte results zero the high byte
    if (r == 0) {
      out.next_pc = v;  // a PC store is a dynamic jump
    } else if (r == 2) {
      m.sr_unpack(v);
    } else {
      m.regs[r] = v;
    }
  }

  uint16_t effective_addr(const Operand& op) {
    switch (op.mode) {
      case AddrMode::Indirect:
      case AddrMode::IndirectAutoInc:
        return reg_read(op.reg);
      case AddrMode::Indexed:
        return static_cast<uint16_t>(reg_read(op.reg) + op.value);
      case AddrMode::Absolute:
        return op.value;
      default:
        throw MachineFault("operand has no address");
    }
  }

  uint16_t read_operand(const Operand& op, Width w, AccessRole role) {
    switch (op.mode) {
      case AddrMode::RegDirect:
        return static_cast<uint16_t>(reg_read(op.reg) & width_mask(w));
      case AddrMode::Immediate:
        return static_cast<uint16_t>(
            resolved_operand_value(p, img, ins, op) & width_mask(w));
      case AddrMode::IndirectAutoInc: {
        if (op.reg == 0 || op.reg == 2)
          throw MachineFault("auto-increment on r0/r2");
        uint16_t addr = m.regs[op.reg];
        uint16_t v = mem_read(addr, w, role);
        m.regs[op.reg] =
            static_cast<uint16_t>(addr + (w == Width::Byte ? 1 : 2));
        return v;
      }
      default:
        return mem_read(effective_addr(op), w, role);
    }
  }

  void set_zn(uint16_t res, Width w) {
    m.z = (res & width_mask(w)) == 0;
    m.n = (res & sign_bit(w)) != 0;
  }

  // dst + src with full flag set.
  uint16_t alu_add(uint16_t dst, uint16_t src, Width w) {
    uint32_t mask = width_mask(w);
    uint32_t sum = (dst & mask) + (src & mask);
    uint16_t res = static_cast<uint16_t>(sum & mask);
    m.c = sum > mask;
    m.v = (~(dst ^ src) & (dst ^ res) & sign_bit(w)) != 0;
    set_zn(res, w);
    return res;
  }

  // dst - src; carry = "no borrow" (set when dst >= src unsigned).
  uint16_t alu_sub(uint16_t dst, uint16_t src, Width w) {
    uint32_t mask = width_mask(w);
    uint16_t res = static_cast<uint16_t>((dst - src) & mask);
    m.c = (dst & mask) >= (src & mask);
    m.v = ((dst ^ src) & (dst ^ res) & sign_bit(w)) != 0;
    set_zn(res, w);
    return res;
  }

  void push_word(uint16_t v) {
    m.regs[1] = static_cast<uint16_t>(m.regs[1] - 2);
    mem_write(m.regs[1], Width::Word, v, AccessRole::Stack);
  }

  uint16_t pop_word() {
    uint16_t v = mem_read(m.regs[1], Width::Word, AccessRole::Stack);
    m.regs[1] = static_cast<uint16_t>(m.regs[1] + 2);
    return v;
  }

  void two_operand() {
    Width w = ins.width;
    uint16_t s = read_operand(*ins.src, w, AccessRole::SrcRead);

    if (ins.op == Opcode::Mov) {
      store_dst(*ins.dst, s, w, /*had_rmw_read=*/false, 0);
      return;
    }

    // Read-modify(-write) destination: resolve a memory address once so the
    // read and the write agree.
    uint16_t d, dst_addr = 0;
    bool dst_mem = ins.dst->mode != AddrMode::RegDirect;
    if (dst_mem) {
      dst_addr = effective_addr(*ins.dst);
      d = mem_read(dst_addr, w, AccessRole::DstRead);
    } else {
      d = static_cast<uint16_t>(reg_read(ins.dst->reg) & width_mask(w));
    }

    uint16_t res = 0;
    bool store = true;
    switch (ins.op) {
      case Opcode::Add: res = alu_add(d, s, w); break;
      case Opcode::Sub: res = alu_sub(d, s, w); break;
      case Opcode::Cmp: res = alu_sub(d, s, w); store = false; break;
      case Opcode::And:
        res = static_cast<uint16_t>(d & s & width_mask(w));
        set_zn(res, w);
        m.c = !m.z;
        m.v = false;
        break;
      case Opcode::Bis:
        res = static_cast<uint16_t>((d | s) & width_mask(w));
        break;  // BIS sets no flags
      case Opcode::Xor:
        res = static_cast<uint16_t>((d ^ s) & width_mask(w));
        set_zn(res, w);
        m.c = !m.z;
        m.v = (d & s & sign_bit(w)) != 0;  // both operands negative
        break;
      default: throw MachineFault("bad two-operand opcode");
    }
    if (store) store_dst(*ins.dst, res, w, dst_mem, dst_addr);
  }

  // Stores a result; when the destination was memory its address was already
  // resolved (have_addr) so RMW reads/writes hit the same cell.
  void store_dst(const Operand& dst, uint16_t v, Width w, bool have_addr,
                 uint16_t addr) {
    if (dst.mode == AddrMode::RegDirect) {
      reg_write(dst.reg, v, w);
    } else {
      if (!have_addr) addr = effective_addr(dst);
      mem_write(addr, w, v, AccessRole::DstWrite);
    }
  }

  void one_operand() {
    Width w = ins.width;
    const Operand& t = *ins.dst;
    switch (ins.op) {
      case Opcode::Dec:
      case Opcode::Inc: {
        uint16_t d, addr = 0;
        bool is_mem = t.mode != AddrMode::RegDirect;
        if (is_mem) {
          addr = effective_addr(t);
          d = mem_read(addr, w, AccessRole::DstRead);
        } else {
          d = static_cast<uint16_t>(reg_read(t.reg) & width_mask(w));
        }
        uint16_t res = ins.op == Opcode::Dec ? alu_sub(d, 1, w) : alu_add(d, 1, w);
        store_dst(t, res, w, is_mem, addr);
        break;
      }
      case Opcode::Push:
        push_word(read_operand(t, Width::Word, AccessRole::SrcRead));
        break;
      case Opcode::Pop:
        reg_write(t.reg, pop_word(), Width::Word);
        break;
      case Opcode::Call: {
        uint16_t target = read_operand(t, Width::Word, AccessRole::SrcRead);
        push_word(next_addr);
        out.next_pc = target;
        break;
      }
      default: throw MachineFault("bad one-operand opcode");
    }
  }

  bool jump_taken() const {
    switch (ins.op) {
      case Opcode::Jmp: return true;
      case Opcode::Jeq: return m.z;
      case Opcode::Jne: return !m.z;
      case Opcode::Jn:  return m.n;
      case Opcode::Jlo: return !m.c;
      case Opcode::Jhs: return m.c;
      case Opcode::Jl:  return m.n != m.v;
      case Opcode::Jge: return m.n == m.v;
      default: return false;
    }
  }

  void run() {
    if (is_jump(ins.op)) {
      if (jump_taken()) out.next_pc = resolved_jump_target(p, img, ins);
      return;
    }
    switch (ins.op) {
      case Opcode::Ret: out.next_pc = pop_word(); break;
      case Opcode::Nop: break;
      case Opcode::Halt: m.halted = true; break;
      default:
        if (is_two_operand(ins.op)) two_operand();
        else one_operand();
    }
  }
};

} // namespace

const char* access_role_name(AccessRole r) {
  switch (r) {
    case AccessRole::SrcRead: return "src-read";
    case AccessRole::DstRead: return "dst-read";
    case AccessRole::DstWrite: return "dst-write";
    case AccessRole::Stack: return "stack";
  }
  return "?";
}

StepResult execute_one(Machine& m, const Program& p, const EncodedImage& img,
                       MemIf& mem) {
  if (m.halted) throw MachineFault("stepping a halted machine");
  if (m.pc_index < 0 ||
      m.pc_index >= static_cast<int>(p.instructions.size()))
    throw MachineFault("program counter outside the program");

  const Instruction& ins = p.instructions[m.pc_index];
  StepResult out;
  out.index = m.pc_index;
  out.pc_addr = img.index_to_addr[m.pc_index];
  uint16_t next_addr = static_cast<uint16_t>(
      out.pc_addr + 2 * img.index_words[m.pc_index]);
  out.next_pc = next_addr;

  Exec ex{m, p, img, mem, ins, out, next_addr};
  ex.run();

  out.halted = m.halted;
  out.cycles = img.index_words[m.pc_index] +
               static_cast<unsigned>(out.accesses.size());
  return out;
}

// ---------------------------------------------------------------------------

PeripheralTrace parse_trace(const std::string& text, const MemoryLayout& l) {
  PeripheralTrace t;
  std::istringstream ss(text);
  std::string raw;
  int line_no = 0;
  auto number = [&](const std::string& s) -> uint16_t {
    std::string body = s;
    int base = 10;
    if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
      base = 16;
      body = body.substr(2);
    }
    uint32_t v = 0;
    auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), v, base);
    if (ec != std::errc() || p != body.data() + body.size() || v > 0xFFFF)
      throw LayoutError("trace line " + std::to_string(line_no) +
                        ": bad number '" + s + "'");
    return static_cast<uint16_t>(v);
  };
  while (std::getline(ss, raw)) {
    ++line_no;
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::istringstream ls(raw);
    std::string where, value;
    if (!(ls >> where)) continue;
    if (!(ls >> value))
      throw LayoutError("trace line " + std::to_string(line_no) +
                        ": expected '<port|addr> <value>'");
    TraceEntry e;
    auto port = l.ports.find(where);
    if (port != l.ports.end()) {
      e.port = where;
      e.addr = port->second;
    } else {
      e.addr = number(where);
      for (const auto& [name, addr] : l.ports)
        if (addr == e.addr) e.port = name;
    }
    e.value = number(value);
    t.push_back(e);
  }
  return t;
}

PeripheralTrace load_trace(const std::string& path, const MemoryLayout& l) {
  std::ifstream in(path);
  if (!in) throw LayoutError("cannot open trace file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str(), l);
}

std::string render_trace(const PeripheralTrace& t) {
  std::ostringstream out;
  char buf[32];
  for (const auto& e : t) {
    if (!e.port.empty()) {
      std::snprintf(buf, sizeof buf, "%s 0x%04x", e.port.c_str(), e.value);
    } else {
      std::snprintf(buf, sizeof buf, "0x%04x 0x%04x", e.addr, e.value);
    }
    out << buf << "\n";
  }
  return out.str();
}

const char* halt_reason_name(HaltReason r) {
  switch (r) {
    case HaltReason::Running: return "running";
    case HaltReason::Completed: return "completed";
    case HaltReason::Aborted: return "aborted";
    case HaltReason::LeftEr: return "left-er";
    case HaltReason::StepLimit: return "step-limit";
    case HaltReason::Fault: return "fault";
  }
  return "?";
}

const char* exec_clear_cause_name(ExecClearCause c) {
  switch (c) {
    case ExecClearCause::None: return "none";
    case ExecClearCause::ErWrite: return "er-write";
    case ExecClearCause::OrWriteOutsideEr: return "or-write-outside-er";
    case ExecClearCause::ExternalTamper: return "external-tamper";
    case ExecClearCause::Abort: return "abort";
    case ExecClearCause::LeftEr: return "left-er";
    case ExecClearCause::StepLimit: return "step-limit";
    case ExecClearCause::Fault: return "fault";
  }
  return "?";
}

// ---------------------------------------------------------------------------

DeviceRun::DeviceRun(Program program, MemoryLayout layout, PeripheralTrace trace)
    : prog_(std::move(program)),
      layout_(std::move(layout)),
      img_(encode(prog_, layout_.er_min)),
      trace_(std::move(trace)) {
  layout_.validate();
  unsigned er_capacity = layout_.er_max - layout_.er_min + 1;
  if (img_.bytes.size() > er_capacity)
    throw AsmError(AsmErrorKind::ImageOverflow, 0, "",
                   "program image does not fit the executable region");
  std::copy(img_.bytes.begin(), img_.bytes.end(), mem_.begin() + layout_.er_min);
  er_entry_image_.assign(mem_.begin() + layout_.er_min,
                         mem_.begin() + layout_.er_max + 1);

  m_.regs[1] = layout_.stack_init;
  m_.regs[4] = layout_.or_max;  // log pointer starts at the metadata slot
  m_.pc_index = 0;
  auto it = prog_.labels.find(".L11");
  if (it != prog_.labels.end() &&
      it->second < static_cast<int>(prog_.instructions.size()))
    abort_index_ = it->second;
  if (prog_.instructions.empty()) finish(HaltReason::Completed, cause_);
}

void DeviceRun::clear_exec(ExecClearCause c) {
  if (exec_) {
    exec_ = false;
    cause_ = c;
  }
}

void DeviceRun::finish(HaltReason r, ExecClearCause c) {
  reason_ = r;
  if (c != ExecClearCause::None) clear_exec(c);
}

uint16_t DeviceRun::read(uint16_t addr, Width w, AccessRole role) {
  // A program-authored read from the peripheral window samples the next
  // trace value: the sample is latched into memory, so instrumentation
  // re-reads of the same cell observe it instead of consuming the trace.
  if (role == AccessRole::SrcRead && layout_.in_periph(addr) &&
      cur_ttag_ == TemplateKind::None && trace_pos_ < trace_.size()) {
    uint16_t v = trace_[trace_pos_++].value;
    uint16_t base = addr & 0xFFFE;
    mem_[base] = static_cast<uint8_t>(v & 0xFF);
    mem_[static_cast<uint16_t>(base + 1)] = static_cast<uint8_t>(v >> 8);
  }
  uint16_t lo = mem_[addr];
  if (w == Width::Byte) return lo;
  return static_cast<uint16_t>(lo | (mem_[static_cast<uint16_t>(addr + 1)] << 8));
}

void DeviceRun::write(uint16_t addr, Width w, uint16_t value, AccessRole role) {
  (void)role;
  uint16_t last = static_cast<uint16_t>(addr + (w == Width::Word ? 1 : 0));
  // The monitor: a store into the code region clears exec; so does a store
  // into the output region issued while control sits outside it (the second
  // cannot occur under this harness, which only executes code inside ER).
  if (addr <= layout_.er_max && last >= layout_.er_min)
    clear_exec(ExecClearCause::ErWrite);
  uint16_t cur_pc = img_.index_to_addr[m_.pc_index];
  if (!layout_.in_er(cur_pc) &&
      addr <= static_cast<uint16_t>(layout_.or_max + 1) && last >= layout_.or_min)
    clear_exec(ExecClearCause::OrWriteOutsideEr);

  mem_[addr] = static_cast<uint8_t>(value & 0xFF);
  if (w == Width::Word)
    mem_[static_cast<uint16_t>(addr + 1)] = static_cast<uint8_t>(value >> 8);

  if (layout_.in_periph(addr)) gpio_log_.push_back({addr, value, w});
}

bool DeviceRun::external_write(uint16_t addr, Width w, uint16_t value) {
  if (!started_ && reason_ == HaltReason::Running) {
    mem_[addr] = static_cast<uint8_t>(value & 0xFF);
    if (w == Width::Word)
      mem_[static_cast<uint16_t>(addr + 1)] = static_cast<uint8_t>(value >> 8);
    return true;
  }
  // Vetoed while the operation runs (and until the result is collected);
  // an attempt on ER or OR also strips authentication.
  uint16_t last = static_cast<uint16_t>(addr + (w == Width::Word ? 1 : 0));
  bool on_er = addr <= layout_.er_max && last >= layout_.er_min;
  bool on_or =
      addr <= static_cast<uint16_t>(layout_.or_max + 1) && last >= layout_.or_min;
  if (on_er || on_or) clear_exec(ExecClearCause::ExternalTamper);
  return false;
}

void DeviceRun::step() {
  if (finished()) return;
  started_ = true;
  cur_ttag_ = prog_.instructions[m_.pc_index].ttag;
  StepResult sr;
  try {
    sr = execute_one(m_, prog_, img_, *this);
  } catch (const MachineFault&) {
    finish(HaltReason::Fault, ExecClearCause::Fault);
    return;
  }
  ++steps_;
  cycles_ += sr.cycles;
  last_accesses_ = sr.accesses;

  if (sr.halted) {
    if (sr.index == abort_index_)
      finish(HaltReason::Aborted, ExecClearCause::Abort);
    else
      finish(HaltReason::Completed, ExecClearCause::None);
    return;
  }
  auto it = img_.addr_to_index.find(sr.next_pc);
  if (it == img_.addr_to_index.end()) {
    if (layout_.in_er(sr.next_pc))
      finish(HaltReason::Fault, ExecClearCause::Fault);  // mid-instruction jump
    else
      finish(HaltReason::LeftEr, ExecClearCause::LeftEr);
    return;
  }
  m_.pc_index = it->second;
}

RunResult DeviceRun::run(uint64_t max_steps) {
  while (!finished()) {
    if (steps_ >= max_steps) {
      finish(HaltReason::StepLimit, ExecClearCause::StepLimit);
      break;
    }
    step();
  }
  return result();
}

RunResult DeviceRun::result() const {
  RunResult r;
  r.reason = reason_;
  r.exec = exec_;
  r.cause = cause_;
  r.steps = steps_;
  r.cycles = cycles_;
  r.r4_final = m_.regs[4];
  r.gpio_log = gpio_log_;
  r.er_entry_image = er_entry_image_;
  r.or_snapshot.assign(mem_.begin() + layout_.or_min,
                       mem_.begin() + layout_.or_min + layout_.or_len());
  r.machine = m_;
  return r;
}

void DeviceRun::set_entry_args(const std::array<uint16_t, 8>& args) {
  if (started_) return;
  for (int i = 0; i < 8; ++i) m_.regs[8 + i] = args[i];
}

RunResult run_operation(const Program& program, const MemoryLayout& layout,
                        const PeripheralTrace& trace, uint64_t max_steps) {
  DeviceRun dev(program, layout, trace);
  return dev.run(max_steps);
}

RunResult run_operation(const Program& program, const MemoryLayout& layout,
                        const PeripheralTrace& trace,
                        const std::array<uint16_t, 8>& args,
                        uint64_t max_steps) {
  DeviceRun dev(program, layout, trace);
  dev.set_entry_args(args);
  return dev.run(max_steps);
}

} // namespace dialed
