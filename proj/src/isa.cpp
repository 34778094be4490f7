#include "dialed/isa.hpp"

namespace dialed {

RegRole reg_role(unsigned reg) {
  switch (reg) {
    case 0: return RegRole::Pc;
    case 1: return RegRole::Sp;
    case 2: return RegRole::Sr;
    case 3: return RegRole::Cg;
    default: return RegRole::Gp;
  }
}

const char* reg_name(unsigned reg) {
  static const char* names[16] = {"r0", "r1", "r2",  "r3",  "r4",  "r5",
                                  "r6", "r7", "r8",  "r9",  "r10", "r11",
                                  "r12", "r13", "r14", "r15"};
  return names[reg & 15];
}

const char* template_kind_name(TemplateKind k) {
  switch (k) {
    case TemplateKind::None: return "none";
    case TemplateKind::EntryCheck: return "entry-check";
    case TemplateKind::EntryLog: return "entry-log";
    case TemplateKind::CfJmp: return "cf-jmp";
    case TemplateKind::CfBranch: return "cf-branch";
    case TemplateKind::CfCall: return "cf-call";
    case TemplateKind::CfRet: return "cf-ret";
    case TemplateKind::WriteGuard: return "write-guard";
    case TemplateKind::ReadLog: return "read-log";
    case TemplateKind::ReadLogIdx: return "read-log-idx";
    case TemplateKind::ReadLogSpIdx: return "read-log-spidx";
    case TemplateKind::Abort: return "abort";
  }
  return "none";
}

std::optional<TemplateKind> template_kind_from_name(const std::string& s) {
  for (int k = 0; k <= static_cast<int>(TemplateKind::Abort); ++k) {
    auto kind = static_cast<TemplateKind>(k);
    if (s == template_kind_name(kind)) return kind;
  }
  return std::nullopt;
}

bool same_instruction(const Instruction& a, const Instruction& b) {
  return a.op == b.op && a.width == b.width && a.src == b.src &&
         a.dst == b.dst && a.target == b.target;
}

std::vector<std::string> Program::labels_at(int index) const {
  std::vector<std::string> out;
  for (const auto& [name, idx] : labels)
    if (idx == index) out.push_back(name);
  return out;
}

bool same_program(const Program& a, const Program& b) {
  if (a.instructions.size() != b.instructions.size()) return false;
  for (size_t i = 0; i < a.instructions.size(); ++i)
    if (!same_instruction(a.instructions[i], b.instructions[i])) return false;
  return a.labels == b.labels && a.constants == b.constants &&
         a.object_map == b.object_map;
}

bool is_jump(Opcode op) {
  switch (op) {
    case Opcode::Jmp: case Opcode::Jeq: case Opcode::Jne: case Opcode::Jn:
    case Opcode::Jlo: case Opcode::Jhs: case Opcode::Jl: case Opcode::Jge:
      return true;
    default:
      return false;
  }
}

bool is_conditional_jump(Opcode op) { return is_jump(op) && op != Opcode::Jmp; }

bool is_two_operand(Opcode op) {
  switch (op) {
    case Opcode::Mov: case Opcode::Add: case Opcode::Sub: case Opcode::Cmp:
    case Opcode::And: case Opcode::Bis: case Opcode::Xor:
      return true;
    default:
      return false;
  }
}

bool is_one_operand(Opcode op) {
  switch (op) {
    case Opcode::Dec: case Opcode::Inc: case Opcode::Push: case Opcode::Pop:
    case Opcode::Call:
      return true;
    default:
      return false;
  }
}

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::Mov: return "mov";
    case Opcode::Add: return "add";
    case Opcode::Sub: return "sub";
    case Opcode::Cmp: return "cmp";
    case Opcode::And: return "and";
    case Opcode::Bis: return "bis";
    case Opcode::Xor: return "xor";
    case Opcode::Dec: return "dec";
    case Opcode::Inc: return "inc";
    case Opcode::Push: return "push";
    case Opcode::Pop: return "pop";
    case Opcode::Call: return "call";
    case Opcode::Ret: return "ret";
    case Opcode::Nop: return "nop";
    case Opcode::Halt: return "halt";
    case Opcode::Jmp: return "jmp";
    case Opcode::Jeq: return "jeq";
    case Opcode::Jne: return "jne";
    case Opcode::Jn: return "jn";
    case Opcode::Jlo: return "jlo";
    case Opcode::Jhs: return "jhs";
    case Opcode::Jl: return "jl";
    case Opcode::Jge: return "jge";
  }
  return "nop";
}

std::optional<Opcode> opcode_from_name(const std::string& lower) {
  static const std::map<std::string, Opcode> table = {
      {"mov", Opcode::Mov},   {"add", Opcode::Add},  {"sub", Opcode::Sub},
      {"cmp", Opcode::Cmp},   {"and", Opcode::And},  {"bis", Opcode::Bis},
      {"xor", Opcode::Xor},   {"dec", Opcode::Dec},  {"inc", Opcode::Inc},
      {"push", Opcode::Push}, {"pop", Opcode::Pop},  {"call", Opcode::Call},
      {"ret", Opcode::Ret},   {"nop", Opcode::Nop},  {"halt", Opcode::Halt},
      {"jmp", Opcode::Jmp},   {"jeq", Opcode::Jeq},  {"jne", Opcode::Jne},
      {"jn", Opcode::Jn},     {"jlo", Opcode::Jlo},  {"jhs", Opcode::Jhs},
      {"jl", Opcode::Jl},     {"jge", Opcode::Jge},
  };
  auto it = table.find(lower);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

static bool memory_mode(AddrMode m) {
  return m == AddrMode::Indirect || m == AddrMode::IndirectAutoInc ||
         m == AddrMode::Indexed || m == AddrMode::Absolute;
}

bool has_memory_source(const Instruction& ins) {
  return ins.src && memory_mode(ins.src->mode);
}

bool has_memory_dest(const Instruction& ins) {
  return ins.dst && memory_mode(ins.dst->mode);
}

} // namespace dialed
