#include "dialed/asm_text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace dialed {
namespace {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}
bool is_identifier(const std::string& s) {
  if (s.empty() || !is_ident_start(s[0])) return false;
  return std::all_of(s.begin() + 1, s.end(), is_ident_char);
}

// Parses 0x hex, decimal, or negative decimal into a 16-bit word (two's
// complement wrap for negatives).
std::optional<uint16_t> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  bool neg = s[0] == '-';
  std::string body = neg ? s.substr(1) : s;
  int base = 10;
  if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
    base = 16;
    body = body.substr(2);
  }
  if (body.empty()) return std::nullopt;
  uint32_t v = 0;
  auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), v, base);
  if (ec != std::errc() || p != body.data() + body.size()) return std::nullopt;
  if (v > 0xFFFF) return std::nullopt;
  uint16_t w = static_cast<uint16_t>(v);
  return neg ? static_cast<uint16_t>(-w) : w;
}

std::optional<uint8_t> parse_register(const std::string& s) {
  std::string l = to_lower(s);
  if (l.size() < 2 || l[0] != 'r') return std::nullopt;
  uint32_t n = 0;
  auto [p, ec] = std::from_chars(l.data() + 1, l.data() + l.size(), n, 10);
  if (ec != std::errc() || p != l.data() + l.size() || n > 15) return std::nullopt;
  return static_cast<uint8_t>(n);
}

struct PendingSym {
  // Operand slots whose symbolic value still needs resolution after all
  // labels/constants are known. instr index + which slot.
  size_t instr;
  bool is_src;
  int line;
};

struct Parser {
  Program prog;
  std::vector<PendingSym> pending;
  TemplateKind region = TemplateKind::None;

  [[noreturn]] void fail(AsmErrorKind k, int line, const std::string& name,
                         const std::string& msg) {
    throw AsmError(k, line, name, "line " + std::to_string(line) + ": " + msg);
  }

  Operand parse_operand(const std::string& raw, int line) {
    std::string s = strip(raw);
    if (s.empty()) fail(AsmErrorKind::SyntaxError, line, "", "empty operand");
    Operand op;
    if (s[0] == '#' || s[0] == '&') {
      op.mode = s[0] == '#' ? AddrMode::Immediate : AddrMode::Absolute;
      std::string body = strip(s.substr(1));
      if (auto num = parse_number(body)) {
        op.value = *num;
      } else if (is_identifier(body)) {
        op.sym = body;  // resolved in finish()
      } else {
        fail(AsmErrorKind::SyntaxError, line, body, "bad value '" + body + "'");
      }
      return op;
    }
    if (s[0] == '@') {
      std::string body = strip(s.substr(1));
      bool autoinc = !body.empty() && body.back() == '+';
      if (autoinc) body = strip(body.substr(0, body.size() - 1));
      auto reg = parse_register(body);
      if (!reg) fail(AsmErrorKind::SyntaxError, line, body, "bad register '" + body + "'");
      op.mode = autoinc ? AddrMode::IndirectAutoInc : AddrMode::Indirect;
      op.reg = *reg;
      return op;
    }
    size_t paren = s.find('(');
    if (paren != std::string::npos) {
      if (s.back() != ')')
        fail(AsmErrorKind::SyntaxError, line, s, "unterminated index operand");
      std::string off = strip(s.substr(0, paren));
      std::string reg_s = strip(s.substr(paren + 1, s.size() - paren - 2));
      auto reg = parse_register(reg_s);
      if (!reg) fail(AsmErrorKind::SyntaxError, line, reg_s, "bad register '" + reg_s + "'");
      op.mode = AddrMode::Indexed;
      op.reg = *reg;
      if (auto num = parse_number(off)) {
        op.value = *num;
      } else if (is_identifier(off)) {
        op.sym = off;
      } else {
        fail(AsmErrorKind::SyntaxError, line, off, "bad index offset '" + off + "'");
      }
      return op;
    }
    if (auto reg = parse_register(s)) {
      op.mode = AddrMode::RegDirect;
      op.reg = *reg;
      return op;
    }
    fail(AsmErrorKind::SyntaxError, line, s, "unrecognized operand '" + s + "'");
  }

  // Splits an operand list on the top-level comma (no nesting in this
  // grammar, so a plain find is enough).
  std::vector<std::string> split_operands(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!strip(cur).empty() || !parts.empty()) parts.push_back(cur);
    return parts;
  }

  void handle_comment(const std::string& body, int line) {
    std::string t = strip(body);
    if (t.rfind("DIALED-INSTRUMENTED", 0) == 0) {
      prog.instrumented = true;
      auto pos = t.find("mode=");
      if (pos != std::string::npos) prog.instrumented_mode = strip(t.substr(pos + 5));
      return;
    }
    if (t.rfind("DIALED-BEGIN", 0) == 0) {
      std::string name = strip(t.substr(std::string("DIALED-BEGIN").size()));
      auto kind = template_kind_from_name(name);
      if (!kind)
        fail(AsmErrorKind::SyntaxError, line, name, "unknown template region '" + name + "'");
      region = *kind;
      return;
    }
    if (t.rfind("DIALED-END", 0) == 0) {
      region = TemplateKind::None;
      return;
    }
    // Ordinary comment: ignored.
  }

  void parse_directive(const std::string& text, int line) {
    std::istringstream ss(text);
    std::string word;
    ss >> word;
    std::string lower = to_lower(word);
    if (lower == ".const") {
      std::string name, eq, value;
      ss >> name >> eq >> value;
      if (name.empty() || eq != "=" || value.empty() || !is_identifier(name))
        fail(AsmErrorKind::SyntaxError, line, name, "bad .const directive");
      auto num = parse_number(value);
      if (!num) fail(AsmErrorKind::SyntaxError, line, value, "bad .const value");
      if (prog.constants.count(name))
        fail(AsmErrorKind::DuplicateLabel, line, name,
             "constant '" + name + "' redefined");
      for (const auto& o : prog.object_map)
        if (o.name == name)
          fail(AsmErrorKind::DuplicateLabel, line, name,
               "constant '" + name + "' collides with an object name");
      prog.constants[name] = *num;
      return;
    }
    if (lower == ".object") {
      std::string name, base_s, len_s;
      ss >> name >> base_s >> len_s;
      if (!is_identifier(name))
        fail(AsmErrorKind::SyntaxError, line, name, "bad .object name");
      auto base = parse_number(base_s);
      auto len = parse_number(len_s);
      if (!base || !len)
        fail(AsmErrorKind::SyntaxError, line, name, "bad .object base/len");
      for (const auto& o : prog.object_map) {
        uint32_t a0 = o.base, a1 = o.base + o.len;
        uint32_t b0 = *base, b1 = uint32_t(*base) + *len;
        if (a0 < b1 && b0 < a1)
          fail(AsmErrorKind::ObjectOverlap, line, name,
               "object '" + name + "' overlaps '" + o.name + "'");
        if (o.name == name)
          fail(AsmErrorKind::DuplicateLabel, line, name,
               "object '" + name + "' redefined");
      }
      if (prog.constants.count(name))
        fail(AsmErrorKind::DuplicateLabel, line, name,
             "object '" + name + "' collides with a constant name");
      prog.object_map.push_back({name, *base, *len});
      return;
    }
    fail(AsmErrorKind::SyntaxError, line, word, "unknown directive '" + word + "'");
  }

  void parse_instruction(const std::string& text, int line) {
    size_t sp = text.find_first_of(" \t");
    std::string mnem = to_lower(sp == std::string::npos ? text : text.substr(0, sp));
    std::string rest = sp == std::string::npos ? "" : strip(text.substr(sp));

    Width width = Width::Word;
    if (mnem.size() > 2 && mnem.substr(mnem.size() - 2) == ".b") {
      width = Width::Byte;
      mnem = mnem.substr(0, mnem.size() - 2);
    } else if (mnem.size() > 2 && mnem.substr(mnem.size() - 2) == ".w") {
      mnem = mnem.substr(0, mnem.size() - 2);
    }

    auto op = opcode_from_name(mnem);
    if (!op) fail(AsmErrorKind::UnknownOpcode, line, mnem, "unknown opcode '" + mnem + "'");

    Instruction ins;
    ins.op = *op;
    ins.width = width;
    ins.source_line = line;
    ins.ttag = region;

    if (width == Width::Byte) {
      // Byte width is meaningful only for data-moving/ALU ops.
      static const bool ok[] = {true};
      (void)ok;
      switch (*op) {
        case Opcode::Mov: case Opcode::Add: case Opcode::Sub: case Opcode::Cmp:
        case Opcode::And: case Opcode::Bis: case Opcode::Xor: case Opcode::Dec:
        case Opcode::Inc:
          break;
        default:
          fail(AsmErrorKind::SyntaxError, line, mnem, "'.b' not allowed on '" + mnem + "'");
      }
    }

    if (is_jump(*op)) {
      std::string t = strip(rest);
      if (t.empty()) fail(AsmErrorKind::SyntaxError, line, mnem, "jump needs a target");
      JumpTarget jt;
      if (auto num = parse_number(t)) {
        jt.addr = *num;
      } else if (is_identifier(t)) {
        jt.label = t;
      } else {
        fail(AsmErrorKind::SyntaxError, line, t, "bad jump target '" + t + "'");
      }
      ins.target = jt;
      prog.instructions.push_back(std::move(ins));
      return;
    }

    auto parts = split_operands(rest);
    if (is_two_operand(*op)) {
      if (parts.size() != 2)
        fail(AsmErrorKind::SyntaxError, line, mnem, "'" + mnem + "' needs two operands");
      ins.src = parse_operand(parts[0], line);
      ins.dst = parse_operand(parts[1], line);
      if (ins.dst->mode == AddrMode::Immediate)
        fail(AsmErrorKind::SyntaxError, line, mnem, "immediate destination");
      if (ins.dst->mode == AddrMode::IndirectAutoInc)
        fail(AsmErrorKind::SyntaxError, line, mnem, "auto-increment destination");
    } else if (is_one_operand(*op)) {
      if (parts.size() != 1)
        fail(AsmErrorKind::SyntaxError, line, mnem, "'" + mnem + "' needs one operand");
      ins.dst = parse_operand(parts[0], line);
      if (ins.dst->mode == AddrMode::Immediate &&
          !(ins.op == Opcode::Push || ins.op == Opcode::Call))
        fail(AsmErrorKind::SyntaxError, line, mnem, "immediate destination");
      if (ins.op == Opcode::Pop && ins.dst->mode != AddrMode::RegDirect)
        fail(AsmErrorKind::SyntaxError, line, mnem, "pop takes a register");
    } else {
      if (!parts.empty())
        fail(AsmErrorKind::SyntaxError, line, mnem, "'" + mnem + "' takes no operands");
    }
    size_t idx = prog.instructions.size();
    prog.instructions.push_back(std::move(ins));
    auto& stored = prog.instructions.back();
    if (stored.src && !stored.src->sym.empty())
      pending.push_back({idx, true, line});
    if (stored.dst && !stored.dst->sym.empty())
      pending.push_back({idx, false, line});
  }

  void finish() {
    // Resolve symbolic operand values: constants first, then object base
    // addresses, then (for immediates) labels, whose numeric value is
    // assigned at encode time.
    for (const auto& p : pending) {
      auto& ins = prog.instructions[p.instr];
      Operand& op = p.is_src ? *ins.src : *ins.dst;
      auto c = prog.constants.find(op.sym);
      if (c != prog.constants.end()) {
        op.value = c->second;
        continue;
      }
      auto obj = std::find_if(prog.object_map.begin(), prog.object_map.end(),
                              [&](const ObjectEntry& o) { return o.name == op.sym; });
      if (obj != prog.object_map.end()) {
        op.value = obj->base;
        continue;
      }
      if (op.mode == AddrMode::Immediate && prog.labels.count(op.sym)) {
        continue;  // label-valued immediate; encode() fills the address in
      }
      fail(AsmErrorKind::UnresolvedLabel, p.line, op.sym,
           "unresolved symbol '" + op.sym + "'");
    }
    // Validate labeled jump/call targets (numeric targets are checked against
    // the laid-out image at encode time).
    for (const auto& ins : prog.instructions) {
      if (ins.target && !ins.target->label.empty() &&
          !prog.labels.count(ins.target->label))
        fail(AsmErrorKind::UnresolvedLabel, ins.source_line, ins.target->label,
             "unresolved jump target '" + ins.target->label + "'");
      if ((ins.op == Opcode::Call) && ins.dst &&
          ins.dst->mode == AddrMode::Immediate && !ins.dst->sym.empty() &&
          !prog.labels.count(ins.dst->sym) && !prog.constants.count(ins.dst->sym))
        fail(AsmErrorKind::UnresolvedLabel, ins.source_line, ins.dst->sym,
             "unresolved call target '" + ins.dst->sym + "'");
    }
  }
};

} // namespace

Program parse_assembly(const std::string& text) {
  Parser p;
  std::istringstream ss(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    std::string line = raw;
    // Peel the comment off; structural DIALED comments are handled, the rest
    // dropped. A comment may follow code on the same line.
    size_t semi = line.find(';');
    if (semi != std::string::npos) {
      p.handle_comment(line.substr(semi + 1), line_no);
      line = line.substr(0, semi);
    }
    line = strip(line);
    if (line.empty()) continue;
    if (line[0] == '.') {
      // Directive or a dot-label ("`.L11:`").
      if (line.back() == ':' && line.find_first_of(" \t") == std::string::npos) {
        std::string name = line.substr(0, line.size() - 1);
        if (!is_identifier(name))
          p.fail(AsmErrorKind::SyntaxError, line_no, name, "bad label");
        if (p.prog.labels.count(name))
          p.fail(AsmErrorKind::DuplicateLabel, line_no, name,
                 "duplicate label '" + name + "'");
        p.prog.labels[name] = static_cast<int>(p.prog.instructions.size());
        continue;
      }
      p.parse_directive(line, line_no);
      continue;
    }
    if (line.back() == ':' && line.find_first_of(" \t") == std::string::npos) {
      std::string name = line.substr(0, line.size() - 1);
      if (!is_identifier(name))
        p.fail(AsmErrorKind::SyntaxError, line_no, name, "bad label");
      if (p.prog.labels.count(name))
        p.fail(AsmErrorKind::DuplicateLabel, line_no, name,
               "duplicate label '" + name + "'");
      p.prog.labels[name] = static_cast<int>(p.prog.instructions.size());
      continue;
    }
    p.parse_instruction(line, line_no);
  }
  p.finish();
  return p.prog;
}

std::string render_operand(const Operand& op) {
  char buf[32];
  auto hex = [&](uint16_t v) {
    std::snprintf(buf, sizeof buf, "0x%x", v);
    return std::string(buf);
  };
  switch (op.mode) {
    case AddrMode::RegDirect: return reg_name(op.reg);
    case AddrMode::Indirect: return std::string("@") + reg_name(op.reg);
    case AddrMode::IndirectAutoInc: return std::string("@") + reg_name(op.reg) + "+";
    case AddrMode::Indexed:
      return (op.sym.empty() ? hex(op.value) : op.sym) + "(" + reg_name(op.reg) + ")";
    case AddrMode::Immediate:
      return "#" + (op.sym.empty() ? hex(op.value) : op.sym);
    case AddrMode::Absolute:
      return "&" + (op.sym.empty() ? hex(op.value) : op.sym);
  }
  return "?";
}

std::string render_instruction(const Instruction& ins) {
  std::string out = opcode_name(ins.op);
  if (ins.width == Width::Byte) out += ".b";
  if (ins.target) {
    out += " ";
    if (!ins.target->label.empty()) {
      out += ins.target->label;
    } else {
      char buf[16];
      std::snprintf(buf, sizeof buf, "0x%x", ins.target->addr);
      out += buf;
    }
    return out;
  }
  if (ins.src) {
    out += " " + render_operand(*ins.src) + ", " + render_operand(*ins.dst);
  } else if (ins.dst) {
    out += " " + render_operand(*ins.dst);
  }
  return out;
}

std::string render_program(const Program& p) {
  std::ostringstream out;
  for (const auto& [name, value] : p.constants) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%x", value);
    out << ".const " << name << " = " << buf << "\n";
  }
  for (const auto& o : p.object_map) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%x %u", o.base, o.len);
    out << ".object " << o.name << " " << buf << "\n";
  }
  for (size_t i = 0; i <= p.instructions.size(); ++i) {
    for (const auto& l : p.labels_at(static_cast<int>(i))) out << l << ":\n";
    if (i < p.instructions.size())
      out << "    " << render_instruction(p.instructions[i]) << "\n";
  }
  return out.str();
}

} // namespace dialed
