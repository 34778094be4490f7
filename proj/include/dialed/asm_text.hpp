// Assembly text <-> Program: parser and canonical renderer.
//
// Grammar (one item per line):
//   label:                 one or more per instruction allowed
//   opcode[.b] operands    case-insensitive opcodes, "src, dst" order
//   ; comment              `; DIALED-*` comments are structural (see below)
//   .const NAME = 0xNNNN
//   .object NAME base len  declared data object (base/len numeric, len bytes)
//
// Operands: rN | @rN | @rN+ | off(rN) | #imm | &addr, where imm/addr/off may
// be a number or a .const name, and immediates may also name a label (resolved
// to its address at encode time).
//
// Structural comments written by the instrumenter and honored by the parser:
//   ; DIALED-INSTRUMENTED mode=cfa|dfa    re-instrumentation marker
//   ; DIALED-BEGIN <region-name>          template region start
//   ; DIALED-END                          template region end
// Instructions inside a region carry the region's TemplateKind tag.
#pragma once

#include <stdexcept>
#include <string>

#include "dialed/isa.hpp"

namespace dialed {

enum class AsmErrorKind {
  SyntaxError,
  UnknownOpcode,
  UnresolvedLabel,
  DuplicateLabel,
  ObjectOverlap,
  ImageOverflow,  // raised by encode
};

struct AsmError : std::runtime_error {
  AsmErrorKind kind;
  int line;          // 1-based; 0 when not line-specific
  std::string name;  // offending symbol where applicable
  AsmError(AsmErrorKind k, int line_, std::string name_, const std::string& msg)
      : std::runtime_error(msg), kind(k), line(line_), name(std::move(name_)) {}
};

Program parse_assembly(const std::string& text);

// Canonical text form. Emits .const (sorted by name), .object (declaration
// order), then labeled instructions. Does not re-emit instrumentation
// markers; rendering is meant for plain programs and diagnostics.
std::string render_program(const Program& p);
std::string render_instruction(const Instruction& ins);
std::string render_operand(const Operand& op);

} // namespace dialed
