// Core ISA model: a 23-opcode MSP430-flavored 16-bit instruction set.
//
// This is a behavioral model, not a cycle- or encoding-accurate MSP430. The
// byte encoding produced by encode() is a deterministic stand-in with the
// documented size model (1 word per instruction + 1 extension word per
// Immediate/Indexed/Absolute operand; jumps are always 1 word).
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dialed {

enum class Opcode : uint8_t {
  Mov, Add, Sub, Cmp, And, Bis, Xor,   // two-operand
  Dec, Inc, Push, Pop, Call,           // one-operand
  Ret, Nop, Halt,                      // zero-operand
  Jmp, Jeq, Jne, Jn, Jlo, Jhs, Jl, Jge // jumps (label/address target)
};

enum class Width : uint8_t { Word, Byte };

enum class AddrMode : uint8_t {
  RegDirect,        // rN
  Indirect,         // @rN
  IndirectAutoInc,  // @rN+
  Indexed,          // off(rN)
  Immediate,        // #value / #SYM
  Absolute,         // &value / &SYM
};

// Register roles, for documentation and tooling. r0=PC, r1=SP, r2=SR (the
// status register packs C,Z,N,V on access), r3 is modeled as a plain GP
// register, r4..r15 general purpose. r4 is the reserved log-stack pointer in
// instrumented programs.
enum class RegRole : uint8_t { Pc, Sp, Sr, Cg, Gp };
RegRole reg_role(unsigned reg);
const char* reg_name(unsigned reg); // "r0".."r15"

struct Operand {
  AddrMode mode = AddrMode::RegDirect;
  uint8_t reg = 0;       // RegDirect/Indirect/IndirectAutoInc/Indexed
  uint16_t value = 0;    // Immediate/Absolute value, Indexed offset
  std::string sym;       // symbolic origin of `value` if written with a name
                         // (a .const name, or a label for immediates)
  bool operator==(const Operand& o) const {
    return mode == o.mode && reg == o.reg && value == o.value && sym == o.sym;
  }
};

// Jump destination: a label or a bare address.
struct JumpTarget {
  std::string label;   // empty if numeric
  uint16_t addr = 0;   // used when label is empty
  bool operator==(const JumpTarget& o) const {
    return label == o.label && addr == o.addr;
  }
};

// Which instrumentation template region a parsed instruction belongs to
// (derived from the instrumenter's region marker comments; None for
// program-authored lines).
enum class TemplateKind : uint8_t {
  None,
  EntryCheck,  // log-pointer check at operation entry
  EntryLog,    // stack-base + argument-register logging prologue
  CfJmp,
  CfBranch,
  CfCall,
  CfRet,
  WriteGuard,
  ReadLog,        // plain indirect/absolute read classifier+push
  ReadLogIdx,     // indexed read, scratch = the index register
  ReadLogSpIdx,   // SP-indexed read, borrowed scratch register
  Abort,          // the trailing abort label block
};
const char* template_kind_name(TemplateKind k);
std::optional<TemplateKind> template_kind_from_name(const std::string& s);

struct Instruction {
  Opcode op = Opcode::Nop;
  Width width = Width::Word;
  std::optional<Operand> src;        // two-operand forms
  std::optional<Operand> dst;        // two-operand and one-operand forms
  std::optional<JumpTarget> target;  // jumps only
  int source_line = 0;               // 1-based line in the parsed text
  TemplateKind ttag = TemplateKind::None;
};

// Structural equality that ignores provenance (source_line, ttag).
bool same_instruction(const Instruction& a, const Instruction& b);

struct ObjectEntry {
  std::string name;
  uint16_t base = 0;
  uint16_t len = 0;  // bytes
  bool operator==(const ObjectEntry& o) const {
    return name == o.name && base == o.base && len == o.len;
  }
};

struct Program {
  std::vector<Instruction> instructions;
  std::map<std::string, int> labels;          // label -> instruction index
  std::map<std::string, uint16_t> constants;  // .const directives
  std::vector<ObjectEntry> object_map;        // .object directives
  bool instrumented = false;                  // instrumentation marker seen
  std::string instrumented_mode;              // "cfa" or "dfa" when marked

  std::vector<std::string> labels_at(int index) const;
};

// Structural program equality ignoring line numbers and template tags.
bool same_program(const Program& a, const Program& b);

// Opcode classification helpers.
bool is_jump(Opcode op);            // Jmp and all conditional jumps
bool is_conditional_jump(Opcode op);
bool is_two_operand(Opcode op);
bool is_one_operand(Opcode op);
const char* opcode_name(Opcode op); // lower-case mnemonic
std::optional<Opcode> opcode_from_name(const std::string& lower);

// True if the instruction's *source operand* reads data memory (the class the
// data-flow pass instruments): Indirect, IndirectAutoInc, Indexed, Absolute.
bool has_memory_source(const Instruction& ins);
// True if the instruction's destination operand writes data memory.
bool has_memory_dest(const Instruction& ins);

} // namespace dialed
