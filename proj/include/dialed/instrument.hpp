#pragma once

#include <stdexcept>
#include <string>

#include "dialed/isa.hpp"
#include "dialed/layout.hpp"

namespace dialed {

// Instrumentation rewrites an application program so that, at run time, it
// maintains an evidence log in the protected output region (pointed to by
// register r4) and refuses to run under a tampered launch state:
//
//   cfa mode: verifies the log pointer at entry, records the destination of
//     every control-flow transfer (jumps, branch arms, calls, returns), and
//     guards every store so the live part of the log cannot be overwritten.
//     Guards and transfer records preserve the status register.
//
//   dfa mode: everything in cfa mode, plus a prologue that records the
//     launch-time stack pointer and the operation arguments (r8..r15), and a
//     classifier after every memory-source read that records the value read
//     whenever the address lies outside the operation's own stack interval
//     [sp, launch stack pointer] — i.e. whenever it is an external input.
//
// The rewritten text marks every inserted region, so the rewritten program
// can be parsed back with full provenance (Instruction::ttag).
//
// Register discipline: r4 (log pointer) and r2 (status register) belong to
// the instrumentation; application code must not name them. A handful of
// shapes cannot be rewritten faithfully and are rejected; see
// InstrumentErrorKind.

enum class InstrumentMode { Cfa, Dfa };

enum class InstrumentErrorKind {
  AlreadyInstrumented,  // input program carries an instrumentation marker
  EmptyProgram,         // nothing to instrument
  ReservedRegister,     // application names r2 or r4
  ReservedSymbol,       // application uses a label/constant the rewriter owns
  PcWrite,              // computed jump by storing to r0 (not rewritable)
  NumericTarget,        // jump/call to a numeric address (labels only)
  UnsupportedSite,      // read site shape the classifier cannot log faithfully
};

struct InstrumentError : std::runtime_error {
  InstrumentErrorKind kind;
  int line;  // source line of the offending instruction, 0 if N/A
  InstrumentError(InstrumentErrorKind k, int line_, const std::string& msg)
      : std::runtime_error(msg), kind(k), line(line_) {}
};

struct Instrumented {
  std::string text;  // rewritten assembly, with region markers
  Program program;   // the same text, parsed back
};

Instrumented instrument(const Program& p, InstrumentMode mode,
                        const MemoryLayout& layout);
Instrumented instrument_text(const std::string& source, InstrumentMode mode,
                             const MemoryLayout& layout);

// Site classification shared with the verifier and the measurement tooling.
// A read site is a two-operand instruction whose source operand reads data
// memory; its value is a candidate external input.
bool is_read_site(const Instruction& ins);
unsigned count_read_sites(const Program& p);

// Control-transfer instructions whose destination gets logged in cfa mode.
bool is_cf_site(const Instruction& ins);
unsigned count_cf_sites(const Program& p);

// Store-capable instructions that receive a guard in cfa mode (explicit
// memory destinations, push, call).
bool is_guarded_store(const Instruction& ins);

}  // namespace dialed
