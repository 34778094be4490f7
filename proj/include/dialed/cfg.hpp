#pragma once

#include <utility>
#include <vector>

#include "dialed/encode.hpp"
#include "dialed/isa.hpp"

namespace dialed {

// Static control-flow model of an encoded program.
//
// Successors are expressed as instruction indices. `dynamic` marks transfers
// whose destination is computed at run time (register calls, pc-writing
// instructions); for those the only static constraint is that execution lands
// on an instruction start, and the run-time log supplies the concrete target.
struct CfSucc {
  std::vector<int> direct;  // statically known successor indices
  bool dynamic = false;     // run-time-computed destination
  bool is_call = false;     // pushes a return site on the call stack
  int return_site = -1;     // instruction index a matching ret resumes at (-1: none)
  bool is_ret = false;      // destination must match the call stack top
  bool halts = false;       // no successors
};

struct CfgBlock {
  int first = 0;  // first instruction index in the block
  int last = 0;   // last instruction index in the block (inclusive)
};

struct Cfg {
  std::vector<CfSucc> succ;                      // one entry per instruction
  std::vector<CfgBlock> blocks;                  // basic blocks in program order
  std::vector<std::pair<int, int>> block_edges;  // static edges between blocks

  // Index into `blocks` of the block containing the given instruction.
  int block_of(int instr_index) const;
};

Cfg build_cfg(const Program& p, const EncodedImage& img);

}  // namespace dialed
