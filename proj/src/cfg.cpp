#include "dialed/cfg.hpp"

#include <algorithm>
#include <set>

namespace dialed {

namespace {

bool writes_pc(const Instruction& ins) {
  // Register r0 is the program counter; storing to it is a computed jump.
  const auto reg_dst = [](const std::optional<Operand>& op) {
    return op && op->mode == AddrMode::RegDirect && op->reg == 0;
  };
  if (is_two_operand(ins.op)) return reg_dst(ins.dst);
  if (ins.op == Opcode::Pop || ins.op == Opcode::Dec || ins.op == Opcode::Inc)
    return reg_dst(ins.dst);
  return false;
}

int index_of_addr(const EncodedImage& img, uint16_t addr) {
  auto it = img.addr_to_index.find(addr);
  return it == img.addr_to_index.end() ? -1 : it->second;
}

}  // namespace

int Cfg::block_of(int instr_index) const {
  for (size_t b = 0; b < blocks.size(); ++b)
    if (blocks[b].first <= instr_index && instr_index <= blocks[b].last)
      return static_cast<int>(b);
  return -1;
}

Cfg build_cfg(const Program& p, const EncodedImage& img) {
  const int n = static_cast<int>(p.instructions.size());
  Cfg cfg;
  cfg.succ.resize(n);

  std::set<int> leaders;
  if (n > 0) leaders.insert(0);

  for (int i = 0; i < n; ++i) {
    const Instruction& ins = p.instructions[i];
    CfSucc& s = cfg.succ[i];
    const int fall = (i + 1 < n) ? i + 1 : -1;
    bool ends_block = false;

    if (ins.op == Opcode::Halt) {
      s.halts = true;
      ends_block = true;
    } else if (ins.op == Opcode::Ret) {
      s.is_ret = true;
      ends_block = true;
    } else if (ins.op == Opcode::Jmp) {
      int t = index_of_addr(img, resolved_jump_target(p, img, ins));
      if (t >= 0) {
        s.direct.push_back(t);
        leaders.insert(t);
      }
      ends_block = true;
    } else if (is_conditional_jump(ins.op)) {
      int t = index_of_addr(img, resolved_jump_target(p, img, ins));
      if (t >= 0) {
        s.direct.push_back(t);
        leaders.insert(t);
      }
      if (fall >= 0) s.direct.push_back(fall);
      ends_block = true;
    } else if (ins.op == Opcode::Call) {
      s.is_call = true;
      s.return_site = fall;
      if (ins.dst && ins.dst->mode == AddrMode::Immediate) {
        int t = index_of_addr(img, resolved_operand_value(p, img, ins, *ins.dst));
        if (t >= 0) {
          s.direct.push_back(t);
          leaders.insert(t);
        }
      } else {
        s.dynamic = true;
      }
      ends_block = true;
    } else if (writes_pc(ins)) {
      s.dynamic = true;
      ends_block = true;
    } else if (fall >= 0) {
      s.direct.push_back(fall);
    }

    if (ends_block && fall >= 0) leaders.insert(fall);
  }

  std::vector<int> sorted(leaders.begin(), leaders.end());
  for (size_t b = 0; b < sorted.size(); ++b) {
    int first = sorted[b];
    int last = (b + 1 < sorted.size()) ? sorted[b + 1] - 1 : n - 1;
    cfg.blocks.push_back({first, last});
  }

  std::set<std::pair<int, int>> edges;
  for (size_t b = 0; b < cfg.blocks.size(); ++b) {
    const CfSucc& s = cfg.succ[cfg.blocks[b].last];
    for (int d : s.direct) edges.insert({static_cast<int>(b), cfg.block_of(d)});
    if (s.is_call && s.return_site >= 0)
      edges.insert({static_cast<int>(b), cfg.block_of(s.return_site)});
  }
  cfg.block_edges.assign(edges.begin(), edges.end());
  return cfg;
}

}  // namespace dialed
