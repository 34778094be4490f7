#include "dialed/encode.hpp"

#include "dialed/asm_text.hpp"

namespace dialed {
namespace {

bool needs_extension_word(const Operand& op) {
  return op.mode == AddrMode::Immediate || op.mode == AddrMode::Indexed ||
         op.mode == AddrMode::Absolute;
}

// 16-bit mixer for the instruction fingerprint word. Deterministic and well
// spread; collisions between *distinct* instructions would additionally need
// identical extension words to yield identical image bytes.
struct Fold {
  uint16_t h = 0xD1A1;
  void mix(uint16_t v) {
    h = static_cast<uint16_t>(h ^ v);
    h = static_cast<uint16_t>(h * 0x6B73u);
    h = static_cast<uint16_t>((h << 7) | (h >> 9));
  }
};

void push_word(std::vector<uint8_t>& out, uint16_t w) {
  out.push_back(static_cast<uint8_t>(w & 0xFF));
  out.push_back(static_cast<uint8_t>(w >> 8));
}

} // namespace

unsigned instruction_words(const Instruction& ins) {
  if (ins.target) return 1;  // jumps always fit the single word
  unsigned words = 1;
  if (ins.src && needs_extension_word(*ins.src)) ++words;
  if (ins.dst && needs_extension_word(*ins.dst)) ++words;
  return words;
}

unsigned image_size_bytes(const Program& p) {
  unsigned words = 0;
  for (const auto& ins : p.instructions) words += instruction_words(ins);
  return words * 2;
}

uint16_t resolved_operand_value(const Program& p, const EncodedImage& img,
                                const Instruction& ins, const Operand& op) {
  if (op.mode == AddrMode::Immediate && !op.sym.empty() &&
      !p.constants.count(op.sym)) {
    for (const ObjectEntry& o : p.object_map)
      if (o.name == op.sym) return op.value;  // resolved at parse time
    auto it = p.labels.find(op.sym);
    if (it == p.labels.end() ||
        it->second > static_cast<int>(img.index_to_addr.size()))
      throw AsmError(AsmErrorKind::UnresolvedLabel, ins.source_line, op.sym,
                     "unresolved label immediate '" + op.sym + "'");
    return it->second < static_cast<int>(img.index_to_addr.size())
               ? img.index_to_addr[it->second]
               : img.end_addr();  // label pinned past the last instruction
  }
  return op.value;
}

uint16_t resolved_jump_target(const Program& p, const EncodedImage& img,
                              const Instruction& ins) {
  if (!ins.target)
    throw AsmError(AsmErrorKind::SyntaxError, ins.source_line, "",
                   "not a jump instruction");
  if (!ins.target->label.empty()) {
    auto it = p.labels.find(ins.target->label);
    if (it == p.labels.end())
      throw AsmError(AsmErrorKind::UnresolvedLabel, ins.source_line,
                     ins.target->label,
                     "unresolved jump target '" + ins.target->label + "'");
    return it->second < static_cast<int>(img.index_to_addr.size())
               ? img.index_to_addr[it->second]
               : img.end_addr();
  }
  uint16_t dest = ins.target->addr;
  if (!img.addr_to_index.count(dest))
    throw AsmError(AsmErrorKind::UnresolvedLabel, ins.source_line, "",
                   "numeric jump target is not an instruction address");
  return dest;
}

EncodedImage encode(const Program& p, uint16_t base) {
  if (base % 2 != 0)
    throw AsmError(AsmErrorKind::SyntaxError, 0, "",
                   "image base must be word-aligned");

  EncodedImage img;
  img.base = base;

  // Pass 1: lay out addresses.
  uint32_t addr = base;
  for (const auto& ins : p.instructions) {
    unsigned w = instruction_words(ins);
    img.index_to_addr.push_back(static_cast<uint16_t>(addr));
    img.index_words.push_back(static_cast<uint8_t>(w));
    img.addr_to_index[static_cast<uint16_t>(addr)] =
        static_cast<int>(img.index_to_addr.size()) - 1;
    addr += 2 * w;
  }
  if (addr > 0x10000)
    throw AsmError(AsmErrorKind::ImageOverflow, 0, "",
                   "program image runs past the 16-bit address space");

  // Pass 2: emit words.
  for (const auto& ins : p.instructions) {
    Fold f;
    f.mix(static_cast<uint16_t>(static_cast<unsigned>(ins.op) + 1));
    f.mix(ins.width == Width::Byte ? 0x0040 : 0x0001);
    if (ins.target) {
      f.mix(resolved_jump_target(p, img, ins));
      push_word(img.bytes, f.h);
      continue;
    }
    std::vector<uint16_t> ext;
    for (const Operand* op : {ins.src ? &*ins.src : nullptr,
                              ins.dst ? &*ins.dst : nullptr}) {
      if (!op) continue;
      f.mix(static_cast<uint16_t>(static_cast<unsigned>(op->mode) * 16 +
                                  op->reg + 3));
      if (needs_extension_word(*op))
        ext.push_back(resolved_operand_value(p, img, ins, *op));
    }
    push_word(img.bytes, f.h);
    for (uint16_t w : ext) push_word(img.bytes, w);
  }
  return img;
}

} // namespace dialed
