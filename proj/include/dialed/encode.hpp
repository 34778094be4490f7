// Deterministic byte encoding with the documented size model:
//   1 word per instruction + 1 extension word per Immediate/Indexed/Absolute
//   operand; jumps are always exactly 1 word.
//
// The first word is a stable fingerprint of the instruction (opcode, width,
// operand shapes, registers, resolved jump target); extension words carry the
// operand values verbatim. The image is what gets measured, hashed, and
// MAC'd — execution runs over the decoded Program via the address map.
#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "dialed/isa.hpp"

namespace dialed {

struct EncodedImage {
  uint16_t base = 0;
  std::vector<uint8_t> bytes;                  // little-endian words
  std::vector<uint16_t> index_to_addr;         // instruction index -> address
  std::vector<uint8_t> index_words;            // instruction index -> word count
  std::map<uint16_t, int> addr_to_index;       // address -> instruction index

  uint16_t size_bytes() const { return static_cast<uint16_t>(bytes.size()); }
  uint16_t end_addr() const {                  // first address past the image
    return static_cast<uint16_t>(base + bytes.size());
  }
};

// Word count of one instruction under the size model.
unsigned instruction_words(const Instruction& ins);

// Byte size of a program without materializing the image.
unsigned image_size_bytes(const Program& p);

// Encodes at `base` (must be even). Throws AsmError(ImageOverflow) if the
// image would run past the 16-bit address space, and AsmError(UnresolvedLabel)
// for label-valued immediates or numeric jump targets that don't land on an
// instruction of this program.
EncodedImage encode(const Program& p, uint16_t base);

// Numeric value of an operand with label immediates resolved against the
// encoded layout (constants were already folded in by the parser). Throws
// AsmError(UnresolvedLabel) if a label immediate has no address.
uint16_t resolved_operand_value(const Program& p, const EncodedImage& img,
                                const Instruction& ins, const Operand& op);

// Address a jump target resolves to under the encoded layout.
uint16_t resolved_jump_target(const Program& p, const EncodedImage& img,
                              const Instruction& ins);

} // namespace dialed
