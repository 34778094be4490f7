// Device memory layout: the executable region (ER), the protected output
// region (OR), the call-stack base, and the peripheral input window. Loaded
// from a small key=value config and validated for alignment and disjointness.
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace dialed {

struct LayoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MemoryLayout {
  uint16_t er_min = 0;       // first ER byte (program image base)
  uint16_t er_max = 0;       // last ER byte
  uint16_t or_min = 0;       // first OR byte
  uint16_t or_max = 0;       // address of the last OR *word* (slot address)
  uint16_t stack_init = 0;   // SP at operation entry (grows downward)
  uint16_t periph_min = 0;   // peripheral input window, inclusive
  uint16_t periph_max = 0;

  // Named peripheral ports inside [periph_min, periph_max].
  std::map<std::string, uint16_t> ports;

  uint16_t or_end() const { return static_cast<uint16_t>(or_max + 2); }
  uint16_t or_len() const { return static_cast<uint16_t>(or_max + 2 - or_min); }

  bool in_er(uint16_t a) const { return a >= er_min && a <= er_max; }
  // OR as a byte region covers both bytes of the last slot.
  bool in_or(uint16_t a) const {
    return a >= or_min && a <= static_cast<uint16_t>(or_max + 1);
  }
  bool in_periph(uint16_t a) const {
    return a >= periph_min && a <= periph_max;
  }

  void validate() const;  // throws LayoutError
};

// Parses `key = value` lines (# comments, blank lines allowed). Required
// keys: er_min, er_max, or_min, or_max, stack_init, periph_min, periph_max.
// Any `port.NAME = addr` line adds a named peripheral port. Validates before
// returning.
MemoryLayout parse_layout(const std::string& text);
MemoryLayout load_layout(const std::string& path);  // reads the file
std::string render_layout(const MemoryLayout& l);

} // namespace dialed
