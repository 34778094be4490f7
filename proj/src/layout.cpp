#include "dialed/layout.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace dialed {
namespace {

std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

uint16_t parse_addr(const std::string& s, const std::string& key) {
  std::string body = s;
  int base = 10;
  if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
    base = 16;
    body = body.substr(2);
  }
  uint32_t v = 0;
  auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), v, base);
  if (ec != std::errc() || p != body.data() + body.size() || v > 0xFFFF)
    throw LayoutError("bad value for '" + key + "': " + s);
  return static_cast<uint16_t>(v);
}

} // namespace

void MemoryLayout::validate() const {
  auto even = [](uint16_t v, const char* what) {
    if (v % 2 != 0)
      throw LayoutError(std::string(what) + " must be word-aligned");
  };
  even(er_min, "er_min");
  even(or_min, "or_min");
  even(or_max, "or_max");
  even(stack_init, "stack_init");
  if (er_min >= er_max) throw LayoutError("er_min must be below er_max");
  if (or_min >= or_max) throw LayoutError("or_min must be below or_max");
  if (periph_min > periph_max)
    throw LayoutError("periph_min must not exceed periph_max");
  if (or_max >= 0xFFFE) throw LayoutError("or_max leaves no room for or_end");

  // Pairwise-disjoint byte regions: ER, OR (through or_max+1), stack word at
  // stack_init, peripherals.
  struct Span { uint32_t lo, hi; const char* name; };
  std::vector<Span> spans = {
      {er_min, er_max, "er"},
      {or_min, static_cast<uint32_t>(or_max) + 1, "or"},
      {periph_min, periph_max, "peripherals"},
      {stack_init, static_cast<uint32_t>(stack_init) + 1, "stack_init"},
  };
  for (size_t i = 0; i < spans.size(); ++i)
    for (size_t j = i + 1; j < spans.size(); ++j)
      if (spans[i].lo <= spans[j].hi && spans[j].lo <= spans[i].hi)
        throw LayoutError(std::string(spans[i].name) + " overlaps " +
                          spans[j].name);

  for (const auto& [name, addr] : ports)
    if (!in_periph(addr))
      throw LayoutError("port '" + name + "' lies outside the peripheral window");
}

MemoryLayout parse_layout(const std::string& text) {
  MemoryLayout l;
  std::map<std::string, bool> seen;
  std::istringstream ss(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    std::string line = strip(raw);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = strip(line.substr(0, hash));
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw LayoutError("layout line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    uint16_t v = parse_addr(value, key);
    if (seen[key])
      throw LayoutError("duplicate layout key '" + key + "'");
    seen[key] = true;
    if (key == "er_min") l.er_min = v;
    else if (key == "er_max") l.er_max = v;
    else if (key == "or_min") l.or_min = v;
    else if (key == "or_max") l.or_max = v;
    else if (key == "stack_init") l.stack_init = v;
    else if (key == "periph_min") l.periph_min = v;
    else if (key == "periph_max") l.periph_max = v;
    else if (key.rfind("port.", 0) == 0) l.ports[key.substr(5)] = v;
    else throw LayoutError("unknown layout key '" + key + "'");
  }
  for (const char* k : {"er_min", "er_max", "or_min", "or_max", "stack_init",
                        "periph_min", "periph_max"})
    if (!seen[k]) throw LayoutError(std::string("missing layout key '") + k + "'");
  l.validate();
  return l;
}

MemoryLayout load_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LayoutError("cannot open layout file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_layout(buf.str());
}

std::string render_layout(const MemoryLayout& l) {
  std::ostringstream out;
  char buf[32];
  auto emit = [&](const char* key, uint16_t v) {
    std::snprintf(buf, sizeof buf, "%s = 0x%04x\n", key, v);
    out << buf;
  };
  emit("er_min", l.er_min);
  emit("er_max", l.er_max);
  emit("or_min", l.or_min);
  emit("or_max", l.or_max);
  emit("stack_init", l.stack_init);
  emit("periph_min", l.periph_min);
  emit("periph_max", l.periph_max);
  for (const auto& [name, addr] : l.ports)
    emit(("port." + name).c_str(), addr);
  return out.str();
}

} // namespace dialed
