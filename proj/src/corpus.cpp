#include "dialed/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dialed/asm_text.hpp"
#include "dialed/encode.hpp"

namespace dialed {

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw CorpusError(CorpusErrorKind::BadAsset, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

TraceEntry entry(const MemoryLayout& l, const std::string& port, uint16_t value) {
  TraceEntry e;
  e.port = port;
  e.addr = l.ports.at(port);
  e.value = value;
  return e;
}

// Address of a label in the target program once encoded at the app's ER base.
uint16_t label_addr(const CorpusApp& app, const Program& target,
                    const std::string& label) {
  auto it = target.labels.find(label);
  if (it == target.labels.end())
    throw CorpusError(CorpusErrorKind::BadAsset,
                      app.name + ": target program lacks label '" + label + "'");
  EncodedImage img = encode(target, app.layout.er_min);
  return img.index_to_addr[static_cast<size_t>(it->second)];
}

[[noreturn]] void not_applicable(const CorpusApp& app, AttackKind kind) {
  throw CorpusError(CorpusErrorKind::AttackNotApplicable,
                    app.name + " has no '" + attack_kind_name(kind) +
                        "' demonstration attack");
}

}  // namespace

const std::vector<std::string>& corpus_app_names() {
  static const std::vector<std::string> names = {
      "syringe_cf", "syringe_df", "fire_sensor", "ultrasonic_ranger"};
  return names;
}

CorpusApp load_app(const std::string& corpus_dir, const std::string& name) {
  const auto& names = corpus_app_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw CorpusError(CorpusErrorKind::UnknownApp,
                      "unknown corpus app '" + name + "'");
  CorpusApp app;
  app.name = name;
  app.dir = corpus_dir + "/" + name;
  app.source_text = slurp(app.dir + "/app.s");
  app.source = parse_assembly(app.source_text);
  app.layout = parse_layout(slurp(app.dir + "/layout.cfg"));
  app.benign = parse_trace(slurp(app.dir + "/benign.trace"), app.layout);
  return app;
}

const char* attack_kind_name(AttackKind k) {
  return k == AttackKind::ControlFlowOverwrite ? "cf" : "data";
}

AttackKind parse_attack_kind(const std::string& word) {
  if (word == "cf") return AttackKind::ControlFlowOverwrite;
  if (word == "data") return AttackKind::DataOnlyOverwrite;
  throw CorpusError(CorpusErrorKind::AttackNotApplicable,
                    "unknown attack kind '" + word + "' (expected cf or data)");
}

PeripheralTrace make_attack(const CorpusApp& app, AttackKind kind,
                            const Program& target) {
  const MemoryLayout& l = app.layout;
  if (app.name == "syringe_cf") {
    if (kind != AttackKind::ControlFlowOverwrite) not_applicable(app, kind);
    // A seven-word frame overruns the five-word buffer: word 5 lands on the
    // saved return address and aims it at the pump loop, past the overdose
    // guard; word 6 sits where the handler reads the frame's final word, so
    // it becomes the (unguarded) dose.
    uint16_t pump_loop = label_addr(app, target, "inject");
    PeripheralTrace t;
    t.push_back(entry(l, "CMD_IN", 7));  // frame length
    for (uint16_t filler : {0x1111, 0x2222, 0x3333, 0x4444, 0x5555})
      t.push_back(entry(l, "CMD_IN", filler));
    t.push_back(entry(l, "CMD_IN", pump_loop));  // overwrites the return slot
    t.push_back(entry(l, "CMD_IN", 48));         // dose far past the guard cap
    return t;
  }
  if (app.name == "syringe_df") {
    if (kind != AttackKind::DataOnlyOverwrite) not_applicable(app, kind);
    // Slot index 8 addresses the interlock word itself: the frame arms the
    // interlock, then the unchecked settings store clears it again, so the
    // actuation pulse never fires. No control datum is touched.
    PeripheralTrace t;
    t.push_back(entry(l, "CMD_IN", 1));  // interlock: armed
    t.push_back(entry(l, "CMD_IN", 0));  // new setting value
    t.push_back(entry(l, "CMD_IN", 8));  // slot index aliasing the interlock
    return t;
  }
  not_applicable(app, kind);
}

PeripheralTrace random_benign_trace(const CorpusApp& app, std::mt19937& rng) {
  const MemoryLayout& l = app.layout;
  auto pick = [&](uint32_t lo, uint32_t hi) {
    return static_cast<uint16_t>(
        std::uniform_int_distribution<uint32_t>(lo, hi)(rng));
  };
  PeripheralTrace t;
  if (app.name == "syringe_cf") {
    uint16_t n = pick(1, 5);  // within the buffer capacity
    t.push_back(entry(l, "CMD_IN", n));
    for (uint16_t i = 0; i + 1 < n; ++i)
      t.push_back(entry(l, "CMD_IN", pick(0, 0xffff)));
    t.push_back(entry(l, "CMD_IN", pick(0, 9)));  // dose under the cap
  } else if (app.name == "syringe_df") {
    t.push_back(entry(l, "CMD_IN", pick(0, 1)));     // interlock
    t.push_back(entry(l, "CMD_IN", pick(0, 0x40)));  // setting value
    t.push_back(entry(l, "CMD_IN", pick(0, 7)));     // in-range slot index
  } else if (app.name == "fire_sensor") {
    for (int round = 0; round < 8; ++round) {
      t.push_back(entry(l, "TEMP_IN", pick(0x20, 0x90)));
      t.push_back(entry(l, "HUM_IN", pick(0x00, 0x60)));
      t.push_back(entry(l, "SMOKE_IN", pick(0x00, 0x40)));
    }
  } else if (app.name == "ultrasonic_ranger") {
    // 15-bit echo capture: at most ~565 subtract iterations, so the
    // control-flow log stays well inside the output region.
    t.push_back(entry(l, "ECHO_IN", pick(0, 0x7fff)));
  } else {
    throw CorpusError(CorpusErrorKind::UnknownApp,
                      "unknown corpus app '" + app.name + "'");
  }
  return t;
}

}  // namespace dialed
