#pragma once
// Demonstration corpus: four small MCU operations (two infusion-pump
// handlers, a flame watch, an ultrasonic ranger), each shipped as assembly
// source, a memory layout, and a canonical benign peripheral trace. The two
// pump apps carry deliberate input-handling flaws; make_attack() builds the
// peripheral trace that triggers each flaw purely through inputs, so the
// same binary runs benignly or under attack depending only on the trace.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dialed/emulator.hpp"
#include "dialed/isa.hpp"
#include "dialed/layout.hpp"

namespace dialed {

enum class CorpusErrorKind : uint8_t {
  UnknownApp,           // name outside corpus_app_names()
  BadAsset,             // missing or unreadable app.s / layout.cfg / benign.trace
  AttackNotApplicable,  // the app has no demonstration attack of that kind
};

class CorpusError : public std::runtime_error {
 public:
  CorpusError(CorpusErrorKind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
  CorpusErrorKind kind;
};

struct CorpusApp {
  std::string name;
  std::string dir;         // directory the assets were loaded from
  Program source;          // the uninstrumented operation
  std::string source_text; // raw app.s contents
  MemoryLayout layout;
  PeripheralTrace benign;  // canonical demonstration trace
};

// The four application names, in fixed presentation order.
const std::vector<std::string>& corpus_app_names();

// Loads <corpus_dir>/<name>/{app.s, layout.cfg, benign.trace}.
CorpusApp load_app(const std::string& corpus_dir, const std::string& name);

enum class AttackKind : uint8_t {
  ControlFlowOverwrite,  // overruns a stack buffer into a return address
  DataOnlyOverwrite,     // corrupts a non-control variable via a bad index
};

const char* attack_kind_name(AttackKind k);  // "cf" / "data"
// Parses "cf" / "data"; throws CorpusError(AttackNotApplicable) otherwise.
AttackKind parse_attack_kind(const std::string& word);

// Crafts the peripheral trace delivering the app's demonstration attack.
// Code addresses embedded in a payload are taken from `target`'s encoded
// image, so the same attack can be aimed at the baseline binary (to show
// its physical effect) or at an instrumented one (to show detection).
PeripheralTrace make_attack(const CorpusApp& app, AttackKind kind,
                            const Program& target);

// A randomized benign trace: input values are drawn from each app's sane
// operating envelope, so the run terminates normally and the log fits the
// output region.
PeripheralTrace random_benign_trace(const CorpusApp& app, std::mt19937& rng);

}  // namespace dialed
