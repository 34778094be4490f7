// Cross-module properties over the whole corpus: text and wire round-trips,
// encoder address monotonicity, the one-record-per-transfer accounting, the
// write-guard discipline on the log region, end-to-end determinism, and
// concurrent verification.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include "dialed/asm_text.hpp"
#include "dialed/corpus.hpp"
#include "dialed/emulator.hpp"
#include "dialed/encode.hpp"
#include "dialed/instrument.hpp"
#include "dialed/layout.hpp"
#include "dialed/pox.hpp"
#include "dialed/verify.hpp"

using namespace dialed;

namespace {

CorpusApp load(const std::string& name) { return load_app(CORPUS_DIR, name); }

AttestKey test_key() {
  AttestKey k{};
  for (size_t i = 0; i < k.size(); ++i) k[i] = static_cast<uint8_t>(7 * i + 5);
  return k;
}

Challenge test_challenge() {
  Challenge c{};
  for (size_t i = 0; i < c.size(); ++i) c[i] = static_cast<uint8_t>(11 * i + 3);
  return c;
}

bool is_transfer(const Instruction& ins) {
  switch (ins.op) {
    case Opcode::Jmp:
    case Opcode::Jeq:
    case Opcode::Jne:
    case Opcode::Jn:
    case Opcode::Jlo:
    case Opcode::Jhs:
    case Opcode::Jl:
    case Opcode::Jge:
    case Opcode::Call:
    case Opcode::Ret:
      return true;
    default:
      return false;
  }
}

}  // namespace

TEST_CASE("assembly round-trips through the canonical rendering") {
  for (const auto& name : corpus_app_names()) {
    CAPTURE(name);
    CorpusApp app = load(name);
    Program again = parse_assembly(render_program(app.source));
    CHECK(same_program(app.source, again));
    // The instrumented text round-trips too, markers and all.
    for (InstrumentMode mode : {InstrumentMode::Cfa, InstrumentMode::Dfa}) {
      Instrumented inst = instrument(app.source, mode, app.layout);
      Program reparsed = parse_assembly(inst.text);
      CHECK(same_program(inst.program, reparsed));
      CHECK(reparsed.instrumented);
    }
  }
}

TEST_CASE("layout and trace files round-trip through their renderings") {
  for (const auto& name : corpus_app_names()) {
    CAPTURE(name);
    CorpusApp app = load(name);
    MemoryLayout l2 = parse_layout(render_layout(app.layout));
    CHECK(l2.er_min == app.layout.er_min);
    CHECK(l2.or_max == app.layout.or_max);
    CHECK(l2.stack_init == app.layout.stack_init);
    CHECK(l2.ports == app.layout.ports);
    PeripheralTrace t2 = parse_trace(render_trace(app.benign), app.layout);
    REQUIRE(t2.size() == app.benign.size());
    for (size_t i = 0; i < t2.size(); ++i) {
      CHECK(t2[i].addr == app.benign[i].addr);
      CHECK(t2[i].value == app.benign[i].value);
    }
  }
}

TEST_CASE("encoding is monotone and self-consistent for every variant") {
  for (const auto& name : corpus_app_names()) {
    CorpusApp app = load(name);
    for (const Program& p :
         {app.source, instrument(app.source, InstrumentMode::Cfa, app.layout).program,
          instrument(app.source, InstrumentMode::Dfa, app.layout).program}) {
      EncodedImage img = encode(p, app.layout.er_min);
      REQUIRE(img.index_to_addr.size() == p.instructions.size());
      uint32_t expect = app.layout.er_min;
      for (size_t i = 0; i < img.index_to_addr.size(); ++i) {
        CAPTURE(name);
        CAPTURE(i);
        REQUIRE(img.index_to_addr[i] == expect);
        REQUIRE(img.addr_to_index.at(img.index_to_addr[i]) ==
                static_cast<int>(i));
        expect += 2u * img.index_words[i];
      }
      CHECK(expect - app.layout.er_min == img.size_bytes());
    }
  }
}

TEST_CASE("a benign run logs exactly one record per executed transfer") {
  for (const auto& name : corpus_app_names()) {
    CAPTURE(name);
    CorpusApp app = load(name);

    // Independent oracle: count the transfers the uninstrumented program
    // executes on the same trace.
    DeviceRun base(app.source, app.layout, app.benign);
    uint64_t executed_transfers = 0;
    while (!base.finished()) {
      const Instruction& ins =
          app.source.instructions[static_cast<size_t>(base.machine().pc_index)];
      if (is_transfer(ins)) ++executed_transfers;
      base.step();
    }
    REQUIRE(base.result().reason == HaltReason::Completed);

    Program dfa =
        instrument(app.source, InstrumentMode::Dfa, app.layout).program;
    DeviceRun dev(dfa, app.layout, app.benign);
    uint64_t transfer_record_bytes = 0;
    while (!dev.finished()) {
      TemplateKind tk =
          dfa.instructions[static_cast<size_t>(dev.machine().pc_index)].ttag;
      bool cf_template = tk == TemplateKind::CfJmp ||
                         tk == TemplateKind::CfBranch ||
                         tk == TemplateKind::CfCall || tk == TemplateKind::CfRet;
      dev.step();
      if (cf_template)
        for (const MemAccess& a : dev.last_accesses())
          if (a.is_write && app.layout.in_or(a.addr)) transfer_record_bytes += 2;
    }
    REQUIRE(dev.result().reason == HaltReason::Completed);
    // Every jump, branch, call, and return the application executes
    // contributes exactly one two-byte destination record.
    CHECK(executed_transfers > 0);
    CHECK(transfer_record_bytes == 2 * executed_transfers);
  }
}

TEST_CASE("only template instructions ever write into the log region") {
  for (const auto& name : corpus_app_names()) {
    CAPTURE(name);
    CorpusApp app = load(name);
    Program dfa =
        instrument(app.source, InstrumentMode::Dfa, app.layout).program;
    DeviceRun dev(dfa, app.layout, app.benign);
    while (!dev.finished()) {
      TemplateKind tk =
          dfa.instructions[static_cast<size_t>(dev.machine().pc_index)].ttag;
      dev.step();
      for (const MemAccess& a : dev.last_accesses())
        if (a.is_write && app.layout.in_or(a.addr))
          REQUIRE(tk != TemplateKind::None);
    }
  }
}

TEST_CASE("device, report, and verdict are bit-for-bit deterministic") {
  CorpusApp app = load("syringe_cf");
  Program dfa = instrument(app.source, InstrumentMode::Dfa, app.layout).program;
  auto once = [&]() {
    RunResult r = run_operation(dfa, app.layout, app.benign);
    return serialize_report(attest(r, app.layout, test_key(), test_challenge()));
  };
  std::vector<uint8_t> a = once(), b = once();
  CHECK(a == b);
  VerifyResult va = verify_report(a, dfa, app.layout, test_key(), test_challenge());
  VerifyResult vb = verify_report(b, dfa, app.layout, test_key(), test_challenge());
  CHECK(va.verdict == VerifyVerdict::Verified);
  CHECK(va.verdict == vb.verdict);
  CHECK(va.replay_steps == vb.replay_steps);
  CHECK(va.detail == vb.detail);
}

TEST_CASE("verification is safe to run concurrently") {
  CorpusApp app = load("syringe_df");
  Program dfa = instrument(app.source, InstrumentMode::Dfa, app.layout).program;
  RunResult r = run_operation(dfa, app.layout, app.benign);
  std::vector<uint8_t> report =
      serialize_report(attest(r, app.layout, test_key(), test_challenge()));

  std::atomic<int> verified{0};
  std::vector<std::thread> pool;
  for (int i = 0; i < 8; ++i)
    pool.emplace_back([&]() {
      for (int j = 0; j < 5; ++j) {
        VerifyResult vr =
            verify_report(report, dfa, app.layout, test_key(), test_challenge());
        if (vr.verdict == VerifyVerdict::Verified) ++verified;
      }
    });
  for (auto& t : pool) t.join();
  CHECK(verified.load() == 40);
}
