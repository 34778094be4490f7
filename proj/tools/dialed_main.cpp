// dialed — workbench CLI for the data-flow attestation pipeline.
//
// Subcommands cover the whole flow over plain files: assemble, instrument,
// run on the emulated device, run-and-attest, verify a report, demonstrate
// the corpus attacks end-to-end, and produce the overhead table.
//
// Exit codes: verify/demo-attack exit with the verdict's code (0 Verified,
// 2 TokenInvalid, 3 ExecCleared, 4 ControlFlowAttack, 5 DataOnlyAttack,
// 6 LogInconsistent, 7 LogOverflowAbort); other commands exit 0 on success.
// Usage and bad-input errors exit 64; file I/O errors exit 74.
#include <CLI11.hpp>

#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dialed/asm_text.hpp"
#include "dialed/corpus.hpp"
#include "dialed/emulator.hpp"
#include "dialed/instrument.hpp"
#include "dialed/layout.hpp"
#include "dialed/metrics.hpp"
#include "dialed/pox.hpp"
#include "dialed/verify.hpp"

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitIo = 74;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path);
  return buf.str();
}

void spew(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << data;
  out.flush();
  if (!out) throw IoError("cannot write " + path);
}

std::vector<uint8_t> slurp_bytes(const std::string& path) {
  std::string s = slurp(path);
  return std::vector<uint8_t>(s.begin(), s.end());
}

dialed::AttestKey load_key(const std::string& path) {
  std::string hex = slurp(path);
  std::string clean;
  for (char c : hex)
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  return dialed::parse_key_hex(clean);
}

std::string to_hex(const uint8_t* data, size_t n) {
  static const char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (size_t i = 0; i < n; ++i) {
    out.push_back(digits[data[i] >> 4]);
    out.push_back(digits[data[i] & 0xf]);
  }
  return out;
}

dialed::Challenge random_challenge() {
  std::random_device rd;
  dialed::Challenge c{};
  for (auto& b : c) b = static_cast<uint8_t>(rd());
  return c;
}

// Parses "v1,v2,..." (up to eight values) into the r8..r15 launch arguments.
std::array<uint16_t, 8> parse_args_list(const std::string& list) {
  std::array<uint16_t, 8> args{};
  std::istringstream ss(list);
  std::string item;
  size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= args.size())
      throw CLI::ValidationError("--args", "more than eight values");
    unsigned long v = std::stoul(item, nullptr, 0);
    if (v > 0xFFFF)
      throw CLI::ValidationError("--args", "value out of 16-bit range: " + item);
    args[i++] = static_cast<uint16_t>(v);
  }
  return args;
}

void print_verdict(const dialed::VerifyResult& vr) {
  std::cout << dialed::verdict_name(vr.verdict);
  if (!vr.detail.empty()) std::cout << ": " << vr.detail;
  std::cout << "\n";
}

// Nonce store: one challenge per line, flock-serialized check-and-insert.
// Returns false when the challenge was already used.
bool consume_challenge(const std::string& path, const dialed::Challenge& c) {
  std::string hex = to_hex(c.data(), c.size());
  FILE* f = std::fopen(path.c_str(), "a+e");
  if (!f) throw IoError("cannot open nonce store " + path);
  if (flock(fileno(f), LOCK_EX) != 0) {
    std::fclose(f);
    throw IoError("cannot lock nonce store " + path);
  }
  std::rewind(f);
  bool seen = false;
  char line[128];
  while (std::fgets(line, sizeof line, f)) {
    std::string s(line);
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    if (s == hex) {
      seen = true;
      break;
    }
  }
  if (!seen) {
    std::fseek(f, 0, SEEK_END);
    std::fprintf(f, "%s\n", hex.c_str());
    std::fflush(f);
  }
  std::fclose(f);  // releases the lock
  return !seen;
}

struct RunInputs {
  dialed::Program program;
  dialed::MemoryLayout layout;
  dialed::PeripheralTrace trace;
};

RunInputs load_run_inputs(const std::string& program_path,
                          const std::string& layout_path,
                          const std::string& trace_path) {
  RunInputs in;
  in.program = dialed::parse_assembly(slurp(program_path));
  in.layout = dialed::parse_layout(slurp(layout_path));
  if (!trace_path.empty())
    in.trace = dialed::parse_trace(slurp(trace_path), in.layout);
  return in;
}

dialed::RunResult run_device(const RunInputs& in, const std::string& args_list,
                             uint64_t max_steps) {
  dialed::DeviceRun dev(in.program, in.layout, in.trace);
  if (!args_list.empty()) dev.set_entry_args(parse_args_list(args_list));
  return dev.run(max_steps);
}

void print_run(const dialed::RunResult& r) {
  std::cout << "reason " << dialed::halt_reason_name(r.reason) << "\n"
            << "exec " << (r.exec ? 1 : 0) << "\n"
            << "steps " << r.steps << "\n"
            << "cycles " << r.cycles << "\n"
            << "log_pointer 0x" << std::hex << r.r4_final << std::dec << "\n";
  for (const dialed::GpioEvent& e : r.gpio_log)
    std::cout << "gpio 0x" << std::hex << e.addr << " 0x" << e.value
              << std::dec << "\n";
}

int cmd_demo_attack(const std::string& corpus_dir, const std::string& app_name,
                    const std::string& kind_word,
                    const std::string& key_path) {
  using namespace dialed;
  CorpusApp app = load_app(corpus_dir, app_name);
  AttackKind kind = parse_attack_kind(kind_word);

  AttestKey key{};
  if (!key_path.empty()) {
    key = load_key(key_path);
  } else {
    for (size_t i = 0; i < key.size(); ++i)
      key[i] = static_cast<uint8_t>(0x42 + i);  // built-in demo secret
  }

  // Show the physical effect on the unprotected binary first.
  RunResult benign = run_operation(app.source, app.layout, app.benign);
  PeripheralTrace effect_trace = make_attack(app, kind, app.source);
  RunResult attacked = run_operation(app.source, app.layout, effect_trace);
  std::cout << "# " << app_name << ": benign run emits "
            << benign.gpio_log.size() << " port events, attacked run emits "
            << attacked.gpio_log.size() << "\n";

  // Then the protected pipeline: instrument, attack, attest, verify.
  Program dfa = instrument(app.source, InstrumentMode::Dfa, app.layout).program;
  PeripheralTrace attack = make_attack(app, kind, dfa);
  RunResult run = run_operation(dfa, app.layout, attack);
  Challenge challenge = random_challenge();
  std::cout << "# challenge " << to_hex(challenge.data(), challenge.size())
            << "\n";
  auto report = serialize_report(attest(run, app.layout, key, challenge));
  VerifyResult vr = verify_report(report, dfa, app.layout, key, challenge);
  print_verdict(vr);
  return verdict_exit_code(vr.verdict);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"data-flow attestation workbench"};
  cli.require_subcommand(1);

  // --- asm ---------------------------------------------------------------
  std::string asm_in, asm_out;
  auto* c_asm = cli.add_subcommand(
      "asm", "parse and validate assembly, write the canonical rendering");
  c_asm->add_option("input", asm_in, "assembly source")->required();
  c_asm->add_option("-o,--output", asm_out, "canonical output file")
      ->required();

  // --- instrument --------------------------------------------------------
  std::string ins_in, ins_out, ins_layout, ins_mode = "dfa";
  auto* c_ins = cli.add_subcommand(
      "instrument", "rewrite a program with attestation logging");
  c_ins->add_option("input", ins_in, "assembly source")->required();
  c_ins->add_option("--layout", ins_layout, "memory layout file")->required();
  c_ins->add_option("--mode", ins_mode, "cfa or dfa (default dfa)")
      ->check(CLI::IsMember({"cfa", "dfa"}));
  c_ins->add_option("-o,--output", ins_out, "instrumented output file")
      ->required();

  // --- run ---------------------------------------------------------------
  std::string run_prog, run_layout, run_trace, run_args;
  uint64_t run_steps = dialed::DeviceRun::kDefaultStepLimit;
  auto* c_run =
      cli.add_subcommand("run", "execute a program on the emulated device");
  c_run->add_option("program", run_prog, "assembly source")->required();
  c_run->add_option("--layout", run_layout, "memory layout file")->required();
  c_run->add_option("--trace", run_trace, "peripheral input trace");
  c_run->add_option("--args", run_args,
                    "launch arguments for r8..r15, comma-separated");
  c_run->add_option("--steps", run_steps, "step budget");

  // --- attest ------------------------------------------------------------
  std::string at_prog, at_layout, at_trace, at_args, at_key, at_challenge,
      at_out;
  uint64_t at_steps = dialed::DeviceRun::kDefaultStepLimit;
  auto* c_at = cli.add_subcommand(
      "attest", "execute a program and write the signed attestation report");
  c_at->add_option("program", at_prog, "assembly source")->required();
  c_at->add_option("--layout", at_layout, "memory layout file")->required();
  c_at->add_option("--trace", at_trace, "peripheral input trace");
  c_at->add_option("--args", at_args,
                   "launch arguments for r8..r15, comma-separated");
  c_at->add_option("--steps", at_steps, "step budget");
  c_at->add_option("--key", at_key, "32-byte shared secret, hex file")
      ->required();
  c_at->add_option("--challenge", at_challenge,
                   "verifier nonce, 32 hex digits (default: random, echoed)");
  c_at->add_option("-o,--output", at_out, "report output file")->required();

  // --- verify ------------------------------------------------------------
  std::string vf_report, vf_prog, vf_layout, vf_key, vf_challenge, vf_nonces;
  auto* c_vf = cli.add_subcommand(
      "verify", "check an attestation report against the expected program");
  c_vf->add_option("report", vf_report, "report file")->required();
  c_vf->add_option("--program", vf_prog, "expected instrumented program")
      ->required();
  c_vf->add_option("--layout", vf_layout, "memory layout file")->required();
  c_vf->add_option("--key", vf_key, "32-byte shared secret, hex file")
      ->required();
  c_vf->add_option("--challenge", vf_challenge, "issued nonce, 32 hex digits")
      ->required();
  c_vf->add_option("--nonce-store", vf_nonces,
                   "challenge-reuse ledger file (flock-serialized)");

  // --- demo-attack -------------------------------------------------------
  std::string da_app, da_kind, da_corpus = "corpus", da_key;
  auto* c_da = cli.add_subcommand(
      "demo-attack", "run a corpus attack end-to-end and verify the report");
  c_da->add_option("app", da_app, "corpus application name")->required();
  c_da->add_option("kind", da_kind, "cf or data")->required();
  c_da->add_option("--corpus", da_corpus, "corpus directory (default: corpus)");
  c_da->add_option("--key", da_key, "hex key file (default: built-in)");

  // --- bench -------------------------------------------------------------
  std::string be_corpus = "corpus", be_out;
  auto* c_be = cli.add_subcommand(
      "bench", "measure corpus overhead, print the table, write CSV");
  c_be->add_option("--corpus", be_corpus, "corpus directory (default: corpus)");
  c_be->add_option("-o,--output", be_out, "CSV output file")->required();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    cli.exit(e);
    return kExitUsage;
  }

  try {
    if (*c_asm) {
      dialed::Program p = dialed::parse_assembly(slurp(asm_in));
      spew(asm_out, dialed::render_program(p));
      return 0;
    }
    if (*c_ins) {
      dialed::MemoryLayout layout = dialed::parse_layout(slurp(ins_layout));
      dialed::InstrumentMode mode = ins_mode == "cfa"
                                        ? dialed::InstrumentMode::Cfa
                                        : dialed::InstrumentMode::Dfa;
      spew(ins_out, dialed::instrument_text(slurp(ins_in), mode, layout).text);
      return 0;
    }
    if (*c_run) {
      RunInputs in = load_run_inputs(run_prog, run_layout, run_trace);
      dialed::RunResult r = run_device(in, run_args, run_steps);
      print_run(r);
      return r.reason == dialed::HaltReason::Completed ? 0 : 1;
    }
    if (*c_at) {
      RunInputs in = load_run_inputs(at_prog, at_layout, at_trace);
      dialed::AttestKey key = load_key(at_key);
      dialed::Challenge challenge = at_challenge.empty()
                                        ? random_challenge()
                                        : dialed::parse_challenge_hex(at_challenge);
      dialed::RunResult r = run_device(in, at_args, at_steps);
      auto bytes = dialed::serialize_report(
          dialed::attest(r, in.layout, key, challenge));
      spew(at_out, std::string(bytes.begin(), bytes.end()));
      std::cout << "challenge " << to_hex(challenge.data(), challenge.size())
                << "\n"
                << "report " << at_out << " (" << bytes.size() << " bytes)\n";
      return 0;
    }
    if (*c_vf) {
      std::vector<uint8_t> report = slurp_bytes(vf_report);
      dialed::Program prog = dialed::parse_assembly(slurp(vf_prog));
      dialed::MemoryLayout layout = dialed::parse_layout(slurp(vf_layout));
      dialed::AttestKey key = load_key(vf_key);
      dialed::Challenge challenge = dialed::parse_challenge_hex(vf_challenge);
      if (!vf_nonces.empty() && !consume_challenge(vf_nonces, challenge)) {
        dialed::VerifyResult stale;
        stale.verdict = dialed::VerifyVerdict::TokenInvalid;
        stale.detail = "challenge was already used";
        print_verdict(stale);
        return dialed::verdict_exit_code(stale.verdict);
      }
      dialed::VerifyResult vr =
          dialed::verify_report(report, prog, layout, key, challenge);
      print_verdict(vr);
      return dialed::verdict_exit_code(vr.verdict);
    }
    if (*c_da) return cmd_demo_attack(da_corpus, da_app, da_kind, da_key);
    if (*c_be) {
      std::vector<dialed::OverheadRow> rows;
      for (const auto& name : dialed::corpus_app_names())
        rows.push_back(dialed::measure(dialed::load_app(be_corpus, name)));
      spew(be_out, dialed::to_csv(rows));
      std::cout << dialed::to_table(rows);
      return 0;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const dialed::CorpusError& e) {
    if (e.kind == dialed::CorpusErrorKind::BadAsset) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitIo;
    }
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;  // unreachable: a subcommand is required
}
