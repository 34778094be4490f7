#include "dialed/metrics.hpp"

#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "dialed/encode.hpp"
#include "dialed/instrument.hpp"

namespace dialed {

namespace {

struct LogSplit {
  uint64_t cf = 0;
  uint64_t ilog = 0;
  uint64_t total = 0;
};

// Runs an instrumented variant and attributes every log write to its record
// kind via the executing instruction's template tag.
LogSplit logged_run(const std::string& app, const Program& p,
                    const MemoryLayout& l, const PeripheralTrace& t,
                    uint64_t& cycles_out) {
  DeviceRun dev(p, l, t);
  LogSplit s;
  while (!dev.finished()) {
    TemplateKind tk =
        p.instructions[static_cast<size_t>(dev.machine().pc_index)].ttag;
    dev.step();
    for (const MemAccess& a : dev.last_accesses()) {
      if (!a.is_write || !l.in_or(a.addr)) continue;
      uint64_t b = a.width == Width::Word ? 2 : 1;
      switch (tk) {
        case TemplateKind::CfJmp:
        case TemplateKind::CfBranch:
        case TemplateKind::CfCall:
        case TemplateKind::CfRet:
          s.cf += b;
          break;
        case TemplateKind::EntryLog:
        case TemplateKind::ReadLog:
        case TemplateKind::ReadLogIdx:
        case TemplateKind::ReadLogSpIdx:
          s.ilog += b;
          break;
        default:
          break;
      }
    }
  }
  RunResult r = dev.result();
  if (r.reason != HaltReason::Completed)
    throw std::runtime_error(app + ": measurement run did not complete (" +
                             halt_reason_name(r.reason) + ")");
  cycles_out = r.cycles;
  s.total = static_cast<uint64_t>(l.or_max) - r.r4_final;
  return s;
}

double pct(uint64_t base, uint64_t variant) {
  return 100.0 * (static_cast<double>(variant) - static_cast<double>(base)) /
         static_cast<double>(base);
}

std::string pct_str(uint64_t base, uint64_t variant) {
  std::ostringstream out;
  out << std::showpos << std::fixed << std::setprecision(1)
      << pct(base, variant) << '%';
  return out.str();
}

}  // namespace

OverheadRow measure(const std::string& name, const Program& source,
                    const MemoryLayout& layout, const PeripheralTrace& trace) {
  OverheadRow row;
  row.app = name;
  Program cfa = instrument(source, InstrumentMode::Cfa, layout).program;
  Program dfa = instrument(source, InstrumentMode::Dfa, layout).program;
  row.code_bytes.baseline = encode(source, layout.er_min).size_bytes();
  row.code_bytes.cfa = encode(cfa, layout.er_min).size_bytes();
  row.code_bytes.dfa = encode(dfa, layout.er_min).size_bytes();

  RunResult base = run_operation(source, layout, trace);
  if (base.reason != HaltReason::Completed)
    throw std::runtime_error(name + ": measurement run did not complete (" +
                             halt_reason_name(base.reason) + ")");
  row.cycles.baseline = base.cycles;

  LogSplit sc = logged_run(name, cfa, layout, trace, row.cycles.cfa);
  LogSplit sd = logged_run(name, dfa, layout, trace, row.cycles.dfa);
  row.log_bytes.cflog_only = sc.total;
  row.log_bytes.cflog_plus_ilog = sd.total;
  row.dfa_cflog_bytes = sd.cf;
  row.dfa_ilog_bytes = sd.ilog;
  return row;
}

OverheadRow measure(const CorpusApp& app) {
  return measure(app.name, app.source, app.layout, app.benign);
}

std::string to_csv(const std::vector<OverheadRow>& rows) {
  std::ostringstream out;
  out << "app,variant,code_bytes,cycles,cflog_bytes,ilog_bytes\n";
  for (const OverheadRow& r : rows) {
    out << r.app << ",baseline," << r.code_bytes.baseline << ','
        << r.cycles.baseline << ",0,0\n";
    out << r.app << ",cfa," << r.code_bytes.cfa << ',' << r.cycles.cfa << ','
        << r.log_bytes.cflog_only << ",0\n";
    out << r.app << ",dfa," << r.code_bytes.dfa << ',' << r.cycles.dfa << ','
        << r.dfa_cflog_bytes << ',' << r.dfa_ilog_bytes << "\n";
  }
  return out.str();
}

std::string to_table(const std::vector<OverheadRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(18) << "app" << std::setw(10) << "variant"
      << std::right << std::setw(11) << "code_bytes" << std::setw(9)
      << "cycles" << std::setw(12) << "cflog_bytes" << std::setw(11)
      << "ilog_bytes" << "  overhead (code, cycles)\n";
  for (const OverheadRow& r : rows) {
    auto line = [&](const char* variant, uint64_t code, uint64_t cycles,
                    uint64_t cflog, uint64_t ilog, const std::string& note) {
      out << std::left << std::setw(18) << (variant == std::string("baseline")
                                                ? r.app
                                                : std::string())
          << std::setw(10) << variant << std::right << std::setw(11) << code
          << std::setw(9) << cycles << std::setw(12) << cflog << std::setw(11)
          << ilog;
      if (!note.empty()) out << "  " << note;
      out << '\n';
    };
    line("baseline", r.code_bytes.baseline, r.cycles.baseline, 0, 0, "");
    line("cfa", r.code_bytes.cfa, r.cycles.cfa, r.log_bytes.cflog_only, 0,
         pct_str(r.code_bytes.baseline, r.code_bytes.cfa) + ", " +
             pct_str(r.cycles.baseline, r.cycles.cfa));
    line("dfa", r.code_bytes.dfa, r.cycles.dfa, r.dfa_cflog_bytes,
         r.dfa_ilog_bytes,
         pct_str(r.code_bytes.baseline, r.code_bytes.dfa) + ", " +
             pct_str(r.cycles.baseline, r.cycles.dfa));
    out << "  dfa over cfa: code "
        << pct_str(r.code_bytes.cfa, r.code_bytes.dfa) << ", cycles "
        << pct_str(r.cycles.cfa, r.cycles.dfa)
        << " (reference band: 1%-20%)\n";
  }
  return out.str();
}

}  // namespace dialed
