#pragma once
// Overhead measurement: code size, runtime cycles, and log size for the
// three build variants of an application (baseline, control-flow-only
// instrumentation, full data-flow instrumentation), all measured on one
// canonical benign trace so the numbers are reproducible.

#include <cstdint>
#include <string>
#include <vector>

#include "dialed/corpus.hpp"
#include "dialed/emulator.hpp"
#include "dialed/isa.hpp"
#include "dialed/layout.hpp"

namespace dialed {

struct VariantTriple {
  uint64_t baseline = 0;
  uint64_t cfa = 0;
  uint64_t dfa = 0;
};

struct LogBytes {
  uint64_t cflog_only = 0;       // log bytes of the cfa-instrumented run
  uint64_t cflog_plus_ilog = 0;  // log bytes of the dfa-instrumented run
};

struct OverheadRow {
  std::string app;
  VariantTriple code_bytes;  // encoded image size per variant
  VariantTriple cycles;      // emulator cycles per variant, identical trace
  LogBytes log_bytes;
  // Split of the dfa run's log by record kind: transfer destinations versus
  // data inputs (the launch-context record counts as input bytes).
  uint64_t dfa_cflog_bytes = 0;
  uint64_t dfa_ilog_bytes = 0;
};

// Builds and runs all three variants on the trace. Throws
// std::runtime_error if any variant fails to run to completion.
OverheadRow measure(const std::string& name, const Program& source,
                    const MemoryLayout& layout, const PeripheralTrace& trace);
// Measures a corpus app on its canonical benign trace.
OverheadRow measure(const CorpusApp& app);

// Fixed-column CSV: app,variant,code_bytes,cycles,cflog_bytes,ilog_bytes —
// three variant rows per app, byte-identical across runs.
std::string to_csv(const std::vector<OverheadRow>& rows);

// Human-readable table with overhead percentages relative to baseline and
// the dfa-over-cfa increase (reference band: 1%-20%).
std::string to_table(const std::vector<OverheadRow>& rows);

}  // namespace dialed
