#pragma once

#include <string>
#include <vector>

#include "tide/engine.hpp"

namespace tide {

/// Reads a run directory's iteration log and emits the plot-ready CSVs:
/// error_dynamics.csv (per iteration), error_dynamics_sampled.csv (at the
/// checkpoint cadence), win_rate.csv, criteria_length.csv, token_budget.csv.
/// Everything is recomputed purely from IterationRecords and the ledger.
struct ReportFiles {
    std::string error_dynamics;
    std::string error_dynamics_sampled;
    std::string win_rate;
    std::string criteria_length;
    std::string token_budget;
};

std::vector<IterationRecord> load_iteration_log(const std::string& run_dir);

ReportFiles write_reports(const std::string& run_dir, int sample_every = 30);

}  // namespace tide
