#pragma once

#include <map>
#include <string>
#include <vector>

#include "r2f/config.hpp"

namespace r2f {

/// One experiment run: a kind, its parameter grid, and an optional output
/// path. Unknown kinds or parameter keys are usage errors raised before any
/// computation starts.
struct ExperimentSpec {
  std::string kind;
  std::map<std::string, std::string> params;
  std::string out_path;  // empty: CSV returned only
};

/// The supported experiment kinds, in stable order.
const std::vector<std::string>& experiment_kinds();

/// Runs the grid and returns the CSV text (fixed header per kind, one row
/// per grid point x seed, byte-reproducible for fixed seeds). Writes
/// spec.out_path when nonempty.
std::string run_experiment(const ExperimentSpec& spec, const AppConfig& base);

/// Aggregates an experiment CSV: group columns are those before "seed",
/// metric columns after it; emits one row per group with n and
/// <metric>_mean/<metric>_std columns. Row order is sorted by group key, so
/// the summary is invariant under input row shuffling. Non-numeric metric
/// columns are dropped.
std::string report_csv(const std::string& csv);

}  // namespace r2f
