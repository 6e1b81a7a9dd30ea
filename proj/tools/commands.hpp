#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace nsbm::cli {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kNumerical = 3 };

/// Writes the dataset described by `data.*` into paths.out with a manifest.json.
void generate(const RunConfig& cfg);

/// Trains on the dataset in paths.data and writes checkpoint.nsbm, loss.csv
/// and config.cfg into paths.out. `task` is none, align or anomaly. With
/// `resume` (task none only) training continues from that checkpoint.
void train(const RunConfig& cfg, const std::string& task, const std::string& resume = "");

/// Forward pass only. Writes metrics.json (byte-stable for fixed inputs), a
/// plot-ready CSV and timing.csv with per-item wall time.
void evaluate(const RunConfig& cfg, const std::string& task, bool oracle);

/// `which` is sbm (classic fit on a planted graph) or pca (window detector).
void baseline(const RunConfig& cfg, const std::string& which);

/// Full command line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nsbm::cli
