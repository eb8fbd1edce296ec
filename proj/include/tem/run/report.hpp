#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tem::run {

// One run's metrics series, keyed by the algo/seed of its config echo.
struct RunSeries {
  std::string algo;
  std::uint64_t seed = 0;
  std::string path;  // metrics.csv location
  std::vector<double> env_steps;
  std::vector<double> reward;
  std::vector<double> comm_rate;
  std::vector<double> captures;
  std::vector<double> collisions;
  std::vector<double> occupied;
};

// Finds metrics.csv in `dir` and its immediate subdirectories. Throws when
// nothing is found or a file is malformed (naming the file).
std::vector<RunSeries> scan_runs(const std::string& dir);

// Emits reward_curve.svg, comm_rate_curve.svg and summary.txt into `dir`:
// per-algo mean curves with min-max bands across seeds, plus a final-row
// summary table per algo.
void write_report(const std::string& dir);

}  // namespace tem::run
