#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mcac/config.hpp"

namespace mcac {

// Trains the configured AC or DQN agent on `spec.pattern` for `spec.slots`
// slots and writes one CSV row per slot. Resumes from `load_checkpoint`
// and saves to `checkpoint` when those are set.
harness::MetricSeries run_training(const RunConfig& config, std::ostream& log);

// Runs the configured scenario, writes its CSV into `out_dir` and returns
// the paths written. Progress and summaries go to `status`.
std::vector<std::string> run_scenario(const RunConfig& config, std::ostream& status);

}  // namespace mcac
