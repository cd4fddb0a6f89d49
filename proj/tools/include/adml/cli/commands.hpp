#pragma once

#include <iosfwd>
#include <vector>

#include "adml/cli/config.hpp"

namespace adml::cli {

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kUsageError = 2 };

struct CellResult {
  sim::DgpSpec spec;
  std::size_t n = 0;
  sim::ReplicationResult result;
};

// Replication pool size: ADML_THREADS when set, else the hardware count.
unsigned thread_budget();

// Every grid cell of the experiment, in gamma, outcome form, n order.
std::vector<CellResult> run_experiment(const ExperimentConfig& config, unsigned threads);

void write_results(std::ostream& out, const std::vector<CellResult>& cells);
void write_replications(std::ostream& out, const ExperimentConfig& config,
                        const std::vector<CellResult>& cells);

// Entry point behind the adml binary: subcommands simulate, estimate, oracle,
// dgp-sample and config.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace adml::cli
