#ifndef BINMR_BENCHMARK_HPP
#define BINMR_BENCHMARK_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "binmr/baselines.hpp"
#include "binmr/simulation.hpp"

namespace binmr {

/// One row of a scenario table: N, p, s, b and optionally test_n.
struct Scenario {
  SimConfig config;
};

/// Tab-delimited with a header naming at least N, p, s and b; `test_n` is optional.
std::vector<Scenario> read_scenarios(std::istream& in, const std::string& source = "scenarios");

struct ReplicateMetrics {
  std::size_t scenario = 0;
  Method method = Method::ibmr_int;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  double kl = 0.0;
  double hellinger = 0.0;
  double error_rate = 0.0;
  double lambda = 0.0;
  double rho = 0.0;
  std::size_t active_rows = 0;
  bool failed = false;
  std::string error;
};

/// Test-set metrics of a fitted model against the simulation truth (batch terms dropped).
ReplicateMetrics evaluate_on_test(const Coefficients& coeffs, const SimData& data);

struct BenchmarkOptions {
  std::vector<Method> methods;
  std::size_t replicates = 10;
  std::uint64_t first_seed = 1;  ///< replicate r uses seed first_seed + r
  MethodFitOptions fit;
  std::ostream* log = nullptr;   ///< per-replicate progress and failures
};

/// Fits every method on every replicate of every scenario. A failed fit is recorded with
/// `failed = true` and left out of the summary.
std::vector<ReplicateMetrics> run_benchmark(const std::vector<Scenario>& scenarios, const BenchmarkOptions& options);

/// Long format: scenario columns, method, replicate, seed, metrics, status.
void write_replicates(std::ostream& out, const std::vector<Scenario>& scenarios,
                      const std::vector<ReplicateMetrics>& rows);

/// Mean and standard error of each metric per scenario and method, plus the failure count.
void write_summary(std::ostream& out, const std::vector<Scenario>& scenarios, const std::vector<ReplicateMetrics>& rows);

}  // namespace binmr

#endif  // BINMR_BENCHMARK_HPP
