#pragma once

// Batch runners. Independent runs share nothing, so a batch parallelizes
// across seeds; the serial path is the reference the parallel one must match.

#include "cpsim/simulation.hpp"

namespace cpsim {

enum class Execution { serial, openmp };

/// One run per seed, results in seed order.
std::vector<RunMetrics> run_batch(const ScenarioConfig& base, std::span<const std::uint64_t> seeds,
                                  Execution exec = Execution::openmp);

/// Number of OpenMP threads a batch would use (1 without OpenMP).
int batch_threads();

struct SweepRow {
    double threshold = 0.0;
    double d4_detection_rate = 0.0;
    double mean_cbr = 0.0;
    std::size_t runs = 0;
};

/// Redundancy mitigation enabled at each CBR threshold; rows ordered by
/// threshold. The base needs a D4-detectable attack and at least three stations.
std::vector<SweepRow> sweep_redundancy_tension(const ScenarioConfig& base, std::vector<double> thresholds,
                                               std::span<const std::uint64_t> seeds,
                                               Execution exec = Execution::openmp);

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count);

}  // namespace cpsim
