#include "cpsim/parallel.hpp"

#include <algorithm>
#include <exception>

#ifdef CPSIM_HAVE_OPENMP
#include <omp.h>
#endif

namespace cpsim {

int batch_threads() {
#ifdef CPSIM_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
    std::vector<std::uint64_t> s(count);
    for (std::size_t i = 0; i < count; ++i) s[i] = first + i;
    return s;
}

std::vector<RunMetrics> run_batch(const ScenarioConfig& base, std::span<const std::uint64_t> seeds, Execution exec) {
    std::vector<RunMetrics> out(seeds.size());
    RunOptions opts;
    opts.parallel = false;  // parallelism lives at the batch level
    if (exec == Execution::serial) {
        for (std::size_t i = 0; i < seeds.size(); ++i) out[i] = run_scenario(with_seed(base, seeds[i]), opts);
        return out;
    }
    const auto n = static_cast<long>(seeds.size());
    std::exception_ptr failure;
#ifdef CPSIM_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = run_scenario(with_seed(base, seeds[static_cast<std::size_t>(i)]), opts);
        } catch (...) {
#ifdef CPSIM_HAVE_OPENMP
#pragma omp critical
#endif
            failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

std::vector<SweepRow> sweep_redundancy_tension(const ScenarioConfig& base, std::vector<double> thresholds,
                                               std::span<const std::uint64_t> seeds, Execution exec) {
    const bool has_d4 = std::any_of(base.attacks.begin(), base.attacks.end(), [](const AttackSpec& a) {
        return attack_info(a.id).detector == DetectorId::D4;
    });
    if (!has_d4) throw ConfigError("$.attacks", "sweep needs an attack mapped to D4");
    const auto stations = std::count_if(base.entities.begin(), base.entities.end(),
                                        [](const EntityConfig& e) { return e.station.has_value(); });
    if (stations < 3) throw ConfigError("$.entities", "sweep needs at least three stations");
    if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");

    std::sort(thresholds.begin(), thresholds.end());
    std::vector<SweepRow> rows;
    for (double th : thresholds) {
        const ScenarioConfig cfg = patched(base, {{"redundancy", {{"enabled", true}, {"cbr_threshold", th}}}});
        const auto runs = run_batch(cfg, seeds, exec);
        SweepRow row;
        row.threshold = th;
        row.runs = runs.size();
        std::size_t detected = 0;
        for (const auto& m : runs) {
            row.mean_cbr += m.mean_cbr;
            detected += std::any_of(m.attacks.begin(), m.attacks.end(), [](const AttackOutcome& o) {
                return o.detector == DetectorId::D4 && o.detected;
            });
        }
        row.mean_cbr /= static_cast<double>(runs.size());
        row.d4_detection_rate = static_cast<double>(detected) / static_cast<double>(runs.size());
        rows.push_back(row);
    }
    return rows;
}

}  // namespace cpsim
