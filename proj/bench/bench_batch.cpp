// Serial reference vs OpenMP: a batch of seeded runs and per-tick station
// sensing. Both paths must produce identical trace hashes.

#include <chrono>
#include <cstdio>
#include <string>

#include "cpsim/parallel.hpp"

using namespace cpsim;

namespace {

template <typename F>
double seconds(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1 && (std::string(argv[1]) == "-h" || std::string(argv[1]) == "--help")) {
        std::printf("usage: cpsim_bench [scenario.json] [runs]\n");
        return 0;
    }
    const std::string path = argc > 1 ? argv[1] : CPSIM_SOURCE_DIR "/scenarios/clean_highway.json";
    const std::size_t n = argc > 2 ? std::stoul(argv[2]) : 8;
    const ScenarioConfig cfg = load_scenario(path);
    const auto seeds = seed_range(1, n);

    std::vector<RunMetrics> serial, omp;
    const double ts = seconds([&] { serial = run_batch(cfg, seeds, Execution::serial); });
    const double tp = seconds([&] { omp = run_batch(cfg, seeds, Execution::openmp); });
    bool same = serial.size() == omp.size();
    for (std::size_t i = 0; same && i < serial.size(); ++i) same = serial[i].trace_hash == omp[i].trace_hash;
    std::printf("batch of %zu runs (%s): serial %.3f s, openmp %.3f s on %d threads, speedup %.2f, hashes %s\n", n,
                cfg.name.c_str(), ts, tp, batch_threads(), ts / tp, same ? "equal" : "DIFFER");

    RunOptions a, b;
    a.parallel = false;
    b.parallel = true;
    RunMetrics ma, mb;
    const double ta = seconds([&] { ma = run_scenario(cfg, a); });
    const double tb = seconds([&] { mb = run_scenario(cfg, b); });
    const bool same_run = ma.trace_hash == mb.trace_hash;
    std::printf("single run sensing: serial %.3f s, openmp %.3f s, hashes %s\n", ta, tb, same_run ? "equal" : "DIFFER");
    return same && same_run ? 0 : 1;
}
