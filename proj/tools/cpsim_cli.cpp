// cpsim: run scenarios, sweep the redundancy trade-off, list attacks, render
// the risk catalog and replay traces. Exit code 2 on configuration errors.

#include <CLI11.hpp>
#include <iomanip>
#include <iostream>

#include "cpsim/parallel.hpp"
#include "cpsim/risk.hpp"

using namespace cpsim;

namespace {

int run_cmd(const std::string& path, std::optional<std::uint64_t> seed, const std::string& trace, bool json_out) {
    ScenarioConfig cfg = load_scenario(path);
    if (seed) cfg = with_seed(cfg, *seed);
    RunOptions opts;
    opts.trace_path = trace;
    const RunMetrics m = run_scenario(cfg, opts);
    if (!json_out) {
        std::cout << render_metrics(m);
        return 0;
    }
    nlohmann::json j;
    j["scenario"] = m.scenario;
    j["seed"] = m.seed;
    j["mean_cbr"] = m.mean_cbr;
    j["mbr_total"] = m.mbr_total;
    j["false_positive_mbrs"] = m.false_positive_mbrs;
    for (const auto& [d, c] : m.mbr_counts) j["mbr_counts"][std::string(to_string(d))] = c;
    j["attacks"] = nlohmann::json::array();
    for (const auto& a : m.attacks) {
        nlohmann::json o = {{"id", to_string(a.id)}, {"detected", a.detected}};
        o["detector"] = a.detector ? nlohmann::json(to_string(*a.detector)) : nlohmann::json(nullptr);
        o["time_to_detection_ms"] = a.time_to_detection ? nlohmann::json(*a.time_to_detection) : nlohmann::json(nullptr);
        j["attacks"].push_back(o);
    }
    j["eebl"] = nlohmann::json::array();
    for (const auto& c : m.eebl) j["eebl"].push_back({{"t", c.time}, {"station", c.station}, {"state", to_string(c.state)}});
    j["trace_hash"] = m.trace_hash;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int sweep_cmd(const std::string& path, const std::vector<double>& thresholds, std::size_t seeds, std::uint64_t first,
              bool serial) {
    const ScenarioConfig cfg = load_scenario(path);
    const auto s = seed_range(first, seeds);
    const auto rows = sweep_redundancy_tension(cfg, thresholds, s, serial ? Execution::serial : Execution::openmp);
    std::cout << "threshold  d4_detection_rate  mean_cbr  runs\n";
    for (const auto& r : rows)
        std::cout << std::fixed << std::setprecision(3) << std::setw(9) << r.threshold << "  " << std::setw(17)
                  << r.d4_detection_rate << "  " << std::setw(8) << r.mean_cbr << "  " << r.runs << "\n";
    return 0;
}

int attacks_cmd() {
    std::cout << std::left << std::setw(11) << "id" << std::setw(7) << "row" << std::setw(13) << "point"
              << std::setw(9) << "detector" << "summary\n";
    for (const auto& a : attack_catalog())
        std::cout << std::setw(11) << to_string(a.id) << std::setw(7) << a.row << std::setw(13) << to_string(a.point)
                  << std::setw(9) << (a.detector ? to_string(*a.detector) : "-") << a.summary << "\n";
    std::cout << attack_catalog().size() << " attacks\n";
    return 0;
}

int risk_cmd(const std::string& path) {
    const Catalog c = load_catalog(path);
    CatalogReport report = evaluate_catalog(c.rows);
    report.claimed = c.claimed;
    std::cout << render_report(report);
    return 0;
}

int replay_cmd(const std::string& path) {
    const ReplayResult r = replay(path);
    std::cout << render_metrics(r.metrics);
    std::cout << "recorded hash " << r.recorded_hash << "\n" << (r.matches ? "replay matches" : "replay DIFFERS") << "\n";
    return r.matches ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collective perception misbehavior simulator"};
    app.require_subcommand(1);

    std::string scenario, trace, catalog, trace_in;
    std::optional<std::uint64_t> seed;
    bool json_out = false;
    auto* run = app.add_subcommand("run", "Run one scenario");
    run->add_option("scenario", scenario, "Scenario file")->required();
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--trace", trace, "Write the JSONL trace here");
    run->add_flag("--json", json_out, "Print metrics as JSON");

    std::vector<double> thresholds{0.0, 0.25, 0.5, 0.75, 1.0};
    std::size_t seeds = 20;
    std::uint64_t first_seed = 1;
    bool serial = false;
    auto* sweep = app.add_subcommand("sweep", "Redundancy mitigation threshold sweep");
    sweep->add_option("scenario", scenario, "Base scenario with a D4-detectable attack")->required();
    sweep->add_option("--thresholds", thresholds, "CBR thresholds")->delimiter(',');
    sweep->add_option("--seeds", seeds, "Runs per threshold");
    sweep->add_option("--first-seed", first_seed, "First seed");
    sweep->add_flag("--serial", serial, "Use the serial batch runner");

    auto* attacks = app.add_subcommand("attacks", "List the attack catalog");
    auto* risk = app.add_subcommand("risk", "Render the risk catalog report");
    risk->add_option("catalog", catalog, "Catalog file")->required();
    auto* rep = app.add_subcommand("replay", "Re-run a trace and compare hashes");
    rep->add_option("trace", trace_in, "Trace file")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return run_cmd(scenario, seed, trace, json_out);
        if (*sweep) return sweep_cmd(scenario, thresholds, seeds, first_seed, serial);
        if (*attacks) return attacks_cmd();
        if (*risk) return risk_cmd(catalog);
        if (*rep) return replay_cmd(trace_in);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CatalogError& e) {
        std::cerr << "catalog error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
