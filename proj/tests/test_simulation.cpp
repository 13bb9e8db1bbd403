#include <doctest.h>

#include "support.hpp"

using namespace cpsim;

namespace {

ScenarioConfig scenario(const std::string& rel, const nlohmann::json& patch = nlohmann::json::object()) {
    const ScenarioConfig cfg = load_scenario(test::source_path(rel));
    return patch.empty() ? cfg : patched(cfg, patch);
}

Bytes from_hex(const std::string& s) {
    Bytes out;
    for (std::size_t i = 0; i + 1 < s.size(); i += 2)
        out.push_back(static_cast<std::uint8_t>(std::stoi(s.substr(i, 2), nullptr, 16)));
    return out;
}

std::vector<nlohmann::json> records(const std::vector<std::string>& lines, const std::string& type) {
    std::vector<nlohmann::json> out;
    for (const auto& l : lines) {
        auto j = nlohmann::json::parse(l);
        if (j.value("type", "") == type) out.push_back(std::move(j));
    }
    return out;
}

RunOptions kept() {
    RunOptions o;
    o.keep_trace = true;
    return o;
}

}  // namespace

TEST_CASE("identical configuration and seed give identical traces") {
    const ScenarioConfig cfg = scenario("scenarios/attacks/t3_l.json");
    const RunMetrics a = run_scenario(cfg);
    const RunMetrics b = run_scenario(cfg);
    CHECK(a.trace_hash == b.trace_hash);
    CHECK(a.mbr_total == b.mbr_total);
    CHECK(run_scenario(with_seed(cfg, cfg.seed + 1)).trace_hash != a.trace_hash);
}

TEST_CASE("short clean run stays quiet") {
    const RunMetrics m = run_scenario(scenario("scenarios/clean_highway.json", {{"duration_ms", 10000}}));
    CHECK(m.mbr_total == 0);
    CHECK(m.verdicts.empty());
    CHECK(m.eebl.empty());
    CHECK(m.envelopes_sent > 0);
    CHECK(m.mean_cbr > 0.0);
    CHECK(m.mean_cbr < 1.0);
}

TEST_CASE("messages are delivered one tick after generation") {
    const ScenarioConfig cfg = scenario("scenarios/attacks/t3_i.json");
    const RunMetrics m = run_scenario(cfg);
    REQUIRE(m.attacks.size() == 1);
    CHECK(m.attacks[0].detected);
    CHECK(m.attacks[0].time_to_detection == cfg.tick_ms);
    REQUIRE_FALSE(m.verdicts.empty());
    CHECK(m.verdicts.front().time == cfg.attacks[0].start + cfg.tick_ms);
}

TEST_CASE("lossless channel delivers everything sent before the last tick") {
    const ScenarioConfig cfg = scenario("scenarios/clean_highway.json", {{"duration_ms", 3000}});
    Simulation sim(cfg, kept());
    while (!sim.done()) sim.tick();
    const RunMetrics m = sim.finish();
    std::size_t receivers = sim.nodes().size() - 1;
    std::size_t deliverable = 0;
    for (const auto& tx : records(sim.trace_lines(), "tx"))
        if (tx["t"].get<TimeMs>() < cfg.duration_ms - cfg.tick_ms) ++deliverable;
    CHECK(m.envelopes_accepted == deliverable * receivers);

    const RunMetrics lost = run_scenario(patched(cfg, {{"channel", {{"loss_rate", 1.0}}}}));
    CHECK(lost.envelopes_accepted == 0);
    CHECK(lost.envelopes_sent == m.envelopes_sent);
}

TEST_CASE("every report in the trace carries verifiable evidence") {
    const ScenarioConfig cfg = scenario("scenarios/attacks/t4_b.json");
    Simulation sim(cfg, kept());
    while (!sim.done()) sim.tick();
    const RunMetrics m = sim.finish();
    REQUIRE(m.mbr_total > 0);

    std::set<std::string> sent;
    for (const auto& tx : records(sim.trace_lines(), "tx")) sent.insert(tx["digest"].get<std::string>());
    const auto mbrs = records(sim.trace_lines(), "mbr");
    CHECK(mbrs.size() == m.mbr_total);
    for (const auto& r : mbrs) {
        REQUIRE_FALSE(r["evidence"].empty());
        for (const auto& e : r["evidence"]) {
            SignedEnvelope env;
            env.payload = from_hex(e["payload"].get<std::string>());
            env.cert_id = e["cert"].get<CertId>();
            const Bytes tag = from_hex(e["tag"].get<std::string>());
            REQUIRE(tag.size() == kTagSize);
            std::copy(tag.begin(), tag.end(), env.signature_tag.begin());
            const TimeMs t = message_time(decode(env.payload));
            CHECK(verify(env, sim.registry(), t) == VerifyStatus::accept);
            CHECK(sent.contains(e["digest"].get<std::string>()));
        }
    }
}

TEST_CASE("trace replays to the recorded hash") {
    const std::string path = "replay_test_trace.jsonl";
    RunOptions o;
    o.trace_path = path;
    const RunMetrics m = run_scenario(scenario("scenarios/attacks/t3_a.json"), o);
    const ReplayResult r = replay(path);
    CHECK(r.matches);
    CHECK(r.recorded_hash == m.trace_hash);
    CHECK(r.metrics.trace_hash == m.trace_hash);
    std::remove(path.c_str());
}

TEST_CASE("footer counts and hashes the preceding lines") {
    Simulation sim(scenario("scenarios/clean_highway.json", {{"duration_ms", 1000}}), kept());
    while (!sim.done()) sim.tick();
    const RunMetrics m = sim.finish();
    const auto& lines = sim.trace_lines();
    const auto footer = nlohmann::json::parse(lines.back());
    CHECK(footer["type"] == "footer");
    CHECK(footer["lines"].get<std::size_t>() == lines.size() - 1);
    CHECK(footer["hash"] == m.trace_hash);
    CHECK(nlohmann::json::parse(lines.front())["type"] == "header");
}
