#pragma once

// Tick pipeline. Per tick, in this order:
//   world attacks -> sense (per station, parallel) -> sensor tampering ->
//   LDM update -> CAM/CPM generation -> outgoing tampering -> sign ->
//   delivery of the previous tick's envelopes (loss, verify, fuse) ->
//   detectors -> reports -> EEBL -> trace -> world step.
// A message generated at tick t is delivered at tick t + 1.

#include <fstream>
#include <memory>
#include <set>

#include "cpsim/scenario.hpp"

namespace cpsim {

struct VerdictRecord {
    TimeMs time = 0;
    StationId receiver = 0;
    DetectorId detector = DetectorId::D1;
    CertId suspect = 0;
    StationId suspect_station = 0;
    std::optional<CertId> co_suspect;
    VerdictNote note = VerdictNote::attacker_suspected;
    double severity = 0.0;
};

struct MbrRecord {
    TimeMs time = 0;
    StationId reporter = 0;
    CertId suspect = 0;
    DetectorId detector = DetectorId::D1;
    std::size_t evidence = 0;
};

struct EeblChange {
    TimeMs time = 0;
    StationId station = 0;
    EeblState state = EeblState::normal;
    friend bool operator==(const EeblChange&, const EeblChange&) = default;
};

struct AttackOutcome {
    AttackId id = AttackId::T3_A;
    std::optional<DetectorId> detector;  // mapped defense
    CertId target_cert = 0;               // certificate whose messages carry the attack
    bool detected = false;
    std::optional<TimeMs> time_to_detection;
    std::size_t victim_possible = 0;     // verdicts against target_cert, by note
    std::size_t attacker_suspected = 0;
};

struct RunMetrics {
    std::string scenario;
    std::uint64_t seed = 0;
    TimeMs duration = 0;
    std::vector<AttackOutcome> attacks;
    std::map<DetectorId, std::size_t> mbr_counts;
    std::size_t mbr_total = 0;
    std::size_t false_positive_mbrs = 0;  // reports whose suspect is not tied to any attack
    double mean_cbr = 0.0;
    std::vector<EeblChange> eebl;
    std::vector<VerdictRecord> verdicts;
    std::vector<MbrRecord> mbrs;
    std::size_t person_group_activations = 0;
    std::size_t envelopes_sent = 0;
    std::size_t envelopes_accepted = 0;
    std::map<VerifyStatus, std::size_t> rejected;
    std::size_t encode_failures = 0;
    std::vector<std::string> annotations;
    std::string trace_hash;

    /// True when `station` was in `state` at any instant of [from, to).
    bool eebl_in_state(StationId station, EeblState state, TimeMs from, TimeMs to) const;
    std::size_t verdicts_against(CertId cert, std::optional<VerdictNote> note = std::nullopt) const;
};

struct RunOptions {
    bool parallel = true;         // OpenMP sensing across stations
    std::string trace_path;       // empty: hash only
    bool keep_trace = false;      // retain trace lines in memory
};

/// Certificate id assigned to a certified station.
inline CertId cert_of(StationId s) { return static_cast<CertId>(s) * 1000 + 1; }

struct StationNode {
    StationConfig config;
    EntityId entity = 0;
    CertId cert = 0;  // 0: emits unsigned envelopes
    bool attacker = false;
    std::vector<SensorSpec> sensors;
    LocalDynamicMap ldm;
    CpsGenerationState generation;
    ForeignObjectLog foreign;
    std::optional<DetectorSuite> detectors;
    MbrAggregator aggregator;
    std::set<CertId> distrusted;
    std::vector<DenmRecord> denms;
    EeblState eebl = EeblState::normal;

    // Per-tick scratch.
    std::vector<SensorReading> readings;
    std::vector<SensorFreeSpace> free_space;
    StationSelf self;
};

class TraceWriter {
public:
    TraceWriter(const std::string& path, bool keep);
    void write(const nlohmann::json& record);
    /// Appends the footer and returns the hex digest of all preceding lines.
    std::string finish();
    const std::vector<std::string>& lines() const { return lines_; }

private:
    std::ofstream file_;
    bool keep_;
    Sha256Stream hash_;
    std::size_t count_ = 0;
    std::vector<std::string> lines_;
};

class Simulation {
public:
    explicit Simulation(const ScenarioConfig& cfg, RunOptions opts = {});

    bool done() const { return world_.time >= cfg_.duration_ms; }
    void tick();
    RunMetrics finish();

    const WorldState& world() const { return world_; }
    const KeyRegistry& registry() const { return registry_; }
    const StationNode* node(StationId id) const;
    const std::vector<StationNode>& nodes() const { return nodes_; }
    const std::vector<std::string>& trace_lines() const { return trace_.lines(); }

private:
    struct Wire {
        std::shared_ptr<const SignedEnvelope> envelope;
        std::shared_ptr<const Message> message;  // null when undecodable
        StationId sender = 0;
    };

    void sense_all();
    void prepare_self(StationNode& n);
    std::vector<Wire> generate(StationNode& n, double cbr);
    void deliver(StationNode& n, const std::vector<Wire>& wire, double cbr);
    void record_verdicts(StationNode& n, std::vector<DetectorVerdict> verdicts);
    CertId signing_cert(StationId header_station) const;

    ScenarioConfig cfg_;
    RunOptions opts_;
    WorldState world_;
    KeyRegistry registry_;
    std::vector<StationNode> nodes_;
    std::map<StationId, CertId> certs_;
    std::vector<AttackState> attack_state_;
    CbrWindow cbr_;
    std::mt19937_64 channel_rng_;
    std::mt19937_64 attack_rng_;
    std::vector<Wire> in_flight_;
    TraceWriter trace_;
    RunMetrics metrics_;
    double cbr_sum_ = 0.0;
    std::size_t ticks_ = 0;
    std::set<CertId> attack_certs_;
};

RunMetrics run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});

struct ReplayResult {
    RunMetrics metrics;
    std::string recorded_hash;
    bool matches = false;
};

/// Re-runs the configuration embedded in a trace header and compares hashes.
ReplayResult replay(const std::string& trace_path);

/// Multi-line human-readable summary.
std::string render_metrics(const RunMetrics& m);

}  // namespace cpsim
