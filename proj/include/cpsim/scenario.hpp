#pragma once

// Scenario configuration: strict JSON schema (unknown keys are errors),
// validated in full before the first tick.

#include <json.hpp>
#include <stdexcept>
#include <string>

#include "cpsim/attacks.hpp"
#include "cpsim/detectors.hpp"

namespace cpsim {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct ChannelConfig {
    double capacity_bytes_per_window = 400000.0;
    TimeMs window_ms = 1000;
    double loss_rate = 0.0;
};

struct StationConfig {
    StationId id = 0;
    StationType type = StationType::vehicle;
    bool certified = true;
    bool send_cam = true;
    CpsParams cps;
};

struct EntityConfig {
    Entity entity;
    std::vector<SensorSpec> sensors;
    std::optional<StationConfig> station;
    bool jitter = true;
};

struct JitterConfig {
    double position = 0.0;  // +/- m along the initial heading
    double speed = 0.0;     // +/- m/s
};

struct DetectorConfig {
    std::vector<DetectorId> enabled;
    DetectorParams params;
};

struct ScenarioConfig {
    std::string name;
    TimeMs duration_ms = 60000;
    TimeMs tick_ms = 100;
    std::uint64_t seed = 1;
    NoiseModel noise;
    ChannelConfig channel;
    CpsParams station_defaults;
    JitterConfig jitter;
    std::vector<EntityConfig> entities;
    std::vector<AttackSpec> attacks;
    DetectorConfig detectors;
    RedundancyParams redundancy;
    bool attestation = false;
    EeblParams eebl;
    bool record_payloads = false;

    nlohmann::json source;  // the document this config was parsed from
};

ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::string& path);

/// Re-parses `base.source` after applying a JSON merge patch.
ScenarioConfig patched(const ScenarioConfig& base, const nlohmann::json& patch);
ScenarioConfig with_seed(const ScenarioConfig& base, std::uint64_t seed);

/// Builds the initial ground truth for the configured seed (jitter applied,
/// attack decoys registered). Deterministic.
WorldState build_world(const ScenarioConfig& cfg);

}  // namespace cpsim
