#include "cpsim/scenario.hpp"

#include <fstream>
#include <random>
#include <set>

namespace cpsim {

namespace {

using nlohmann::json;

// Field reader that records every key it is asked about, so leftovers can be
// reported as unknown.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    const std::string& path() const { return path_; }
    std::string child(const std::string& key) const { return path_ + "." + key; }

    bool has(const std::string& key) {
        known_.insert(key);
        return j_.contains(key);
    }
    const json& at(const std::string& key) {
        known_.insert(key);
        if (!j_.contains(key)) throw ConfigError(child(key), "required");
        return j_.at(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(child(key), "expected a number");
        return v.get<double>();
    }
    double positive(const std::string& key, double fallback) {
        const double v = number(key, fallback);
        if (!(v > 0.0)) throw ConfigError(child(key), "must be > 0");
        return v;
    }
    double non_negative(const std::string& key, double fallback) {
        const double v = number(key, fallback);
        if (v < 0.0) throw ConfigError(child(key), "must be >= 0");
        return v;
    }
    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError(child(key), "expected an integer");
        return v.get<std::int64_t>();
    }
    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            throw ConfigError(child(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(child(key), "expected true or false");
        return v.get<bool>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(child(key), "expected a string");
        return v.get<std::string>();
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!known_.contains(k)) throw ConfigError(child(k), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> known_;
};

Vec2 read_vec(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(path, "expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

template <typename E, typename F>
E read_enum(Reader& r, const std::string& key, E fallback, F&& parse) {
    if (!r.has(key)) return fallback;
    const std::string s = r.string(key, "");
    auto v = parse(s);
    if (!v) throw ConfigError(r.child(key), "unknown value '" + s + "'");
    return *v;
}

NoiseModel read_noise(const json& j, const std::string& path) {
    Reader r(j, path);
    NoiseModel n;
    n.sigma_pos = r.non_negative("sigma_pos", n.sigma_pos);
    n.sigma_speed = r.non_negative("sigma_speed", n.sigma_speed);
    n.truncation_sigmas = r.positive("truncation_sigmas", n.truncation_sigmas);
    r.finish();
    return n;
}

ChannelConfig read_channel(const json& j, const std::string& path) {
    Reader r(j, path);
    ChannelConfig c;
    c.capacity_bytes_per_window = r.positive("capacity_bytes_per_window", c.capacity_bytes_per_window);
    c.window_ms = static_cast<TimeMs>(r.positive("window_ms", static_cast<double>(c.window_ms)));
    c.loss_rate = r.non_negative("loss_rate", c.loss_rate);
    if (c.loss_rate > 1.0) throw ConfigError(r.child("loss_rate"), "must be <= 1");
    r.finish();
    return c;
}

CpsParams read_station_defaults(const json& j, const std::string& path) {
    Reader r(j, path);
    CpsParams p;
    auto& th = p.thresholds;
    th.position_delta = r.positive("position_delta", th.position_delta);
    th.speed_delta = r.positive("speed_delta", th.speed_delta);
    th.heading_delta = r.positive("heading_delta", th.heading_delta);
    th.t_max = static_cast<TimeMs>(r.positive("t_max_ms", static_cast<double>(th.t_max)));
    th.person_group_interval =
        static_cast<TimeMs>(r.positive("person_group_interval_ms", static_cast<double>(th.person_group_interval)));
    p.trackable_limit = static_cast<std::size_t>(r.positive("trackable_limit", static_cast<double>(p.trackable_limit)));
    p.segment_objects = static_cast<std::size_t>(r.positive("segment_objects", static_cast<double>(p.segment_objects)));
    p.free_space_rays = static_cast<int>(r.integer("free_space_rays", p.free_space_rays));
    if (p.free_space_rays < 16) throw ConfigError(r.child("free_space_rays"), "must be >= 16");
    p.include_free_space = r.boolean("include_free_space", p.include_free_space);
    p.gate = r.positive("gate", p.gate);
    p.track_ttl = static_cast<TimeMs>(r.positive("track_ttl_ms", static_cast<double>(p.track_ttl)));
    p.listen_window = static_cast<TimeMs>(r.positive("listen_window_ms", static_cast<double>(p.listen_window)));
    r.finish();
    return p;
}

SensorSpec read_sensor(const json& j, const std::string& path) {
    Reader r(j, path);
    SensorSpec s;
    const auto id = r.integer("id", 0);
    if (id < 0 || id > 255) throw ConfigError(r.child("id"), "must be in [0, 255]");
    s.sensor_id = static_cast<std::uint8_t>(id);
    s.sensor_type = read_enum(r, "type", SensorType::lidar, sensor_type_from_string);
    s.range = r.positive("range", s.range);
    s.aperture = r.positive("aperture", s.aperture);
    if (s.aperture > 360.0) throw ConfigError(r.child("aperture"), "must be <= 360");
    if (r.has("mount")) s.mount_offset = read_vec(r.at("mount"), r.child("mount"));
    r.finish();
    return s;
}

StationConfig read_station(const json& j, const std::string& path, EntityKind kind) {
    Reader r(j, path);
    StationConfig s;
    const auto id = r.integer("id", -1);
    if (id <= 0 || id > 0xffffffffLL) throw ConfigError(r.child("id"), "station id must be a positive 32-bit integer");
    s.id = static_cast<StationId>(id);
    const StationType fallback = kind == EntityKind::rsu ? StationType::rsu
                                 : kind == EntityKind::pedestrian ? StationType::pedestrian
                                                                  : StationType::vehicle;
    s.type = read_enum(r, "type", fallback, station_type_from_string);
    s.certified = r.boolean("certified", true);
    s.send_cam = r.boolean("cam", s.type != StationType::rsu);
    r.finish();
    return s;
}

EntityConfig read_entity(const json& j, const std::string& path) {
    Reader r(j, path);
    EntityConfig ec;
    Entity& e = ec.entity;
    const auto id = r.integer("id", -1);
    if (id < 0 || id >= 10000) throw ConfigError(r.child("id"), "entity id must be in [0, 10000)");
    e.id = static_cast<EntityId>(id);
    e.kind = read_enum(r, "kind", EntityKind::non_connected_vehicle, entity_kind_from_string);
    if (e.kind == EntityKind::decoy) throw ConfigError(r.child("kind"), "decoys are created by attacks");
    const bool small = e.kind == EntityKind::pedestrian || e.kind == EntityKind::animal;
    e.pose.position = read_vec(r.at("position"), r.child("position"));
    e.pose.heading = normalize_heading(r.number("heading", 0.0));
    e.speed = r.non_negative("speed", 0.0);
    e.length = r.positive("length", small ? 0.6 : e.kind == EntityKind::rsu ? 1.0 : 4.5);
    e.width = r.positive("width", small ? 0.6 : e.kind == EntityKind::rsu ? 1.0 : 1.8);
    e.classification = read_enum(r, "classification", default_classification(e.kind), object_class_from_string);
    if (r.has("waypoints")) {
        const auto& w = r.at("waypoints");
        if (!w.is_array()) throw ConfigError(r.child("waypoints"), "expected a list of [x, y]");
        for (std::size_t i = 0; i < w.size(); ++i)
            e.waypoints.push_back(read_vec(w[i], r.child("waypoints") + "[" + std::to_string(i) + "]"));
    }
    e.loop_waypoints = r.boolean("loop", false);
    e.acceleration = r.number("acceleration", 0.0);
    e.max_speed = r.positive("max_speed", e.max_speed);
    e.yaw_rate = r.number("yaw_rate", 0.0);
    e.visible = r.boolean("visible", true);
    ec.jitter = r.boolean("jitter", e.waypoints.empty() && e.speed > 0.0);

    if (r.has("station")) {
        ec.station = read_station(r.at("station"), r.child("station"), e.kind);
        e.station_id = ec.station->id;
    }
    const bool needs_station = e.kind == EntityKind::connected_vehicle || e.kind == EntityKind::rsu;
    if (needs_station && !ec.station) throw ConfigError(r.child("station"), "required for " + std::string(to_string(e.kind)));
    if (!needs_station && ec.station && e.kind != EntityKind::pedestrian)
        throw ConfigError(r.child("station"), "only connected vehicles, RSUs and pedestrians carry a station");
    if (r.has("sensors")) {
        const auto& s = r.at("sensors");
        if (!s.is_array()) throw ConfigError(r.child("sensors"), "expected a list");
        if (!ec.station) throw ConfigError(r.child("sensors"), "sensors require a station");
        std::set<std::uint8_t> ids;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const std::string p = r.child("sensors") + "[" + std::to_string(i) + "]";
            ec.sensors.push_back(read_sensor(s[i], p));
            if (!ids.insert(ec.sensors.back().sensor_id).second) throw ConfigError(p + ".id", "duplicate sensor id");
        }
    }
    r.finish();
    return ec;
}

AttackerProfile read_profile(const json& j, const std::string& path) {
    Reader r(j, path);
    AttackerProfile p;
    auto pick = [&](const char* key, auto fallback, std::initializer_list<std::pair<const char*, decltype(fallback)>> opts) {
        if (!r.has(key)) return fallback;
        const std::string s = r.string(key, "");
        for (const auto& [name, v] : opts)
            if (s == name) return v;
        throw ConfigError(r.child(key), "unknown value '" + s + "'");
    };
    p.membership = pick("membership", p.membership, {{"internal", Membership::internal}, {"external", Membership::external}});
    p.motivation = pick("motivation", p.motivation, {{"malicious", Motivation::malicious}, {"rational", Motivation::rational}});
    p.activity = pick("activity", p.activity, {{"active", Activity::active}, {"passive", Activity::passive}});
    p.scope = pick("scope", p.scope, {{"local", Scope::local}, {"extended", Scope::extended}});
    p.path = pick("path", p.path, {{"direct", AttackPath::direct}, {"indirect", AttackPath::indirect}});
    r.finish();
    return p;
}

AttackSpec read_attack(const json& j, const std::string& path) {
    Reader r(j, path);
    AttackSpec a;
    const std::string id = r.string("id", "");
    auto parsed = attack_from_string(id);
    if (!parsed) throw ConfigError(r.child("id"), "unknown attack id '" + id + "'");
    a.id = *parsed;
    a.attacker = static_cast<StationId>(r.unsigned_integer("attacker", 0));
    if (r.has("victim")) a.victim = static_cast<StationId>(r.unsigned_integer("victim", 0));
    a.start = r.integer("start_ms", 0);
    if (r.has("stop_ms")) a.stop = r.integer("stop_ms", 0);
    if (r.has("profile")) a.profile = read_profile(r.at("profile"), r.child("profile"));
    if (r.has("params")) {
        a.params = r.at("params");
        if (!a.params.is_object()) throw ConfigError(r.child("params"), "expected an object");
    }
    r.finish();
    return a;
}

DetectorConfig read_detectors(const json& j, const std::string& path) {
    Reader r(j, path);
    DetectorConfig d;
    if (r.has("enabled")) {
        const auto& e = r.at("enabled");
        if (e.is_string() && e.get<std::string>() == "all") {
            for (int i = 1; i <= 9; ++i) d.enabled.push_back(static_cast<DetectorId>(i));
        } else if (e.is_array()) {
            for (std::size_t i = 0; i < e.size(); ++i) {
                const std::string p = r.child("enabled") + "[" + std::to_string(i) + "]";
                if (!e[i].is_string()) throw ConfigError(p, "expected a detector name");
                auto id = detector_from_string(e[i].get<std::string>());
                if (!id) throw ConfigError(p, "unknown detector '" + e[i].get<std::string>() + "'");
                d.enabled.push_back(*id);
            }
        } else {
            throw ConfigError(r.child("enabled"), "expected \"all\" or a list of detector names");
        }
    }
    auto& p = d.params;
    p.reporting_threshold = r.non_negative("reporting_threshold", p.reporting_threshold);
    if (r.has("params")) {
        Reader q(r.at("params"), r.child("params"));
        p.max_speed = q.positive("max_speed", p.max_speed);
        p.gate = q.positive("gate", p.gate);
        p.trackable_limit = static_cast<std::size_t>(q.positive("trackable_limit", static_cast<double>(p.trackable_limit)));
        p.max_rate = q.positive("max_rate", p.max_rate);
        p.rate_window = static_cast<TimeMs>(q.positive("rate_window_ms", static_cast<double>(p.rate_window)));
        p.silence = static_cast<TimeMs>(q.positive("silence_ms", static_cast<double>(p.silence)));
        p.d4_window = static_cast<TimeMs>(q.positive("d4_window_ms", static_cast<double>(p.d4_window)));
        p.d2_range_tolerance = q.non_negative("d2_range_tolerance", p.d2_range_tolerance);
        p.d2_angle_tolerance = q.non_negative("d2_angle_tolerance", p.d2_angle_tolerance);
        p.d5_boundary_margin = q.non_negative("d5_boundary_margin", p.d5_boundary_margin);
        p.d8_cam_window = static_cast<TimeMs>(q.positive("d8_cam_window_ms", static_cast<double>(p.d8_cam_window)));
        p.d8_lateral = q.positive("d8_lateral", p.d8_lateral);
        p.d8_along_time = q.non_negative("d8_along_time", p.d8_along_time);
        p.d8_along_min = q.non_negative("d8_along_min", p.d8_along_min);
        p.d8_heading = q.positive("d8_heading", p.d8_heading);
        p.d8_speed = q.positive("d8_speed", p.d8_speed);
        p.aggregation_window =
            static_cast<TimeMs>(q.positive("aggregation_window_ms", static_cast<double>(p.aggregation_window)));
        q.finish();
    }
    r.finish();
    return d;
}

RedundancyParams read_redundancy(const json& j, const std::string& path) {
    Reader r(j, path);
    RedundancyParams p;
    p.enabled = r.boolean("enabled", p.enabled);
    const std::string mode = r.string("mode", "frequency");
    if (mode != "frequency") throw ConfigError(r.child("mode"), "only 'frequency' mitigation is implemented");
    p.cbr_threshold = r.non_negative("cbr_threshold", p.cbr_threshold);
    if (p.cbr_threshold > 1.0) throw ConfigError(r.child("cbr_threshold"), "must be <= 1");
    p.window = static_cast<TimeMs>(r.positive("window_ms", static_cast<double>(p.window)));
    r.finish();
    return p;
}

EeblParams read_eebl(const json& j, const std::string& path) {
    Reader r(j, path);
    EeblParams p;
    p.corridor_length = r.positive("corridor_length", p.corridor_length);
    p.corridor_half_width = r.positive("corridor_half_width", p.corridor_half_width);
    p.stationary_speed = r.non_negative("stationary_speed", p.stationary_speed);
    p.gate = r.positive("gate", p.gate);
    p.denm_ttl = static_cast<TimeMs>(r.positive("denm_ttl_ms", static_cast<double>(p.denm_ttl)));
    r.finish();
    return p;
}

JitterConfig read_jitter(const json& j, const std::string& path) {
    Reader r(j, path);
    JitterConfig c;
    c.position = r.non_negative("position", c.position);
    c.speed = r.non_negative("speed", c.speed);
    r.finish();
    return c;
}

}  // namespace

ScenarioConfig parse_scenario(const nlohmann::json& doc) {
    Reader r(doc, "$");
    ScenarioConfig c;
    if (r.string("format", "") != "cpsim-scenario") throw ConfigError("$.format", "expected 'cpsim-scenario'");
    if (r.integer("version", 0) != 1) throw ConfigError("$.version", "unsupported version (expected 1)");
    c.name = r.string("name", "unnamed");
    (void)r.string("description", "");
    c.duration_ms = static_cast<TimeMs>(r.positive("duration_ms", static_cast<double>(c.duration_ms)));
    c.tick_ms = static_cast<TimeMs>(r.positive("tick_ms", static_cast<double>(c.tick_ms)));
    if (c.duration_ms % c.tick_ms != 0) throw ConfigError("$.duration_ms", "must be a multiple of tick_ms");
    c.seed = r.unsigned_integer("seed", c.seed);
    if (r.has("noise")) c.noise = read_noise(r.at("noise"), "$.noise");
    if (r.has("channel")) c.channel = read_channel(r.at("channel"), "$.channel");
    if (r.has("station_defaults")) c.station_defaults = read_station_defaults(r.at("station_defaults"), "$.station_defaults");
    if (r.has("jitter")) c.jitter = read_jitter(r.at("jitter"), "$.jitter");
    if (r.has("redundancy")) c.redundancy = read_redundancy(r.at("redundancy"), "$.redundancy");
    c.station_defaults.redundancy = c.redundancy;

    const auto& ents = r.at("entities");
    if (!ents.is_array()) throw ConfigError("$.entities", "expected a list");
    std::set<EntityId> eids;
    std::set<StationId> sids;
    for (std::size_t i = 0; i < ents.size(); ++i) {
        const std::string p = "$.entities[" + std::to_string(i) + "]";
        auto ec = read_entity(ents[i], p);
        if (!eids.insert(ec.entity.id).second) throw ConfigError(p + ".id", "duplicate entity id");
        if (ec.station) {
            if (!sids.insert(ec.station->id).second) throw ConfigError(p + ".station.id", "duplicate station id");
            ec.station->cps = c.station_defaults;
        }
        c.entities.push_back(std::move(ec));
    }

    if (r.has("attacks")) {
        const auto& a = r.at("attacks");
        if (!a.is_array()) throw ConfigError("$.attacks", "expected a list");
        for (std::size_t i = 0; i < a.size(); ++i) c.attacks.push_back(read_attack(a[i], "$.attacks[" + std::to_string(i) + "]"));
    }
    if (r.has("detectors")) c.detectors = read_detectors(r.at("detectors"), "$.detectors");
    c.detectors.params.trackable_limit = c.station_defaults.trackable_limit;
    c.attestation = r.boolean("attestation", false);
    if (r.has("eebl")) c.eebl = read_eebl(r.at("eebl"), "$.eebl");
    if (r.has("trace")) {
        Reader t(r.at("trace"), "$.trace");
        c.record_payloads = t.boolean("record_payloads", false);
        t.finish();
    }
    r.finish();

    c.source = doc;
    const WorldState w = build_world(c);
    for (std::size_t i = 0; i < c.attacks.size(); ++i) {
        const auto& a = c.attacks[i];
        const std::string p = "$.attacks[" + std::to_string(i) + "]";
        try {
            validate_attack(a, w);
        } catch (const AttackConfigError& e) {
            throw ConfigError(p, e.what());
        }
        if (a.id == AttackId::T4_A && sids.contains(pseudonym_station(a)))
            throw ConfigError(p + ".params.pseudonym", "collides with an existing station id");
    }
    return c;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open scenario file");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path, std::string("invalid JSON: ") + e.what());
    }
    return parse_scenario(doc);
}

ScenarioConfig patched(const ScenarioConfig& base, const nlohmann::json& patch) {
    nlohmann::json doc = base.source;
    doc.merge_patch(patch);
    return parse_scenario(doc);
}

ScenarioConfig with_seed(const ScenarioConfig& base, std::uint64_t seed) {
    ScenarioConfig c = base;
    c.seed = seed;
    c.source["seed"] = seed;
    return c;
}

WorldState build_world(const ScenarioConfig& cfg) {
    WorldState w;
    w.rng_seed = cfg.seed;
    w.noise = cfg.noise;
    for (const auto& ec : cfg.entities) {
        Entity e = ec.entity;
        if (ec.jitter && (cfg.jitter.position > 0.0 || cfg.jitter.speed > 0.0)) {
            std::mt19937_64 rng(mix_seed(cfg.seed, 0x6a1770000ULL + e.id));
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            const double dp = cfg.jitter.position * u(rng);
            const double dv = cfg.jitter.speed * u(rng);
            e.pose.position += heading_vector(e.pose.heading) * dp;
            e.speed = std::max(0.0, e.speed + dv);
        }
        w.add_entity(std::move(e));
        if (ec.station) w.sensors[ec.station->id] = ec.sensors;
    }
    for (std::size_t i = 0; i < cfg.attacks.size(); ++i) setup_world(cfg.attacks[i], i, w);
    return w;
}

}  // namespace cpsim
