#pragma once

#include <random>

#include "cpsim/codec.hpp"
#include "cpsim/parallel.hpp"
#include "cpsim/risk.hpp"
#include "cpsim/security.hpp"
#include "cpsim/simulation.hpp"

namespace cpsim::test {

inline double mm(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return std::round(d(rng) * 1000.0) / 1000.0;
}

inline Vec2 mm_point(std::mt19937_64& rng, double lim) { return {mm(rng, -lim, lim), mm(rng, -lim, lim)}; }

inline double heading(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(0, 359999);
    return d(rng) / 1000.0;
}

inline bool coin(std::mt19937_64& rng) { return (rng() & 1u) != 0; }

inline int pick(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline Header header(std::mt19937_64& rng, MessageId id) {
    return {kProtocolVersion, id, static_cast<StationId>(rng())};
}

/// Convex polygon: sorted angles around a center, so always simple.
inline Polygon random_polygon(std::mt19937_64& rng) {
    const int n = pick(rng, 3, 12);
    std::vector<double> angles;
    for (int i = 0; i < n; ++i) angles.push_back(i * (360.0 / n) + mm(rng, 0, 360.0 / n * 0.8));
    const double r = mm(rng, 1, 150);
    const Vec2 c = mm_point(rng, 50);
    Polygon p;
    for (double a : angles) {
        Vec2 v = c + heading_vector(a) * r;
        p.push_back({std::round(v.x * 1000.0) / 1000.0, std::round(v.y * 1000.0) / 1000.0});
    }
    return p;
}

inline CpmMessage random_cpm(std::mt19937_64& rng) {
    CpmMessage m;
    m.header = header(rng, MessageId::cpm);
    m.management.generation_time = pick(rng, 0, 1 << 30);
    m.management.reference_position = mm_point(rng, 100000);
    m.management.station_type = static_cast<StationType>(pick(rng, 0, 2));
    if (coin(rng)) m.station_data = StationDataContainer{mm(rng, 0, 70), heading(rng)};
    if (coin(rng)) {
        std::vector<SensorInformation> v;
        const int n = pick(rng, 0, 4);
        for (int i = 0; i < n; ++i) {
            SensorInformation s;
            s.sensor_id = static_cast<std::uint8_t>(i * 3 + pick(rng, 0, 2));
            s.sensor_type = static_cast<SensorType>(pick(rng, 0, 2));
            s.range = mm(rng, 0.001, 500);
            s.aperture = mm(rng, 0.001, 360);
            s.mount_offset = mm_point(rng, 3);
            v.push_back(s);
        }
        m.sensor_info = std::move(v);
    }
    if (coin(rng)) {
        std::vector<PerceivedObject> v;
        const int n = pick(rng, 0, 20);
        for (int i = 0; i < n; ++i) {
            PerceivedObject o;
            o.object_id = static_cast<std::uint32_t>(rng());
            o.relative_position = mm_point(rng, 6000);
            o.speed = mm(rng, 0, 90);
            o.heading = heading(rng);
            o.length = mm(rng, 0, 20);
            o.width = mm(rng, 0, 4);
            o.classification = static_cast<ObjectClass>(pick(rng, 0, 1));
            o.time_of_measurement = pick(rng, -1000, 1 << 30);
            o.confidence = pick(rng, 0, 1000) / 1000.0;
            v.push_back(o);
        }
        m.perceived_objects = std::move(v);
    }
    if (coin(rng)) {
        std::vector<FreeSpaceAddendum> v;
        const int n = pick(rng, 0, 3);
        for (int i = 0; i < n; ++i) {
            FreeSpaceAddendum fs;
            fs.free_space_id = static_cast<std::uint8_t>(i);
            fs.polygon = random_polygon(rng);
            if (m.sensor_info && !m.sensor_info->empty() && coin(rng))
                fs.sensor_ids = std::vector<std::uint8_t>{m.sensor_info->front().sensor_id};
            else if (coin(rng))
                fs.sensor_ids = std::vector<std::uint8_t>{};
            v.push_back(std::move(fs));
        }
        m.free_space = std::move(v);
    }
    return m;
}

inline CamMessage random_cam(std::mt19937_64& rng) {
    CamMessage m;
    m.header = header(rng, MessageId::cam);
    m.position = mm_point(rng, 100000);
    m.speed = mm(rng, 0, 90);
    m.heading = heading(rng);
    m.timestamp = pick(rng, 0, 1 << 30);
    return m;
}

inline DenmMessage random_denm(std::mt19937_64& rng) {
    DenmMessage m;
    m.header = header(rng, MessageId::denm);
    m.event_type = static_cast<EventType>(pick(rng, 0, 1));
    m.event_position = mm_point(rng, 100000);
    m.timestamp = pick(rng, 0, 1 << 30);
    return m;
}

inline MisbehaviorReport random_mbr(std::mt19937_64& rng) {
    MisbehaviorReport m;
    m.reporter = static_cast<StationId>(rng());
    m.suspect_cert_id = rng();
    m.detector_id = static_cast<DetectorId>(pick(rng, 1, 9));
    m.created_at = pick(rng, 0, 1 << 30);
    const int n = pick(rng, 1, 3);
    for (int i = 0; i < n; ++i) {
        SignedEnvelope e;
        e.payload = canonical_bytes(random_cam(rng));
        e.cert_id = rng();
        for (auto& b : e.signature_tag) b = static_cast<std::uint8_t>(rng());
        m.evidence.push_back(std::move(e));
    }
    if (m.detector_id == DetectorId::D8 || coin(rng)) m.synchronized_pair = {random_cam(rng), random_cpm(rng)};
    return m;
}

inline Message random_message(std::mt19937_64& rng) {
    switch (pick(rng, 0, 3)) {
        case 0: return random_cam(rng);
        case 1: return random_cpm(rng);
        case 2: return random_denm(rng);
        default: return random_mbr(rng);
    }
}

// ---------------------------------------------------------------------------
// Fixed messages of the golden corpus.

inline CpmMessage golden_cpm_minimal() {
    CpmMessage m;
    m.header.station_id = 7;
    m.management = {1200, {13.0, 420.0}, StationType::rsu};
    return m;
}

inline CpmMessage golden_cpm_full() {
    CpmMessage m;
    m.header.station_id = 3;
    m.management = {25300, {3.5, 812.25}, StationType::vehicle};
    m.station_data = StationDataContainer{25.0, 0.0};
    m.sensor_info = std::vector<SensorInformation>{
        {0, SensorType::lidar, 100.0, 120.0, {0.0, 2.0}},
        {1, SensorType::camera, 60.0, 60.0, {0.0, 1.5}},
    };
    m.perceived_objects = std::vector<PerceivedObject>{
        {1, {0.0, 34.5}, 22.0, 359.5, 4.5, 1.8, ObjectClass::other, 25290, 0.95},
        {2, {-7.5, -12.0}, 0.0, 180.0, 0.5, 0.5, ObjectClass::person_or_animal, 25290, 1.0},
    };
    m.free_space = std::vector<FreeSpaceAddendum>{
        {0, {{0, 0}, {-10, 40}, {10, 40}}, std::vector<std::uint8_t>{0}},
    };
    return m;
}

inline CamMessage golden_cam() {
    CamMessage m;
    m.header.station_id = 2;
    m.position = {3.5, -104.75};
    m.speed = 25.0;
    m.heading = 0.0;
    m.timestamp = 4100;
    return m;
}

inline DenmMessage golden_denm() {
    DenmMessage m;
    m.header.station_id = 3;
    m.event_type = EventType::emergency_brake;
    m.event_position = {0.0, 530.0};
    m.timestamp = 3000;
    return m;
}

inline MisbehaviorReport golden_mbr() {
    MisbehaviorReport m;
    m.reporter = 1;
    m.suspect_cert_id = 3001;
    m.detector_id = DetectorId::D8;
    m.created_at = 5200;
    SignedEnvelope e;
    e.payload = canonical_bytes(golden_cam());
    e.cert_id = 3001;
    for (std::size_t i = 0; i < kTagSize; ++i) e.signature_tag[i] = static_cast<std::uint8_t>(i);
    m.evidence.push_back(e);
    m.synchronized_pair = {golden_cam(), golden_cpm_full()};
    return m;
}

struct GoldenCase {
    const char* file;
    Message message;
};

inline std::vector<GoldenCase> golden_cases() {
    return {
        {"cpm_minimal.bin", golden_cpm_minimal()},
        {"cpm_full.bin", golden_cpm_full()},
        {"cam.bin", golden_cam()},
        {"denm.bin", golden_denm()},
        {"mbr_d8.bin", golden_mbr()},
    };
}

// ---------------------------------------------------------------------------
// Scene builders.

inline Entity vehicle(EntityId id, Vec2 at, double heading_deg, double speed, std::optional<StationId> station = {}) {
    Entity e;
    e.id = id;
    e.kind = station ? EntityKind::connected_vehicle : EntityKind::non_connected_vehicle;
    e.pose = {at, heading_deg};
    e.speed = speed;
    e.station_id = station;
    return e;
}

inline SensorSpec lidar(double range = 100.0, double aperture = 120.0) {
    return {0, SensorType::lidar, range, aperture, {0.0, 0.0}};
}

inline WorldState noiseless_world() {
    WorldState w;
    w.noise = {0.0, 0.0, 3.0};
    w.rng_seed = 1;
    return w;
}

inline KeyRegistry registry_with(std::initializer_list<CertId> certs, TimeMs valid_to = 1000000) {
    KeyRegistry r;
    for (CertId c : certs) r.enroll({c, static_cast<StationId>(c / 1000), std::nullopt, 0, valid_to}, derive_key(1, c));
    return r;
}

inline std::string source_path(const std::string& rel) { return std::string(CPSIM_SOURCE_DIR) + "/" + rel; }

}  // namespace cpsim::test
