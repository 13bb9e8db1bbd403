#include <doctest.h>

#include "support.hpp"

using namespace cpsim;

namespace {

const KeyRegistry& keys() {
    static const KeyRegistry reg = [] {
        KeyRegistry r = test::registry_with({1001, 2001, 3001, 4001});
        r.enroll({9001, 9, std::vector<AttestedCapability>{{SensorType::lidar, 100.0}}, 0, 1000000}, derive_key(1, 9001));
        return r;
    }();
    return reg;
}

template <class M>
Delivered deliver(const M& m, CertId cert, TimeMs received) {
    return make_delivered(sign(m, cert, keys()), Message{m}, received);
}

CpmMessage cpm_from(StationId station, Vec2 ref, TimeMs t, double range = 100.0, double aperture = 120.0) {
    CpmMessage m;
    m.header.station_id = station;
    m.management = {t, ref, StationType::vehicle};
    m.station_data = StationDataContainer{0.0, 0.0};
    m.sensor_info = std::vector<SensorInformation>{{0, SensorType::lidar, range, aperture, {0.0, 0.0}}};
    m.perceived_objects = std::vector<PerceivedObject>{};
    return m;
}

PerceivedObject object_at(std::uint32_t id, Vec2 rel, TimeMs t, double speed = 0.0) {
    return {id, rel, speed, 0.0, 4.5, 1.8, ObjectClass::other, t, 1.0};
}

CamMessage cam_of(StationId station, Vec2 at, double speed, TimeMs t) {
    CamMessage c;
    c.header.station_id = station;
    c.position = at;
    c.speed = speed;
    c.heading = 0.0;
    c.timestamp = t;
    return c;
}

SensorReading reading(EntityId id, Vec2 rel, double length = 4.5, double width = 1.8) {
    SensorReading r;
    r.entity_id = id;
    r.relative_position = rel;
    r.length = length;
    r.width = width;
    return r;
}

std::set<CertId> suspects(const std::vector<DetectorVerdict>& vs) {
    std::set<CertId> out;
    for (const auto& v : vs) out.insert(v.suspect_cert_id);
    return out;
}

const DetectorParams kDefaults{};
const Pose kEgo{{0, 0}, 0};
const std::vector<SensorSpec> kEgoSensors{test::lidar(100, 120)};

}  // namespace

TEST_CASE("D1 implausible speed") {
    CHECK(d1_implausible_speed(deliver(cam_of(2, {0, 0}, 80, 100), 2001, 100), 70).size() == 1);
    CHECK(d1_implausible_speed(deliver(cam_of(2, {0, 0}, 0, 100), 2001, 100), 70).empty());
    CHECK(d1_implausible_speed(deliver(cam_of(2, {0, 0}, 70, 100), 2001, 100), 70).empty());
    CpmMessage m = cpm_from(3, {0, 0}, 100);
    m.perceived_objects->push_back(object_at(1, {0, 20}, 100, 90));
    const auto v = d1_implausible_speed(deliver(m, 3001, 100), 70);
    REQUIRE(v.size() == 1);
    CHECK(v[0].suspect_cert_id == 3001);
}

TEST_CASE("D2 sensor area plausibility") {
    SUBCASE("object far beyond a 1 m range") {
        CpmMessage m = cpm_from(3, {0, 0}, 100, 1.0);
        m.perceived_objects->push_back(object_at(1, {0, 5000}, 100));
        const auto v = d2_sensor_area_plausibility(deliver(m, 3001, 100), kDefaults);
        REQUIRE(v.size() == 1);
        CHECK(v[0].detector == DetectorId::D2);
        CHECK(v[0].note == VerdictNote::attacker_suspected);
    }
    SUBCASE("self-consistent inflated range passes") {
        CpmMessage m = cpm_from(3, {0, 0}, 100, 200.0);
        m.perceived_objects->push_back(object_at(1, {0, 190}, 100));
        CHECK(d2_sensor_area_plausibility(deliver(m, 3001, 100), kDefaults).empty());
    }
    SUBCASE("object inside the declared area passes") {
        CpmMessage m = cpm_from(3, {0, 0}, 100);
        m.perceived_objects->push_back(object_at(1, {0, 50}, 100));
        CHECK(d2_sensor_area_plausibility(deliver(m, 3001, 100), kDefaults).empty());
    }
    SUBCASE("outside the aperture flags") {
        CpmMessage m = cpm_from(3, {0, 0}, 100);
        m.perceived_objects->push_back(object_at(1, {0, -50}, 100));
        CHECK(d2_sensor_area_plausibility(deliver(m, 3001, 100), kDefaults).size() == 1);
    }
    SUBCASE("no sensor information is indeterminate") {
        CpmMessage m = cpm_from(3, {0, 0}, 100, 1.0);
        m.perceived_objects->push_back(object_at(1, {0, 5000}, 100));
        m.sensor_info.reset();
        CHECK(d2_sensor_area_plausibility(deliver(m, 3001, 100), kDefaults).empty());
    }
}

TEST_CASE("D3 capability attestation") {
    CHECK(d3_capability_attestation(deliver(cpm_from(9, {0, 0}, 100, 200), 9001, 100), keys()).size() == 1);
    CHECK(d3_capability_attestation(deliver(cpm_from(9, {0, 0}, 100, 100), 9001, 100), keys()).empty());
    CHECK(d3_capability_attestation(deliver(cpm_from(3, {0, 0}, 100, 200), 3001, 100), keys()).empty());
}

TEST_CASE("D4 cross CPM consistency") {
    // B at the origin, A 10 m to its right; the object sits 40 m ahead of B.
    CpmMessage a = cpm_from(1, {10, 0}, 1000);
    a.perceived_objects->push_back(object_at(7, {-10, 40}, 1000));
    CpmMessage b = cpm_from(2, {0, 0}, 900);
    const Delivered da = deliver(a, 1001, 1000);
    const D4Context ctx;

    SUBCASE("silent B flags both") {
        const std::vector<Delivered> win{deliver(b, 2001, 900)};
        const auto v = d4_cross_cpm_consistency(da, win, ctx, kDefaults);
        REQUIRE(v.size() == 2);
        CHECK(suspects(v) == std::set<CertId>{1001, 2001});
        CHECK(v[0].co_suspect == 2001);
        CHECK(v[1].co_suspect == 1001);
        CHECK(v[0].evidence.size() == 2);
        CHECK(v[1].note == VerdictNote::victim_possible);
    }
    SUBCASE("matching object passes") {
        b.perceived_objects->push_back(object_at(3, {0.4, 40.2}, 900));
        const std::vector<Delivered> win{deliver(b, 2001, 900)};
        CHECK(d4_cross_cpm_consistency(da, win, ctx, kDefaults).empty());
    }
    SUBCASE("object behind one of B's own objects") {
        PerceivedObject truck = object_at(3, {0, 20}, 900);
        truck.length = 12;
        truck.width = 2.5;
        b.perceived_objects->push_back(truck);
        const std::vector<Delivered> win{deliver(b, 2001, 900)};
        CHECK(d4_cross_cpm_consistency(da, win, ctx, kDefaults).empty());
    }
    SUBCASE("B out of the recency window") {
        CpmMessage late = a;
        late.management.generation_time = 2000;
        (*late.perceived_objects)[0].time_of_measurement = 2000;
        const std::vector<Delivered> win{deliver(b, 2001, 900)};
        CHECK(d4_cross_cpm_consistency(deliver(late, 1001, 2000), win, ctx, kDefaults).empty());
    }
    SUBCASE("swapping roles flags the symmetric pair") {
        CpmMessage b2 = cpm_from(2, {0, 0}, 1000);
        b2.perceived_objects->push_back(object_at(7, {0, 40}, 1000));
        CpmMessage a2 = cpm_from(1, {10, 0}, 900);
        const std::vector<Delivered> fwd{deliver(b, 2001, 900)};
        const std::vector<Delivered> rev{deliver(a2, 1001, 900)};
        const auto one = d4_cross_cpm_consistency(da, fwd, ctx, kDefaults);
        const auto two = d4_cross_cpm_consistency(deliver(b2, 2001, 1000), rev, ctx, kDefaults);
        CHECK(suspects(one) == suspects(two));
        CHECK(one.size() == 2);
    }
}

TEST_CASE("D5 free space contradiction") {
    const std::vector<SensorReading> truck{reading(5, {0, 30}, 12, 2.5)};
    CpmMessage m = cpm_from(3, {20, 0}, 1000);
    SUBCASE("free space over a visible truck") {
        m.free_space = std::vector<FreeSpaceAddendum>{{0, {{-30, 20}, {-10, 20}, {-10, 45}, {-30, 45}}, std::nullopt}};
        const auto v = d5_free_space_contradiction(deliver(m, 3001, 1000), truck, kEgo, 1000, kDefaults);
        REQUIRE(v.size() == 1);
        CHECK(v[0].detector == DetectorId::D5);
    }
    SUBCASE("truthful free space") {
        m.free_space = std::vector<FreeSpaceAddendum>{{0, {{-30, 40}, {-10, 40}, {-10, 60}, {-30, 60}}, std::nullopt}};
        CHECK(d5_free_space_contradiction(deliver(m, 3001, 1000), truck, kEgo, 1000, kDefaults).empty());
    }
    SUBCASE("no line of sight yet") {
        m.free_space = std::vector<FreeSpaceAddendum>{{0, {{-30, 20}, {-10, 20}, {-10, 45}, {-30, 45}}, std::nullopt}};
        CHECK(d5_free_space_contradiction(deliver(m, 3001, 1000), {}, kEgo, 1000, kDefaults).empty());
    }
}

TEST_CASE("D6 rate anomaly") {
    const std::map<StationId, TimeMs> no_cams;
    SUBCASE("200 CPMs per second") {
        RateLog log;
        for (TimeMs t = 0; t <= 2000; t += 5) log.record(deliver(cpm_from(3, {0, 0}, t), 3001, t));
        const auto v = d6_rate_anomaly(log, 2000, {}, kEgo, no_cams, kDefaults);
        REQUIRE(v.size() == 1);
        CHECK(v[0].suspect_cert_id == 3001);
    }
    SUBCASE("nominal 1 Hz") {
        RateLog log;
        for (TimeMs t = 0; t <= 4000; t += 1000) log.record(deliver(cpm_from(3, {0, 0}, t), 3001, t));
        CHECK(d6_rate_anomaly(log, 4000, {}, kEgo, no_cams, kDefaults).empty());
    }
    SUBCASE("less than the observation window") {
        RateLog log;
        for (TimeMs t = 0; t <= 1500; t += 5) log.record(deliver(cpm_from(3, {0, 0}, t), 3001, t));
        CHECK(d6_rate_anomaly(log, 1500, {}, kEgo, no_cams, kDefaults).empty());
    }
    SUBCASE("silent sender whose objects persist") {
        RateLog log;
        for (TimeMs t = 0; t <= 1000; t += 1000) {
            CpmMessage m = cpm_from(3, {0, 0}, t);
            m.perceived_objects->push_back(object_at(1, {0, 30}, t));
            log.record(deliver(m, 3001, t));
        }
        const std::vector<SensorReading> seen{reading(8, {0.5, 30})};
        const std::map<StationId, TimeMs> cams{{3, 3900}};
        CHECK(d6_rate_anomaly(log, 4000, seen, kEgo, cams, kDefaults).size() == 1);
        CHECK(d6_rate_anomaly(log, 4000, {}, kEgo, cams, kDefaults).empty());
        CHECK(d6_rate_anomaly(log, 4000, seen, kEgo, no_cams, kDefaults).empty());
    }
}

TEST_CASE("D7 object flood and aggregation") {
    auto flood = [](std::size_t n, TimeMs t) {
        CpmMessage m = cpm_from(3, {0, 0}, t);
        for (std::size_t i = 0; i < n; ++i)
            m.perceived_objects->push_back(object_at(static_cast<std::uint32_t>(i), {0, 10}, t));
        return deliver(m, 3001, t);
    };
    CHECK(d7_object_flood(flood(255, 100), 255).empty());
    CHECK(d7_object_flood(flood(256, 100), 255).size() == 1);

    MbrAggregator agg(kDefaults.aggregation_window);
    int admitted = 0;
    for (TimeMs t = 0; t < 1000; t += 100) {
        const auto vs = d7_object_flood(flood(256, t), 255);
        for (const auto& r : emit_mbr(vs, 1, t, kDefaults.reporting_threshold))
            admitted += agg.admit(r.detector_id, r.suspect_cert_id, t) ? 1 : 0;
    }
    CHECK(admitted == 1);
    CHECK(agg.admit(DetectorId::D7, 3001, 1000));
}

TEST_CASE("D8 CAM against CPM") {
    const Delivered cam = deliver(cam_of(2, {0, 0}, 10, 1000), 2001, 1000);
    auto cpm_claiming = [](double ahead) {
        CpmMessage m = cpm_from(3, {5, 0}, 1100);
        PerceivedObject o = object_at(4, {-5, ahead}, 1100, 10);
        m.perceived_objects->push_back(o);
        return deliver(m, 3001, 1100);
    };
    CHECK(d8_cam_cpm_crosscheck(cam, cpm_claiming(1.0), kDefaults).empty());
    const auto v = d8_cam_cpm_crosscheck(cam, cpm_claiming(15.0), kDefaults);
    REQUIRE(v.size() == 2);
    CHECK(suspects(v) == std::set<CertId>{2001, 3001});
    CHECK(v[0].synchronized_pair.has_value());

    SUBCASE("no CAM in the association window") {
        const Delivered old = deliver(cam_of(2, {0, -10}, 10, 0), 2001, 0);
        CHECK(d8_cam_cpm_crosscheck(old, cpm_claiming(1.0), kDefaults).empty());
    }
}

TEST_CASE("D9 local perception consistency") {
    CpmMessage m = cpm_from(3, {3.5, -10}, 1000);
    SUBCASE("ghost in clear view") {
        m.perceived_objects->push_back(object_at(60000, {-3.5, 40}, 1000));
        const auto v = d9_local_perception_consistency(deliver(m, 3001, 1000), {}, kEgo, kEgoSensors, 1000, kDefaults);
        REQUIRE(v.size() == 1);
        CHECK(v[0].note == VerdictNote::victim_possible);
        CHECK(v[0].suspect_cert_id == 3001);
    }
    SUBCASE("claimed object that ego also sees") {
        m.perceived_objects->push_back(object_at(1, {-3.5, 40}, 1000));
        const std::vector<SensorReading> seen{reading(1, {0.3, 29.8})};
        CHECK(d9_local_perception_consistency(deliver(m, 3001, 1000), seen, kEgo, kEgoSensors, 1000, kDefaults).empty());
    }
    SUBCASE("occluded from ego") {
        m.perceived_objects->push_back(object_at(60000, {-3.5, 40}, 1000));
        const std::vector<SensorReading> truck{reading(5, {0, 15}, 12, 2.5)};
        CHECK(d9_local_perception_consistency(deliver(m, 3001, 1000), truck, kEgo, kEgoSensors, 1000, kDefaults).empty());
    }
    SUBCASE("outside ego aperture") {
        m.perceived_objects->push_back(object_at(60000, {-3.5, -20}, 1000));
        CHECK(d9_local_perception_consistency(deliver(m, 3001, 1000), {}, kEgo, kEgoSensors, 1000, kDefaults).empty());
    }
}

TEST_CASE("emit_mbr") {
    CpmMessage m = cpm_from(3, {0, 0}, 100, 1.0);
    m.perceived_objects->push_back(object_at(1, {0, 5000}, 100));
    const Delivered d = deliver(m, 3001, 100);
    const auto v = d2_sensor_area_plausibility(d, kDefaults);
    REQUIRE(v.size() == 1);

    SUBCASE("evidence is the offending envelope") {
        const auto mbrs = emit_mbr(v, 1, 200, 0.5);
        REQUIRE(mbrs.size() == 1);
        CHECK(mbrs[0].evidence == std::vector<SignedEnvelope>{*d.envelope});
        CHECK(mbrs[0].suspect_cert_id == 3001);
        CHECK(mbrs[0].reporter == 1);
        CHECK(std::get<MisbehaviorReport>(decode(canonical_bytes(mbrs[0]))) == mbrs[0]);
        CHECK(emit_mbr(v, 1, 200, 0.5) == mbrs);
    }
    SUBCASE("below threshold") { CHECK(emit_mbr(v, 1, 200, 0.95).empty()); }
    SUBCASE("missing evidence") {
        auto bad = v;
        bad[0].evidence.clear();
        CHECK_THROWS_AS(emit_mbr(bad, 1, 200, 0.5), MbrError);
    }
    SUBCASE("D8 reports carry the synchronized pair") {
        const Delivered cam = deliver(cam_of(2, {0, 0}, 10, 1000), 2001, 1000);
        CpmMessage c = cpm_from(3, {5, 0}, 1100);
        c.perceived_objects->push_back(object_at(4, {-5, 15}, 1100, 10));
        const auto v8 = d8_cam_cpm_crosscheck(cam, deliver(c, 3001, 1100), kDefaults);
        const auto mbrs = emit_mbr(v8, 1, 1200, 0.5);
        REQUIRE(mbrs.size() == 2);
        for (const auto& r : mbrs) {
            REQUIRE(r.synchronized_pair.has_value());
            CHECK(r.synchronized_pair->second == c);
            CHECK(std::get<MisbehaviorReport>(decode(canonical_bytes(r))) == r);
        }
        auto no_pair = v8;
        no_pair[0].synchronized_pair.reset();
        CHECK_THROWS_AS(emit_mbr(no_pair, 1, 1200, 0.5), MbrError);
    }
}

TEST_CASE("suite skips the ego station's own messages") {
    DetectorSuite suite(kDefaults, {DetectorId::D1});
    const std::vector<Delivered> fresh{deliver(cam_of(1, {0, 0}, 80, 100), 1001, 100),
                                       deliver(cam_of(2, {0, 0}, 80, 100), 2001, 100)};
    DetectorInputs in;
    in.now = 100;
    in.ego_station = 1;
    in.fresh = fresh;
    const auto v = suite.process(in);
    REQUIRE(v.size() == 1);
    CHECK(v[0].suspect_cert_id == 2001);
    CHECK_FALSE(suite.enabled(DetectorId::D2));
}
