#include <doctest.h>

#include "support.hpp"

using namespace cpsim;

namespace {

// Dense sampling stand-in for the analytic segment test.
bool sampled_hit(Vec2 a, Vec2 b, const OrientedRect& r, int samples = 4000) {
    for (int i = 0; i <= samples; ++i) {
        const double t = static_cast<double>(i) / samples;
        if (r.contains(a + (b - a) * t)) return true;
    }
    return false;
}

WorldState one_station(double range = 100.0, double aperture = 120.0) {
    WorldState w = test::noiseless_world();
    w.add_entity(test::vehicle(1, {0, 0}, 0, 0, 1));
    w.sensors[1] = {test::lidar(range, aperture)};
    return w;
}

bool reads(const std::vector<SensorReading>& rs, EntityId id) {
    return std::any_of(rs.begin(), rs.end(), [&](const SensorReading& r) { return r.entity_id == id; });
}

}  // namespace

TEST_CASE("heading helpers") {
    CHECK(normalize_heading(-90) == doctest::Approx(270));
    CHECK(normalize_heading(720) == doctest::Approx(0));
    CHECK(angle_diff(10, 350) == doctest::Approx(20));
    CHECK(angle_diff(350, 10) == doctest::Approx(-20));
    CHECK(angle_diff(0, 180) == doctest::Approx(180));
    CHECK(bearing_of({0, 1}) == doctest::Approx(0));
    CHECK(bearing_of({1, 0}) == doctest::Approx(90));
    CHECK(bearing_of({0, -1}) == doctest::Approx(180));
    CHECK(bearing_of({-1, 0}) == doctest::Approx(270));
    const Vec2 v = rotate_body_to_world({1, 2}, 90);
    CHECK(v.x == doctest::Approx(2));
    CHECK(v.y == doctest::Approx(-1));
}

TEST_CASE("segment against rectangle matches sampling oracle") {
    std::mt19937_64 rng(3);
    int disagreements = 0;
    for (int i = 0; i < 3000; ++i) {
        const OrientedRect r{test::mm_point(rng, 20), test::heading(rng), test::mm(rng, 0.5, 12), test::mm(rng, 0.5, 3)};
        const Vec2 a = test::mm_point(rng, 40);
        const Vec2 b = test::mm_point(rng, 40);
        const bool analytic = segment_hits_rect(a, b, r);
        const bool grazes = sampled_hit(a, b, r.inflated(0.02)) != sampled_hit(a, b, r.inflated(-0.02));
        if (!grazes && analytic != sampled_hit(a, b, r)) ++disagreements;
    }
    CHECK(disagreements == 0);
}

TEST_CASE("polygon helpers") {
    const Polygon sq{{0, 0}, {10, 0}, {10, 10}, {0, 10}};
    CHECK(point_in_polygon(sq, {5, 5}));
    CHECK_FALSE(point_in_polygon(sq, {15, 5}));
    CHECK(distance_to_boundary(sq, {5, 2}) == doctest::Approx(2));
    CHECK(is_simple_polygon(sq));
    CHECK_FALSE(is_simple_polygon(Polygon{{0, 0}, {10, 10}, {10, 0}, {0, 10}}));
}

TEST_CASE("step kinematics") {
    WorldState w = test::noiseless_world();
    w.add_entity(test::vehicle(1, {0, 0}, 0, 0));
    w.add_entity(test::vehicle(2, {3.5, 0}, 0, 10));
    w.add_entity(test::vehicle(3, {7, 0}, 90, 20));
    const WorldState n = step(w, 100);
    CHECK(n.time == 100);
    CHECK(n.find(1)->pose == w.find(1)->pose);
    CHECK(n.find(2)->pose.position.y == doctest::Approx(1.0));
    CHECK(n.find(2)->pose.position.x == doctest::Approx(3.5));
    CHECK(n.find(3)->pose.position.x == doctest::Approx(9.0));
    CHECK_THROWS_AS(step(w, 0), std::invalid_argument);
}

TEST_CASE("waypoints are followed") {
    WorldState w = test::noiseless_world();
    Entity e = test::vehicle(1, {0, 0}, 0, 10);
    e.waypoints = {{0, 5}, {5, 5}};
    w.add_entity(e);
    for (int i = 0; i < 10; ++i) step_in_place(w, 100);
    CHECK(w.find(1)->pose.position.x == doctest::Approx(5).epsilon(0.01));
    CHECK(w.find(1)->pose.position.y == doctest::Approx(5).epsilon(0.01));
}

TEST_CASE("duplicate entity ids are rejected") {
    WorldState w;
    w.add_entity(test::vehicle(1, {0, 0}, 0, 0));
    CHECK_THROWS_AS(w.add_entity(test::vehicle(1, {5, 0}, 0, 0)), std::invalid_argument);
}

TEST_CASE("state hash sequences are deterministic") {
    auto cfg = load_scenario(test::source_path("scenarios/clean_highway.json"));
    WorldState a = build_world(cfg);
    WorldState b = build_world(cfg);
    for (int i = 0; i < 50; ++i) {
        REQUIRE(state_hash(a) == state_hash(b));
        step_in_place(a, 100);
        step_in_place(b, 100);
    }
    WorldState c = build_world(with_seed(cfg, 2));
    CHECK(state_hash(c) != state_hash(build_world(cfg)));
}

TEST_CASE("in_sensor_area boundaries") {
    const SensorPose p{{0, 0}, 0};
    CHECK(in_sensor_area(p, 100, 120, {0, 100}));
    CHECK_FALSE(in_sensor_area(p, 100, 120, {0, 190}));
    CHECK(in_sensor_area(p, 100, 120, heading_vector(60) * 50));
    CHECK_FALSE(in_sensor_area(p, 100, 120, heading_vector(61) * 50));
    CHECK(in_sensor_area(p, 100, 360, {0, -50}));
}

TEST_CASE("sense examples") {
    WorldState w = one_station();
    w.add_entity(test::vehicle(2, {0, 50}, 0, 0));
    w.add_entity(test::vehicle(3, {0, 190}, 0, 0));
    const auto rs = sense(1, w);
    CHECK(reads(rs, 2));
    CHECK_FALSE(reads(rs, 3));
    CHECK_THROWS_AS(sense(99, w), UnknownStation);

    SUBCASE("small object behind a truck") {
        Entity truck = test::vehicle(4, {0, 30}, 0, 0);
        truck.length = 12;
        truck.width = 2.5;
        w.add_entity(truck);
        Entity ped = test::vehicle(5, {0.3, 45}, 0, 0);
        ped.kind = EntityKind::pedestrian;
        ped.length = ped.width = 0.5;
        w.add_entity(ped);
        const auto rs2 = sense(1, w);
        CHECK(reads(rs2, 4));
        CHECK_FALSE(reads(rs2, 5));
        CHECK_FALSE(reads(rs2, 2));
    }
}

TEST_CASE("sense stays inside the sensor area and occlusion is monotone") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        WorldState w = one_station(test::mm(rng, 20, 120), test::mm(rng, 30, 360));
        w.noise = {0.2, 0.1, 3.0};
        w.rng_seed = trial;
        for (EntityId id = 2; id < 14; ++id) w.add_entity(test::vehicle(id, test::mm_point(rng, 120), test::heading(rng), 0));
        const auto before = sense(1, w);
        const SensorPose sp = sensor_pose(w.find(1)->pose, w.sensors[1][0].mount_offset);
        for (const auto& r : before) CHECK(in_sensor_area(sp, w.sensors[1][0], w.find(1)->pose.position + r.relative_position));

        w.add_entity(test::vehicle(50, test::mm_point(rng, 60), test::heading(rng), 0));
        const auto after = sense(1, w);
        for (const auto& r : after)
            if (r.entity_id != 50) CHECK(reads(before, r.entity_id));
    }
}

TEST_CASE("free space of an empty world is the full sector") {
    WorldState w = one_station(100, 120);
    const auto fs = free_space(1, w, 64);
    REQUIRE(fs.size() == 1);
    const auto& poly = fs[0].polygon;
    CHECK(is_simple_polygon(poly));
    for (double b = -55; b <= 55; b += 5) CHECK(point_in_polygon(poly, heading_vector(b) * 95));
    CHECK_FALSE(point_in_polygon(poly, heading_vector(70) * 50));
    CHECK_THROWS_AS(free_space(1, w, 15), std::invalid_argument);

    SUBCASE("object outside the aperture changes nothing") {
        w.add_entity(test::vehicle(2, {0, -50}, 0, 0));
        CHECK(free_space(1, w, 64)[0].polygon == poly);
    }
}

TEST_CASE("free space shadow matches a grid oracle") {
    WorldState w = one_station(100, 120);
    w.add_entity(test::vehicle(2, {0, 50}, 0, 0));
    for (EntityId id = 3; id < 6; ++id) w.add_entity(test::vehicle(id, {-20.0 + 12.0 * id, 30.0 + 9.0 * id}, 15.0 * id, 0));
    const auto poly = free_space(1, w, 256)[0].polygon;
    const auto obstacles = obstacle_footprints(w, 1);
    int wrong = 0;
    for (double x = -90; x <= 90; x += 1.0) {
        for (double y = 1; y <= 100; y += 1.0) {
            const Vec2 p{x, y};
            if (!in_sensor_area({{0, 0}, 0}, 100, 120, p)) continue;
            bool near_edge = false;
            for (const auto& o : obstacles) near_edge = near_edge || o.inflated(1.0).contains(p);
            const bool shadowed = !line_of_sight({0, 0}, p, obstacles);
            // Rays graze shadow borders; keep a 1 m band and 1.5 deg wedge border out of the judgement.
            bool border = false;
            for (const auto& o : obstacles) {
                for (const auto& c : o.inflated(0.5).corners())
                    border = border || std::abs(angle_diff(bearing_of(p), bearing_of(c))) < 1.5;
            }
            if (near_edge || border || std::abs(angle_diff(bearing_of(p), 0)) > 58.5 || norm(p) > 99) continue;
            if (point_in_polygon(poly, p) == shadowed) ++wrong;
        }
    }
    CHECK(wrong == 0);
    for (const auto& o : obstacles) CHECK_FALSE(point_in_polygon(poly, o.center));
}
