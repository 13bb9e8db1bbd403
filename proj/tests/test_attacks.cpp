#include <doctest.h>

#include <filesystem>

#include "support.hpp"

using namespace cpsim;
using nlohmann::json;

namespace {

struct Ctx {
    WorldState world = test::noiseless_world();
    StationSelf self;
    LocalDynamicMap ldm{1};
    std::vector<SensorSpec> sensors{test::lidar(100, 120)};
    std::mt19937_64 rng{1};

    Ctx() {
        world.add_entity(test::vehicle(1, {0, 0}, 0, 20, 1));
        world.add_entity(test::vehicle(2, {3.5, 30}, 0, 20, 2));
        world.add_entity(test::vehicle(102, {0, 60}, 0, 22));
        world.sensors[1] = sensors;
        world.sensors[2] = sensors;
        self.id = 1;
        self.reported = {{0, 0}, 0};
        self.sensing_origin = {0, 0};
        self.speed = 20;
    }
    OutgoingContext ctx(TimeMs now = 1000) { return {now, 100, &self, &world, &ldm, sensors, 255, &rng}; }
};

AttackSpec spec(AttackId id, json params = json::object()) {
    AttackSpec s;
    s.id = id;
    s.attacker = 1;
    s.victim = 2;
    s.start = 0;
    s.stop = 10000;
    s.params = std::move(params);
    return s;
}

const CpmMessage& only_cpm(const Outgoing& out) {
    for (const auto& m : out.messages)
        if (const auto* c = std::get_if<CpmMessage>(&m)) return *c;
    FAIL("no CPM emitted");
    throw std::logic_error("unreachable");
}

std::vector<std::string> body_lines(const std::vector<std::string>& lines) {
    // Header and footer embed the configuration; the rest is the run.
    return {lines.begin() + 1, lines.end() - 1};
}

std::vector<std::string> tx_lines(const std::vector<std::string>& lines) {
    std::vector<std::string> out;
    for (const auto& l : lines)
        if (l.find("\"type\":\"tx\"") != std::string::npos) out.push_back(l);
    return out;
}

RunOptions keep() {
    RunOptions o;
    o.keep_trace = true;
    o.parallel = false;
    return o;
}

std::vector<std::string> run_lines(const ScenarioConfig& cfg) {
    Simulation sim(cfg, keep());
    while (!sim.done()) sim.tick();
    sim.finish();
    return sim.trace_lines();
}

}  // namespace

TEST_CASE("catalog lists 17 attacks with their rows and defenses") {
    const auto cat = attack_catalog();
    CHECK(cat.size() == 17);
    CHECK(attack_info(AttackId::T3_H).detector == DetectorId::D3);
    CHECK(attack_info(AttackId::FIG4_EEBL).detector == DetectorId::D9);
    CHECK(attack_info(AttackId::T3_I).row == "III-I");
    for (const auto& a : cat) CHECK(a.row != "III-J");
    for (const auto& a : cat) CHECK(attack_from_string(to_string(a.id)) == a.id);
}

TEST_CASE("T3_A exceeds the trackable limit by one") {
    Ctx c;
    Outgoing out;
    AttackState st;
    inject_message_out(spec(AttackId::T3_A), st, out, c.ctx());
    CHECK(only_cpm(out).object_count() == 256);
}

TEST_CASE("T3_H inflates the declared range and reports at 190 m") {
    Ctx c;
    Outgoing out;
    AttackState st;
    inject_message_out(spec(AttackId::T3_H), st, out, c.ctx());
    const auto& cpm = only_cpm(out);
    CHECK((*cpm.sensor_info)[0].range == doctest::Approx(200));
    const auto& o = cpm.perceived_objects->back();
    CHECK(norm(o.relative_position) == doctest::Approx(190).epsilon(1e-3));
}

TEST_CASE("T3_I declares 1 m and reports at 5000 m") {
    Ctx c;
    Outgoing out;
    AttackState st;
    inject_message_out(spec(AttackId::T3_I), st, out, c.ctx());
    const auto& cpm = only_cpm(out);
    CHECK((*cpm.sensor_info)[0].range == doctest::Approx(1));
    CHECK(norm(cpm.perceived_objects->back().relative_position) == doctest::Approx(5000).epsilon(1e-4));
}

TEST_CASE("T3_B reuses the most recently included object id") {
    Ctx c;
    Track t;
    t.position = {0, 20};
    Track& made = c.ldm.create(t);
    made.last_included_in_cpm = InclusionSnapshot{900, {0, 20}, 0, 0};
    Outgoing out;
    AttackState st;
    inject_message_out(spec(AttackId::T3_B), st, out, c.ctx());
    const auto& o = only_cpm(out).perceived_objects->back();
    CHECK(o.object_id == made.object_id);
    CHECK(o.relative_position.y == doctest::Approx(35));
}

TEST_CASE("T3_K declares free space over the whole sensor area") {
    Ctx c;
    Outgoing out;
    AttackState st;
    inject_message_out(spec(AttackId::T3_K), st, out, c.ctx());
    const auto& cpm = only_cpm(out);
    REQUIRE(cpm.free_space);
    CHECK(point_in_polygon((*cpm.free_space)[0].polygon, Vec2{0, 60}));  // where entity 102 stands
}

TEST_CASE("T3_M multiplies the emission rate") {
    Ctx c;
    Outgoing out;
    AttackState st;
    inject_message_out(spec(AttackId::T3_M), st, out, c.ctx());
    CHECK(out.messages.size() == 20);
}

TEST_CASE("T4_A mirrors the target under a pseudonym") {
    Ctx c;
    Outgoing out;
    AttackState st;
    const auto s = spec(AttackId::T4_A, {{"target", 102}});
    inject_message_out(s, st, out, c.ctx());
    REQUIRE(out.messages.size() == 1);
    const auto& cam = std::get<CamMessage>(out.messages[0]);
    CHECK(cam.header.station_id == pseudonym_station(s));
    CHECK(cam.position == c.world.find(102)->pose.position);
}

TEST_CASE("T3_C drops the tail segment only when there are several") {
    Ctx c;
    AttackState st;
    Outgoing out;
    out.messages = {test::golden_cam(), test::golden_cpm_full(), test::golden_cpm_full()};
    inject_message_out(spec(AttackId::T3_C), st, out, c.ctx());
    CHECK(out.messages.size() == 2);
    inject_message_out(spec(AttackId::T3_C), st, out, c.ctx());
    CHECK(out.messages.size() == 2);
}

TEST_CASE("passive and inactive attacks leave the stream alone") {
    Ctx c;
    AttackState st;
    Outgoing out;
    auto s = spec(AttackId::T3_A);
    s.profile.activity = Activity::passive;
    inject_message_out(s, st, out, c.ctx());
    CHECK(out.messages.empty());
    s = spec(AttackId::T3_A);
    s.start = 5000;
    inject_message_out(s, st, out, c.ctx(1000));
    CHECK(out.messages.empty());
}

TEST_CASE("sensor-side tampering") {
    std::vector<SensorReading> rs(3);
    rs[0].sensor_type = SensorType::camera;
    rs[0].heading = 355;
    rs[1].sensor_type = SensorType::lidar;
    rs[2].sensor_type = SensorType::radar;
    StationSelf self;
    self.reported = {{1, 1}, 0};

    SUBCASE("T3_E skews camera heading") {
        inject_sensor_in(spec(AttackId::T3_E), 100, rs, self);
        CHECK(rs[0].heading == doctest::Approx(5));
        CHECK(rs[1].heading == 0);
    }
    SUBCASE("T3_L blinds lidar and camera") {
        inject_sensor_in(spec(AttackId::T3_L), 100, rs, self);
        REQUIRE(rs.size() == 1);
        CHECK(rs[0].sensor_type == SensorType::radar);
    }
    SUBCASE("T3_N biases the reference position") {
        inject_sensor_in(spec(AttackId::T3_N), 100, rs, self);
        CHECK(self.reported.position.y == doctest::Approx(21));
    }
}

TEST_CASE("T4_B clock offsets and motion compensation error") {
    auto s = spec(AttackId::T4_B);
    CHECK(inject_clock(s, 100) == 500);
    s.params = {{"offset_ms", 0}};
    CHECK(inject_clock(s, 100) == 0);
    s.params = {{"offset_ms", -500}};
    CHECK(inject_clock(s, 100) == -500);
    // The receiver compensates a 10 m/s object over the skewed age and misplaces it by 5 m.
    for (TimeMs off : {500, -500}) {
        LocalDynamicMap ldm(1);
        FusionParams fp;
        fp.ego_station = 1;
        fp.ego_position = {1e5, 1e5};
        CpmMessage cpm;
        cpm.header.station_id = 2;
        cpm.management = {1000 + off, {0, 0}, StationType::vehicle};
        PerceivedObject o;
        o.relative_position = {0, 50};
        o.speed = 10;
        o.time_of_measurement = 1000 + off;
        cpm.perceived_objects = std::vector{o};
        fuse_cpm(ldm, cpm, 2001, 1000, fp);
        const Track* t = ldm.nearest({0, 50}, 1000, 10.0, [](const Track& c) { return !c.station_id; });
        REQUIRE(t);
        CHECK(t->position.y - 50 == doctest::Approx(-static_cast<double>(off) / 100.0));
    }
}

TEST_CASE("world attacks add hidden decoys that appear in the window") {
    WorldState w = test::noiseless_world();
    auto s = spec(AttackId::T3_D, {{"position", {0, 40}}});
    s.attacker = 0;
    s.start = 500;
    setup_world(s, 0, w);
    REQUIRE(w.find(decoy_id(0)));
    CHECK(w.find(decoy_id(0))->classification == ObjectClass::person_or_animal);
    inject_world(s, 0, w);
    CHECK_FALSE(w.find(decoy_id(0))->visible);
    w.time = 600;
    inject_world(s, 0, w);
    CHECK(w.find(decoy_id(0))->visible);
}

TEST_CASE("T3_G toggles visibility each period") {
    WorldState w = test::noiseless_world();
    Entity p = test::vehicle(301, {0, 30}, 0, 0);
    p.kind = EntityKind::pedestrian;
    w.add_entity(p);
    auto s = spec(AttackId::T3_G, {{"target", 301}, {"period_ms", 400}});
    std::vector<bool> vis;
    for (TimeMs t = 0; t < 1600; t += 400) {
        w.time = t;
        inject_world(s, 0, w);
        vis.push_back(w.find(301)->visible);
    }
    CHECK(vis == std::vector<bool>{false, true, false, true});
}

TEST_CASE("composite timeline") {
    auto s = spec(AttackId::FIG4_EEBL);
    s.start = 1000;
    s.stop = 7000;
    const auto tl = run_eebl_composite(s);
    CHECK(tl.step1_start == 1000);
    CHECK(tl.step2_start == 3000);
    CHECK(tl.conflict_start == 3000);
    CHECK(tl.conflict_end == 7000);
}

TEST_CASE("invalid attack parameters are refused") {
    WorldState w = test::noiseless_world();
    w.add_entity(test::vehicle(1, {0, 0}, 0, 0, 1));
    w.sensors[1] = {test::lidar()};
    auto s = spec(AttackId::T3_D);
    s.victim.reset();
    CHECK_THROWS_AS(validate_attack(s, w), AttackConfigError);  // missing position
    s = spec(AttackId::T3_M, {{"factor", 1}});
    s.victim.reset();
    CHECK_THROWS_AS(validate_attack(s, w), AttackConfigError);
    s = spec(AttackId::T3_A);
    s.attacker = 9;
    CHECK_THROWS_AS(validate_attack(s, w), AttackConfigError);
}

TEST_CASE("every attack produces a trace diff against the clean run") {
    std::map<std::string, std::vector<std::string>> clean_by_base;
    std::set<AttackId> covered;
    for (const auto& entry : std::filesystem::directory_iterator(test::source_path("scenarios/attacks"))) {
        const auto cfg = load_scenario(entry.path().string());
        REQUIRE(!cfg.attacks.empty());
        CAPTURE(entry.path().filename().string());
        const auto clean = patched(cfg, {{"attacks", json::array()}});
        const auto attacked_lines = body_lines(run_lines(cfg));
        const auto clean_lines = body_lines(run_lines(clean));
        CHECK(attacked_lines != clean_lines);
        covered.insert(cfg.attacks.front().id);
    }
    CHECK(covered.size() == kAttackCount);
}

TEST_CASE("passive attackers leave the channel byte-identical") {
    for (const char* f : {"t3_a.json", "t3_i.json", "fig4_eebl.json", "t4_a.json"}) {
        CAPTURE(f);
        const auto cfg = load_scenario(test::source_path(std::string("scenarios/attacks/") + f));
        auto a = cfg.source["attacks"][0];
        a["profile"] = {{"activity", "passive"}};
        const auto passive = patched(cfg, {{"attacks", json::array({a})}});
        const auto clean = patched(cfg, {{"attacks", json::array()}});
        CHECK(tx_lines(run_lines(passive)) == tx_lines(run_lines(clean)));
    }
}

TEST_CASE("an external attacker gets nothing accepted") {
    const auto cfg = load_scenario(test::source_path("scenarios/attacks/fig4_eebl_undefended.json"));
    auto a = cfg.source["attacks"][0];
    a["profile"] = {{"membership", "external"}};
    const auto ext = patched(cfg, {{"attacks", json::array({a})}});
    const auto m = run_scenario(ext, keep());
    const StationId attacker = cfg.attacks[0].attacker;
    CHECK_FALSE(m.eebl_in_state(*cfg.attacks[0].victim, EeblState::fail_safe, 0, cfg.duration_ms));
    CHECK(m.rejected.at(VerifyStatus::unknown_certificate) > 0);
    Simulation sim(ext, keep());
    while (!sim.done()) sim.tick();
    for (const auto& n : sim.nodes()) {
        if (n.config.id == attacker) continue;
        for (const auto& [id, t] : n.ldm.tracks()) CHECK_FALSE(t.station_id == attacker);
    }
}

TEST_CASE("message-out attacks leave ground truth untouched") {
    for (const char* f : {"t3_a.json", "t3_b.json", "t3_h.json", "t3_i.json", "t3_m.json", "fig4_eebl.json"}) {
        CAPTURE(f);
        const auto cfg = load_scenario(test::source_path(std::string("scenarios/attacks/") + f));
        const auto clean = patched(cfg, {{"attacks", json::array()}});
        auto states = [](const std::vector<std::string>& lines) {
            std::vector<std::string> out;
            for (const auto& l : lines) {
                const auto j = json::parse(l);
                if (j["type"] == "tick") out.push_back(j["state"]);
            }
            return out;
        };
        CHECK(states(run_lines(cfg)) == states(run_lines(clean)));
    }
}

TEST_CASE("world attacks add no attacker traffic") {
    for (const char* f : {"t3_d.json", "t3_f.json", "t3_g.json", "t4_c.json"}) {
        CAPTURE(f);
        const auto cfg = load_scenario(test::source_path(std::string("scenarios/attacks/") + f));
        std::set<CertId> station_certs;
        for (const auto& e : cfg.entities)
            if (e.station && e.station->certified) station_certs.insert(cert_of(e.station->id));
        for (const auto& l : tx_lines(run_lines(cfg))) {
            const auto j = json::parse(l);
            CHECK(station_certs.contains(j["cert"].get<CertId>()));
        }
    }
}
