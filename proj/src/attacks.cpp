#include "cpsim/attacks.hpp"

#include <algorithm>
#include <array>

namespace cpsim {

namespace {

constexpr std::array<std::string_view, kAttackCount> kNames = {
    "T3_A", "T3_B", "T3_C", "T3_D", "T3_E", "T3_F", "T3_G", "T3_H", "T3_I",
    "T3_K", "T3_L", "T3_M", "T3_N", "T4_A", "T4_B", "T4_C", "FIG4_EEBL",
};

using IP = InjectionPoint;

const std::array<AttackInfo, kAttackCount> kCatalog = {{
    {AttackId::T3_A, "III-A", IP::message_out, DetectorId::D7,
     "fabricated objects beyond the trackable limit", "count=limit+1"},
    {AttackId::T3_B, "III-B", IP::message_out, DetectorId::D4,
     "spoofed object reusing an observed ObjectID with altered pose", "ahead_m=35,lateral_m=0"},
    {AttackId::T3_C, "III-C", IP::message_out, DetectorId::D4,
     "transmission inside the listen window cuts the victim's tail CPM segment", "segment_objects=4"},
    {AttackId::T3_D, "III-D", IP::world, std::nullopt, "static mannequin decoy classified person/animal",
     "position (required)"},
    {AttackId::T3_E, "III-E", IP::sensor_in, std::nullopt, "painted vehicle skews camera heading",
     "magnitude_deg=10"},
    {AttackId::T3_F, "III-F", IP::world, std::nullopt, "mannequin on wheels at scooter speed",
     "waypoints (required),speed=6"},
    {AttackId::T3_G, "III-G", IP::world, std::nullopt, "pedestrian jumping in and out of line of sight",
     "target (required),period_ms=400"},
    {AttackId::T3_H, "III-H", IP::message_out, DetectorId::D3,
     "inflated sensor range with an object beyond the true range",
     "from_range=100,to_range=200,object_distance=190"},
    {AttackId::T3_I, "III-I", IP::message_out, DetectorId::D2, "1 m declared range with an object at 5000 m",
     "declared_range=1,object_distance=5000"},
    {AttackId::T3_K, "III-K", IP::message_out, DetectorId::D5,
     "free space declared over occupied ground", ""},
    {AttackId::T3_L, "III-L", IP::sensor_in, DetectorId::D4, "lidar and camera blinding of the victim",
     "targets=all"},
    {AttackId::T3_M, "III-M", IP::message_out, DetectorId::D6, "CPM flood", "factor=20"},
    {AttackId::T3_N, "III-N", IP::sensor_in, DetectorId::D8, "GNSS interference biases the reference position",
     "bias=[0,20]"},
    {AttackId::T4_A, "IV-A", IP::message_out, std::nullopt,
     "forged CAMs under a second pseudonym mirror a non-connected object so the RSU drops it",
     "target (required),pseudonym=attacker+50000"},
    {AttackId::T4_B, "IV-B", IP::clock, DetectorId::D8, "time synchronization offset on the victim",
     "offset_ms=500"},
    {AttackId::T4_C, "IV-C", IP::world, std::nullopt, "moving box the size of a truck",
     "position (required),heading=0,length=12,width=2.5,speed=0"},
    {AttackId::FIG4_EEBL, "Fig4", IP::message_out, DetectorId::D9,
     "ghost vehicles, then a fake emergency brake DENM with a stationary ghost ahead of the victim",
     "step1_ms=2000,ahead_m=30,ghosts=[[3.5,40],[-3.5,55]]"},
}};

}  // namespace

std::string_view to_string(AttackId id) { return kNames[static_cast<std::size_t>(id)]; }

std::optional<AttackId> attack_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kNames.size(); ++i)
        if (kNames[i] == s) return static_cast<AttackId>(i);
    return std::nullopt;
}

std::string_view to_string(InjectionPoint p) {
    switch (p) {
        case IP::message_out: return "message_out";
        case IP::world: return "world";
        case IP::sensor_in: return "sensor_in";
        case IP::clock: return "clock";
    }
    return "?";
}

std::span<const AttackInfo> attack_catalog() { return kCatalog; }
const AttackInfo& attack_info(AttackId id) { return kCatalog[static_cast<std::size_t>(id)]; }

double AttackSpec::number(const char* name, double fallback) const {
    auto it = params.find(name);
    if (it == params.end()) return fallback;
    if (!it->is_number()) throw AttackConfigError(std::string(to_string(id)) + ": parameter " + name + " must be a number");
    return it->get<double>();
}

namespace {

Vec2 to_vec(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw AttackConfigError(what + " must be [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

Vec2 AttackSpec::vec(const char* name, Vec2 fallback) const {
    auto it = params.find(name);
    if (it == params.end()) return fallback;
    return to_vec(*it, std::string(to_string(id)) + ": parameter " + name);
}

StationId pseudonym_station(const AttackSpec& spec) {
    return static_cast<StationId>(spec.number("pseudonym", static_cast<double>(spec.attacker) + 50000.0));
}

void validate_attack(const AttackSpec& spec, const WorldState& world) {
    const std::string id(to_string(spec.id));
    const auto& info = attack_info(spec.id);
    if (spec.stop <= spec.start) throw AttackConfigError(id + ": stop must be after start");
    auto need = [&](const char* key) {
        if (!spec.params.contains(key)) throw AttackConfigError(id + ": missing parameter " + std::string(key));
    };
    auto station_exists = [&](StationId s) { return world.station_entity(s) != nullptr; };

    if (info.point == IP::message_out && spec.id != AttackId::T3_C && !station_exists(spec.attacker))
        throw AttackConfigError(id + ": attacker station " + std::to_string(spec.attacker) + " does not exist");
    const bool needs_victim = info.point == IP::sensor_in || info.point == IP::clock ||
                              spec.id == AttackId::T3_C || spec.id == AttackId::FIG4_EEBL;
    if (needs_victim && (!spec.victim || !station_exists(*spec.victim)))
        throw AttackConfigError(id + ": requires an existing victim station");

    switch (spec.id) {
        case AttackId::T3_D:
        case AttackId::T4_C:
            need("position");
            (void)spec.vec("position", {});
            break;
        case AttackId::T3_F: {
            need("waypoints");
            const auto& w = spec.params["waypoints"];
            if (!w.is_array() || w.empty()) throw AttackConfigError(id + ": waypoints must be a non-empty list");
            for (const auto& p : w) (void)to_vec(p, id + ": waypoint");
            break;
        }
        case AttackId::T3_G:
        case AttackId::T4_A: {
            need("target");
            const auto target = static_cast<EntityId>(spec.number("target", 0));
            const Entity* e = world.find(target);
            if (e == nullptr) throw AttackConfigError(id + ": target entity does not exist");
            if (spec.id == AttackId::T4_A && e->is_connected())
                throw AttackConfigError(id + ": target must be a non-connected entity");
            break;
        }
        case AttackId::T3_L:
            if (spec.params.contains("targets") && !spec.params["targets"].is_array())
                throw AttackConfigError(id + ": targets must be a list of entity ids");
            break;
        case AttackId::T3_M:
            if (spec.number("factor", 20) < 2) throw AttackConfigError(id + ": factor must be >= 2");
            break;
        case AttackId::T3_C:
            if (spec.number("segment_objects", 4) < 1) throw AttackConfigError(id + ": segment_objects must be >= 1");
            break;
        case AttackId::FIG4_EEBL:
            if (spec.params.contains("ghosts")) {
                const auto& g = spec.params["ghosts"];
                if (!g.is_array()) throw AttackConfigError(id + ": ghosts must be a list of [x, y]");
                for (const auto& p : g) (void)to_vec(p, id + ": ghost");
            }
            break;
        default:
            break;
    }
    (void)spec.number("magnitude_deg", 0);
    (void)spec.number("offset_ms", 0);
    (void)spec.vec("bias", {});
}

namespace {

CpmMessage skeleton_cpm(const OutgoingContext& ctx) {
    CpmMessage m;
    m.header.station_id = ctx.self->id;
    m.management.generation_time = ctx.now + ctx.self->clock_offset;
    m.management.reference_position = ctx.self->reported.position;
    m.management.station_type = ctx.self->type;
    m.station_data = StationDataContainer{ctx.self->speed, normalize_heading(ctx.self->reported.heading)};
    std::vector<SensorInformation> info;
    for (const auto& s : ctx.sensors) info.push_back(to_sensor_information(s));
    m.sensor_info = info;
    m.perceived_objects = std::vector<PerceivedObject>{};
    return m;
}

CpmMessage& first_cpm(Outgoing& out, const OutgoingContext& ctx) {
    for (auto& m : out.messages)
        if (auto* c = std::get_if<CpmMessage>(&m)) return *c;
    out.messages.emplace_back(skeleton_cpm(ctx));
    return std::get<CpmMessage>(out.messages.back());
}

std::vector<PerceivedObject>& objects_of(CpmMessage& m) {
    if (!m.perceived_objects) m.perceived_objects = std::vector<PerceivedObject>{};
    return *m.perceived_objects;
}

PerceivedObject fake_object(const CpmMessage& m, Vec2 world, double speed, double heading, std::uint32_t id) {
    PerceivedObject po;
    po.object_id = id;
    po.relative_position = world - m.management.reference_position;
    po.speed = speed;
    po.heading = normalize_heading(heading);
    po.length = 4.5;
    po.width = 1.8;
    po.classification = ObjectClass::other;
    po.time_of_measurement = m.management.generation_time;
    po.confidence = 0.9;
    return po;
}

const Entity& entity_of(const WorldState& w, StationId s) {
    const Entity* e = w.station_entity(s);
    if (e == nullptr) throw UnknownStation(s);
    return *e;
}

void fig4(const AttackSpec& spec, AttackState& state, Outgoing& out, const OutgoingContext& ctx) {
    const auto tl = run_eebl_composite(spec);
    const Entity& victim = entity_of(*ctx.world, *spec.victim);
    CpmMessage& cpm = first_cpm(out, ctx);
    auto& objs = objects_of(cpm);
    const Pose vp = victim.pose;
    if (ctx.now < tl.step2_start) {
        std::vector<Vec2> ghosts = {{3.5, 40.0}, {-3.5, 55.0}};
        if (spec.params.contains("ghosts")) {
            ghosts.clear();
            for (const auto& g : spec.params["ghosts"]) ghosts.push_back(to_vec(g, "ghost"));
        }
        std::uint32_t gid = 60000;
        for (const auto& g : ghosts) {
            const Vec2 pos = vp.position + rotate_body_to_world(g, vp.heading);
            objs.push_back(fake_object(cpm, pos, victim.speed, vp.heading, gid++));
        }
        if (state.injected++ == 0) out.annotations.push_back("fig4 step1: ghost vehicles");
        return;
    }
    const Vec2 ahead = vp.position + heading_vector(vp.heading) * spec.number("ahead_m", 30.0);
    objs.push_back(fake_object(cpm, ahead, 0.0, vp.heading, 60100));
    DenmMessage denm;
    denm.header.station_id = ctx.self->id;
    denm.event_type = EventType::emergency_brake;
    denm.event_position = ahead;
    denm.timestamp = ctx.now + ctx.self->clock_offset;
    out.messages.emplace_back(denm);
    if (!state.anchor) {
        state.anchor = ahead;
        out.annotations.push_back("fig4 step2: emergency brake DENM with stationary ghost");
        out.annotations.push_back("fig4 step3: conflict window " + std::to_string(tl.conflict_start) + ".." +
                                  std::to_string(tl.conflict_end));
    }
}

}  // namespace

EeblTimeline run_eebl_composite(const AttackSpec& spec) {
    EeblTimeline tl;
    tl.step1_start = spec.start;
    tl.step2_start = spec.start + static_cast<TimeMs>(spec.number("step1_ms", 2000));
    tl.conflict_start = tl.step2_start;
    tl.conflict_end = spec.stop;
    return tl;
}

void inject_message_out(const AttackSpec& spec, AttackState& state, Outgoing& out, const OutgoingContext& ctx) {
    if (!spec.injects() || !spec.active_at(ctx.now)) return;
    const Pose self_pose = ctx.self->reported;
    switch (spec.id) {
        case AttackId::T3_A: {
            CpmMessage& cpm = first_cpm(out, ctx);
            auto& objs = objects_of(cpm);
            const auto target = static_cast<std::size_t>(
                spec.number("count", static_cast<double>(ctx.trackable_limit + 1)));
            std::uint32_t id = 50000;
            for (int ring = 0; objs.size() < target; ++ring) {
                const double r = 10.0 + 5.0 * (ring % 18);
                for (int k = 0; k < 15 && objs.size() < target; ++k) {
                    const double a = -49.0 + 7.0 * k + (ring / 18) * 3.0;
                    const Vec2 pos = self_pose.position + heading_vector(self_pose.heading + a) * r;
                    objs.push_back(fake_object(cpm, pos, 0.0, self_pose.heading, id++));
                }
            }
            break;
        }
        case AttackId::T3_B: {
            CpmMessage& cpm = first_cpm(out, ctx);
            std::uint32_t reused = 1;
            TimeMs best = -1;
            for (const auto& [tid, t] : ctx.ldm->tracks())
                if (t.last_included_in_cpm && t.last_included_in_cpm->time > best) {
                    best = t.last_included_in_cpm->time;
                    reused = tid;
                }
            auto& objs = objects_of(cpm);
            std::erase_if(objs, [reused](const PerceivedObject& o) { return o.object_id == reused; });
            const Vec2 body{spec.number("lateral_m", 0.0), spec.number("ahead_m", 35.0)};
            const Vec2 pos = self_pose.position + rotate_body_to_world(body, self_pose.heading);
            objs.push_back(fake_object(cpm, pos, ctx.self->speed, self_pose.heading, reused));
            break;
        }
        case AttackId::T3_C: {
            std::size_t cpms = 0;
            for (const auto& m : out.messages) cpms += std::holds_alternative<CpmMessage>(m);
            if (cpms < 2) break;
            for (auto it = out.messages.end(); it != out.messages.begin();) {
                --it;
                if (std::holds_alternative<CpmMessage>(*it)) {
                    out.messages.erase(it);
                    break;
                }
            }
            break;
        }
        case AttackId::T3_H: {
            CpmMessage& cpm = first_cpm(out, ctx);
            const double from = spec.number("from_range", 100.0);
            const double to = spec.number("to_range", 200.0);
            auto& info = *cpm.sensor_info;
            if (info.empty()) break;
            auto it = std::find_if(info.begin(), info.end(),
                                   [from](const SensorInformation& s) { return std::abs(s.range - from) < 0.5; });
            if (it == info.end()) it = info.begin();
            it->range = to;
            const SensorPose sp = sensor_pose(self_pose, it->mount_offset);
            const Vec2 pos = sp.origin + heading_vector(sp.boresight) * spec.number("object_distance", 190.0);
            objects_of(cpm).push_back(fake_object(cpm, pos, ctx.self->speed, self_pose.heading, 50001));
            break;
        }
        case AttackId::T3_I: {
            CpmMessage& cpm = first_cpm(out, ctx);
            auto& info = *cpm.sensor_info;
            if (info.empty()) break;
            info.front().range = spec.number("declared_range", 1.0);
            const SensorPose sp = sensor_pose(self_pose, info.front().mount_offset);
            const Vec2 pos = sp.origin + heading_vector(sp.boresight) * spec.number("object_distance", 5000.0);
            objects_of(cpm).push_back(fake_object(cpm, pos, 0.0, self_pose.heading, 50002));
            break;
        }
        case AttackId::T3_K: {
            CpmMessage& cpm = first_cpm(out, ctx);
            const Entity& me = entity_of(*ctx.world, ctx.self->id);
            std::vector<FreeSpaceAddendum> fs;
            for (const auto& s : ctx.sensors) {
                FreeSpaceAddendum a;
                a.free_space_id = static_cast<std::uint8_t>(fs.size());
                const Polygon empty_world = free_space_polygon(sensor_pose(me.pose, s.mount_offset), s, {}, 36);
                for (const auto& p : empty_world) {
                    const Vec2 rel = p - me.pose.position;
                    a.polygon.push_back({std::round(rel.x * 1000.0) / 1000.0, std::round(rel.y * 1000.0) / 1000.0});
                }
                a.sensor_ids = std::vector<std::uint8_t>{s.sensor_id};
                if (is_simple_polygon(a.polygon)) fs.push_back(std::move(a));
            }
            cpm.free_space = std::move(fs);
            break;
        }
        case AttackId::T3_M: {
            const auto factor = static_cast<int>(spec.number("factor", 20.0));
            CpmMessage base = first_cpm(out, ctx);
            const TimeMs spacing = std::max<TimeMs>(1, ctx.tick / factor);
            for (int k = 1; k < factor; ++k) {
                CpmMessage copy = base;
                copy.management.generation_time -= k * spacing;
                out.messages.emplace_back(std::move(copy));
            }
            break;
        }
        case AttackId::T4_A: {
            const Entity* target = ctx.world->find(static_cast<EntityId>(spec.number("target", 0)));
            if (target == nullptr) break;
            CamMessage cam;
            cam.header.station_id = pseudonym_station(spec);
            cam.position = target->pose.position;
            cam.speed = target->speed;
            cam.heading = normalize_heading(target->pose.heading);
            cam.timestamp = ctx.now + ctx.self->clock_offset;
            out.messages.emplace_back(cam);
            break;
        }
        case AttackId::FIG4_EEBL:
            fig4(spec, state, out, ctx);
            break;
        default:
            break;
    }
}

void setup_world(const AttackSpec& spec, std::size_t index, WorldState& world) {
    if (spec.id != AttackId::T3_D && spec.id != AttackId::T3_F && spec.id != AttackId::T4_C) return;
    Entity e;
    e.id = decoy_id(index);
    e.kind = EntityKind::decoy;
    e.visible = false;
    if (spec.id == AttackId::T4_C) {
        e.pose = {spec.vec("position", {}), normalize_heading(spec.number("heading", 0.0))};
        e.length = spec.number("length", 12.0);
        e.width = spec.number("width", 2.5);
        e.speed = spec.number("speed", 0.0);
        e.classification = ObjectClass::other;
    } else {
        e.length = 0.5;
        e.width = 0.5;
        e.classification = ObjectClass::person_or_animal;
        if (spec.id == AttackId::T3_D) {
            e.pose = {spec.vec("position", {}), 0.0};
        } else {
            for (const auto& p : spec.params["waypoints"]) e.waypoints.push_back(to_vec(p, "waypoint"));
            e.pose.position = e.waypoints.front();
            e.loop_waypoints = true;
            e.speed = spec.number("speed", 6.0);
            if (e.waypoints.size() > 1) e.pose.heading = bearing_of(e.waypoints[1] - e.waypoints[0]);
            e.next_waypoint = e.waypoints.size() > 1 ? 1 : 0;
        }
    }
    if (spec.params.contains("waypoints") && spec.id == AttackId::T4_C) {
        for (const auto& p : spec.params["waypoints"]) e.waypoints.push_back(to_vec(p, "waypoint"));
    }
    world.add_entity(std::move(e));
}

void inject_world(const AttackSpec& spec, std::size_t index, WorldState& world) {
    const bool active = spec.injects() && spec.active_at(world.time);
    switch (spec.id) {
        case AttackId::T3_D:
        case AttackId::T3_F:
        case AttackId::T4_C:
            if (Entity* e = world.find(decoy_id(index))) e->visible = active;
            break;
        case AttackId::T3_G: {
            Entity* e = world.find(static_cast<EntityId>(spec.number("target", 0)));
            if (e == nullptr) break;
            if (!active) {
                e->visible = true;
                break;
            }
            const auto period = std::max<TimeMs>(1, static_cast<TimeMs>(spec.number("period_ms", 400)));
            e->visible = ((world.time - spec.start) / period) % 2 == 1;
            break;
        }
        default:
            break;
    }
}

void inject_sensor_in(const AttackSpec& spec, TimeMs now, std::vector<SensorReading>& readings, StationSelf& self) {
    if (!spec.injects() || !spec.active_at(now)) return;
    switch (spec.id) {
        case AttackId::T3_E: {
            const double mag = spec.number("magnitude_deg", 10.0);
            for (auto& r : readings)
                if (r.sensor_type == SensorType::camera) r.heading = normalize_heading(r.heading + mag);
            break;
        }
        case AttackId::T3_L: {
            std::vector<EntityId> targets;
            if (spec.params.contains("targets"))
                for (const auto& t : spec.params["targets"]) targets.push_back(t.get<EntityId>());
            std::erase_if(readings, [&](const SensorReading& r) {
                if (r.sensor_type != SensorType::lidar && r.sensor_type != SensorType::camera) return false;
                return targets.empty() || std::find(targets.begin(), targets.end(), r.entity_id) != targets.end();
            });
            break;
        }
        case AttackId::T3_N:
            self.reported.position += spec.vec("bias", {0.0, 20.0});
            break;
        default:
            break;
    }
}

TimeMs inject_clock(const AttackSpec& spec, TimeMs now) {
    if (spec.id != AttackId::T4_B || !spec.injects() || !spec.active_at(now)) return 0;
    return static_cast<TimeMs>(spec.number("offset_ms", 500.0));
}

}  // namespace cpsim
