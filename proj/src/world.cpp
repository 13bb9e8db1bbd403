#include "cpsim/world.hpp"

#include <algorithm>
#include <random>

namespace cpsim {

std::string_view to_string(EntityKind k) {
    switch (k) {
        case EntityKind::connected_vehicle: return "connected_vehicle";
        case EntityKind::non_connected_vehicle: return "non_connected_vehicle";
        case EntityKind::pedestrian: return "pedestrian";
        case EntityKind::animal: return "animal";
        case EntityKind::rsu: return "rsu";
        case EntityKind::decoy: return "decoy";
    }
    return "?";
}

std::optional<EntityKind> entity_kind_from_string(std::string_view s) {
    for (auto k : {EntityKind::connected_vehicle, EntityKind::non_connected_vehicle, EntityKind::pedestrian,
                   EntityKind::animal, EntityKind::rsu, EntityKind::decoy})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

ObjectClass default_classification(EntityKind k) {
    return (k == EntityKind::pedestrian || k == EntityKind::animal) ? ObjectClass::person_or_animal
                                                                    : ObjectClass::other;
}

SensorInformation to_sensor_information(const SensorSpec& s) {
    return {s.sensor_id, s.sensor_type, s.range, s.aperture, s.mount_offset};
}

const Entity* WorldState::find(EntityId id) const {
    auto it = std::lower_bound(entities.begin(), entities.end(), id,
                               [](const Entity& e, EntityId v) { return e.id < v; });
    return (it != entities.end() && it->id == id) ? &*it : nullptr;
}

Entity* WorldState::find(EntityId id) {
    return const_cast<Entity*>(static_cast<const WorldState*>(this)->find(id));
}

const Entity* WorldState::station_entity(StationId station) const {
    for (const auto& e : entities)
        if (e.station_id == station) return &e;
    return nullptr;
}

void WorldState::validate() const {
    for (std::size_t i = 1; i < entities.size(); ++i)
        if (entities[i - 1].id >= entities[i].id)
            throw std::invalid_argument("entity ids must be unique and sorted");
}

void WorldState::add_entity(Entity e) {
    if (find(e.id) != nullptr) throw std::invalid_argument("duplicate entity id " + std::to_string(e.id));
    auto it = std::lower_bound(entities.begin(), entities.end(), e.id,
                               [](const Entity& x, EntityId v) { return x.id < v; });
    entities.insert(it, std::move(e));
}

Digest state_hash(const WorldState& w) {
    Sha256Stream s;
    s.update_pod(w.time);
    for (const auto& e : w.entities) {
        s.update_pod(e.id);
        const std::int64_t q[4] = {std::llround(e.pose.position.x * 1000), std::llround(e.pose.position.y * 1000),
                                   std::llround(e.pose.heading * 1000), std::llround(e.speed * 1000)};
        s.update_pod(q);
        const std::uint8_t vis = e.visible ? 1 : 0;
        s.update_pod(vis);
    }
    return s.peek();
}

namespace {

void advance(Entity& e, double dt_s) {
    e.speed = std::clamp(e.speed + e.acceleration * dt_s, 0.0, e.max_speed);
    double remaining = e.speed * dt_s;
    while (remaining > 0.0 && e.next_waypoint < e.waypoints.size()) {
        const Vec2 target = e.waypoints[e.next_waypoint];
        const Vec2 d = target - e.pose.position;
        const double dist = norm(d);
        if (dist > 1e-9) e.pose.heading = bearing_of(d);
        if (dist <= remaining) {
            e.pose.position = target;
            remaining -= dist;
            ++e.next_waypoint;
            if (e.loop_waypoints && e.next_waypoint == e.waypoints.size()) e.next_waypoint = 0;
            if (e.loop_waypoints && dist < 1e-9 && e.waypoints.size() == 1) break;
        } else {
            e.pose.position += d * (remaining / dist);
            remaining = 0.0;
        }
    }
    if (e.next_waypoint >= e.waypoints.size()) {
        e.pose.heading = normalize_heading(e.pose.heading + e.yaw_rate * dt_s);
        e.pose.position += heading_vector(e.pose.heading) * remaining;
    }
}

}  // namespace

void step_in_place(WorldState& world, TimeMs dt) {
    if (dt <= 0) throw std::invalid_argument("step requires dt > 0");
    const double dt_s = static_cast<double>(dt) / 1000.0;
    for (auto& e : world.entities) advance(e, dt_s);
    world.time += dt;
}

WorldState step(const WorldState& world, TimeMs dt) {
    WorldState next = world;
    step_in_place(next, dt);
    return next;
}

SensorPose sensor_pose(const Pose& station, Vec2 mount_offset) {
    return {station.position + rotate_body_to_world(mount_offset, station.heading), station.heading};
}

bool in_sensor_area(const SensorPose& pose, double range, double aperture, Vec2 point) {
    const Vec2 d = point - pose.origin;
    const double dist = norm(d);
    if (dist > range) return false;
    if (aperture >= 360.0 || dist == 0.0) return true;
    return std::abs(angle_diff(bearing_of(d), pose.boresight)) <= aperture / 2.0;
}

bool line_of_sight(Vec2 from, Vec2 to, std::span<const OrientedRect> obstacles) {
    for (const auto& r : obstacles)
        if (segment_hits_rect(from, to, r)) return false;
    return true;
}

std::vector<OrientedRect> obstacle_footprints(const WorldState& world, std::optional<EntityId> exclude) {
    std::vector<OrientedRect> out;
    out.reserve(world.entities.size());
    for (const auto& e : world.entities)
        if (e.visible && e.id != exclude) out.push_back(e.footprint());
    return out;
}

namespace {

double truncated_normal(std::mt19937_64& rng, double sigma, double cut) {
    if (sigma <= 0.0) return 0.0;
    std::normal_distribution<double> nd(0.0, sigma);
    for (int i = 0; i < 64; ++i) {
        const double v = nd(rng);
        if (std::abs(v) <= cut * sigma) return v;
    }
    return 0.0;
}

}  // namespace

std::vector<SensorReading> sense(StationId station, const WorldState& world) {
    const Entity* self = world.station_entity(station);
    auto sit = world.sensors.find(station);
    if (self == nullptr || sit == world.sensors.end()) throw UnknownStation(station);
    const auto& specs = sit->second;

    std::vector<const Entity*> others;
    others.reserve(world.entities.size());
    for (const auto& e : world.entities)
        if (e.visible && e.id != self->id) others.push_back(&e);

    std::vector<SensorPose> poses;
    poses.reserve(specs.size());
    for (const auto& s : specs) poses.push_back(sensor_pose(self->pose, s.mount_offset));

    std::vector<SensorReading> out;
    for (const Entity* target : others) {
        const Vec2 center = target->pose.position;
        for (std::size_t si = 0; si < specs.size(); ++si) {
            if (!in_sensor_area(poses[si], specs[si], center)) continue;
            bool blocked = false;
            for (const Entity* o : others) {
                if (o == target) continue;
                if (segment_hits_rect(poses[si].origin, center, o->footprint())) {
                    blocked = true;
                    break;
                }
            }
            if (blocked) continue;

            std::mt19937_64 rng(mix_seed(mix_seed(world.rng_seed, static_cast<std::uint64_t>(world.time)),
                                         (static_cast<std::uint64_t>(station) << 32) | target->id));
            const auto& nm = world.noise;
            Vec2 noisy = center + Vec2{truncated_normal(rng, nm.sigma_pos, nm.truncation_sigmas),
                                       truncated_normal(rng, nm.sigma_pos, nm.truncation_sigmas)};
            if (!in_sensor_area(poses[si], specs[si], noisy)) noisy = center;
            const double speed =
                std::max(0.0, target->speed + truncated_normal(rng, nm.sigma_speed, nm.truncation_sigmas));

            SensorReading r;
            r.entity_id = target->id;
            r.relative_position = noisy - self->pose.position;
            r.speed = speed;
            r.heading = target->pose.heading;
            r.length = target->length;
            r.width = target->width;
            r.classification = target->classification;
            r.sensor_id = specs[si].sensor_id;
            r.sensor_type = specs[si].sensor_type;
            out.push_back(r);
            break;
        }
    }
    return out;
}

Polygon free_space_polygon(const SensorPose& pose, const SensorSpec& spec, std::span<const OrientedRect> all_obstacles,
                           int ray_count) {
    std::vector<OrientedRect> obstacles;
    for (const auto& r : all_obstacles)
        if (distance(r.center, pose.origin) - 0.5 * std::hypot(r.length, r.width) <= spec.range) obstacles.push_back(r);
    const bool full_circle = spec.aperture >= 360.0;
    const double half = spec.aperture / 2.0;
    std::vector<double> rel;  // angles relative to boresight
    rel.reserve(static_cast<std::size_t>(ray_count) + obstacles.size() * 4);
    if (full_circle) {
        for (int i = 0; i < ray_count; ++i) rel.push_back(-180.0 + 360.0 * i / ray_count);
    } else {
        for (int i = 0; i < ray_count; ++i) rel.push_back(-half + spec.aperture * i / (ray_count - 1));
    }

    // Grazing rays just inside and outside each obstacle's angular extent so
    // shadows are captured even for objects narrower than the ray spacing.
    constexpr double graze = 0.05;
    for (const auto& r : obstacles) {
        const Vec2 d = r.center - pose.origin;
        if (r.contains(pose.origin)) continue;
        const double center_rel = angle_diff(bearing_of(d), pose.boresight);
        double lo = 1e9;
        double hi = -1e9;
        for (const auto& c : r.corners()) {
            const double a = center_rel + angle_diff(bearing_of(c - pose.origin), bearing_of(d));
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
        for (double a : {lo - graze, lo + graze, hi - graze, hi + graze}) {
            if (full_circle) {
                rel.push_back(angle_diff(a, 0.0) == 180.0 ? -180.0 : angle_diff(a, 0.0));
            } else if (a > -half && a < half) {
                rel.push_back(a);
            }
        }
    }
    std::sort(rel.begin(), rel.end());
    rel.erase(std::unique(rel.begin(), rel.end(), [](double a, double b) { return std::abs(a - b) < 1e-7; }),
              rel.end());

    struct RayHit {
        double angle;
        double length;
    };
    std::vector<RayHit> hits;
    hits.reserve(rel.size());
    for (double a : rel) {
        const Vec2 dir = heading_vector(pose.boresight + a);
        const Vec2 end = pose.origin + dir * spec.range;
        double t_min = 1.0;
        for (const auto& r : obstacles) {
            if (auto t = segment_rect_entry(pose.origin, end, r); t && *t < t_min) t_min = *t;
        }
        hits.push_back({a, std::max(t_min * spec.range, 0.05)});
    }

    // Drop vertices too close to their predecessor to survive millimeter
    // quantization with their angular order intact.
    std::vector<RayHit> kept;
    kept.reserve(hits.size());
    for (const auto& h : hits) {
        if (!kept.empty()) {
            const auto& p = kept.back();
            const double sep = std::min(p.length, h.length) * deg2rad(h.angle - p.angle);
            if (sep < 0.005) continue;
        }
        kept.push_back(h);
    }
    if (full_circle && kept.size() > 1) {
        const auto& f = kept.front();
        const auto& l = kept.back();
        if (std::min(f.length, l.length) * deg2rad(f.angle + 360.0 - l.angle) < 0.005) kept.pop_back();
    }

    Polygon poly;
    poly.reserve(kept.size() + 1);
    if (!full_circle) poly.push_back(pose.origin);
    for (const auto& h : kept) poly.push_back(pose.origin + heading_vector(pose.boresight + h.angle) * h.length);
    return poly;
}

std::vector<SensorFreeSpace> free_space(StationId station, const WorldState& world, int ray_count) {
    if (ray_count < 16) throw std::invalid_argument("free_space requires ray_count >= 16");
    const Entity* self = world.station_entity(station);
    auto sit = world.sensors.find(station);
    if (self == nullptr || sit == world.sensors.end()) throw UnknownStation(station);
    const auto obstacles = obstacle_footprints(world, self->id);
    std::vector<SensorFreeSpace> out;
    for (const auto& s : sit->second)
        out.push_back({s.sensor_id, free_space_polygon(sensor_pose(self->pose, s.mount_offset), s, obstacles, ray_count)});
    return out;
}

}  // namespace cpsim
