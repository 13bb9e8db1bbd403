#pragma once

// Ground-truth planar scene. Headings are degrees clockwise from north.

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cpsim/geometry.hpp"
#include "cpsim/hash.hpp"
#include "cpsim/messages.hpp"

namespace cpsim {

enum class EntityKind { connected_vehicle, non_connected_vehicle, pedestrian, animal, rsu, decoy };

std::string_view to_string(EntityKind);
std::optional<EntityKind> entity_kind_from_string(std::string_view);
ObjectClass default_classification(EntityKind);

using EntityId = std::uint32_t;

struct Pose {
    Vec2 position;
    double heading = 0.0;

    friend bool operator==(const Pose&, const Pose&) = default;
};

struct Entity {
    EntityId id = 0;
    EntityKind kind = EntityKind::non_connected_vehicle;
    Pose pose;
    double speed = 0.0;
    double length = 4.5;
    double width = 1.8;
    std::optional<StationId> station_id;
    ObjectClass classification = ObjectClass::other;

    // Scripted motion. Waypoints take precedence over yaw rate.
    std::vector<Vec2> waypoints;
    std::size_t next_waypoint = 0;
    bool loop_waypoints = false;
    double acceleration = 0.0;  // m/s^2
    double max_speed = 70.0;
    double yaw_rate = 0.0;  // deg/s

    bool visible = true;

    OrientedRect footprint() const { return {pose.position, pose.heading, length, width}; }
    bool is_connected() const { return station_id.has_value(); }
};

struct SensorSpec {
    std::uint8_t sensor_id = 0;
    SensorType sensor_type = SensorType::lidar;
    double range = 100.0;
    double aperture = 120.0;
    Vec2 mount_offset;

    friend bool operator==(const SensorSpec&, const SensorSpec&) = default;
};

SensorInformation to_sensor_information(const SensorSpec& s);

struct NoiseModel {
    double sigma_pos = 0.2;
    double sigma_speed = 0.1;
    double truncation_sigmas = 3.0;
};

struct WorldState {
    TimeMs time = 0;
    std::vector<Entity> entities;  // sorted by id
    std::map<StationId, std::vector<SensorSpec>> sensors;
    std::uint64_t rng_seed = 0;
    NoiseModel noise;

    const Entity* find(EntityId id) const;
    Entity* find(EntityId id);
    const Entity* station_entity(StationId station) const;
    /// Throws std::invalid_argument on duplicate entity ids.
    void validate() const;
    void add_entity(Entity e);
};

/// Deterministic digest of the dynamic state (time, poses, speeds, visibility).
Digest state_hash(const WorldState& w);

/// Advances every entity under its scripted motion. Requires dt > 0.
WorldState step(const WorldState& world, TimeMs dt);
void step_in_place(WorldState& world, TimeMs dt);

struct SensorPose {
    Vec2 origin;
    double boresight = 0.0;
};

SensorPose sensor_pose(const Pose& station, Vec2 mount_offset);

/// Boundary inclusive: distance <= range and |bearing - boresight| <= aperture / 2.
bool in_sensor_area(const SensorPose& pose, double range, double aperture, Vec2 point);
inline bool in_sensor_area(const SensorPose& pose, const SensorSpec& s, Vec2 point) {
    return in_sensor_area(pose, s.range, s.aperture, point);
}

struct SensorReading {
    EntityId entity_id = 0;
    Vec2 relative_position;  // world-aligned offset from the observer's reference position
    double speed = 0.0;
    double heading = 0.0;
    double length = 0.0;
    double width = 0.0;
    ObjectClass classification = ObjectClass::other;
    std::uint8_t sensor_id = 0;
    SensorType sensor_type = SensorType::lidar;

    friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

class UnknownStation : public std::invalid_argument {
public:
    explicit UnknownStation(StationId id)
        : std::invalid_argument("unknown station " + std::to_string(id)), id_(id) {}
    StationId id() const { return id_; }

private:
    StationId id_;
};

/// Segment from -> to is clear of every obstacle rectangle.
bool line_of_sight(Vec2 from, Vec2 to, std::span<const OrientedRect> obstacles);

/// Readings of every visible entity that some sensor covers with an unblocked
/// line of sight to its footprint center. One reading per entity; noise is a
/// pure function of (seed, time, station, entity).
std::vector<SensorReading> sense(StationId station, const WorldState& world);

/// Free-space polygon for one sensor in world coordinates. Rays are cast
/// uniformly across the aperture, plus rays grazing each obstacle's angular
/// extent, each ending at the first obstacle hit or at the sensor range.
Polygon free_space_polygon(const SensorPose& pose, const SensorSpec& spec,
                           std::span<const OrientedRect> obstacles, int ray_count);

struct SensorFreeSpace {
    std::uint8_t sensor_id = 0;
    Polygon polygon;  // world coordinates
};

/// One polygon per sensor of the station. Requires ray_count >= 16.
std::vector<SensorFreeSpace> free_space(StationId station, const WorldState& world, int ray_count);

/// Footprints of visible entities other than `exclude`.
std::vector<OrientedRect> obstacle_footprints(const WorldState& world, std::optional<EntityId> exclude);

}  // namespace cpsim
