#pragma once

// Collective Perception Service of one station: the local dynamic map with
// cooperative fusion, CPM generation rules, redundancy mitigation, channel
// busy ratio accounting and the EEBL consumer.

#include <deque>
#include <map>
#include <set>
#include <span>

#include "cpsim/codec.hpp"
#include "cpsim/security.hpp"
#include "cpsim/world.hpp"

namespace cpsim {

enum class TrackKind : std::uint8_t { connected, non_connected };

enum TrackSource : std::uint8_t {
    source_local_sensor = 1,
    source_cpm = 2,
    source_cam = 4,
};

struct InclusionSnapshot {
    TimeMs time = 0;
    Vec2 position;
    double speed = 0.0;
    double heading = 0.0;
};

struct Track {
    std::uint32_t object_id = 0;
    TrackKind kind = TrackKind::non_connected;
    Vec2 position;
    double speed = 0.0;
    double heading = 0.0;
    double length = 4.5;
    double width = 1.8;
    ObjectClass classification = ObjectClass::other;
    TimeMs last_update = 0;
    std::optional<InclusionSnapshot> last_included_in_cpm;
    std::uint8_t sources = 0;

    std::optional<StationId> station_id;  // connected tracks
    std::optional<EntityId> local_entity;  // identity from the on-board tracker
    TimeMs last_local_update = -1;
    std::set<CertId> reporters;  // V2X senders that contributed

    bool has(TrackSource s) const { return (sources & s) != 0; }
    bool v2x_only() const { return !has(source_local_sensor); }
    Vec2 predicted(TimeMs now) const {
        return extrapolate(position, speed, heading, static_cast<double>(now - last_update));
    }
    OrientedRect footprint_at(TimeMs now) const { return {predicted(now), heading, length, width}; }
};

class LocalDynamicMap {
public:
    explicit LocalDynamicMap(StationId owner = 0) : owner_(owner) {}

    StationId owner() const { return owner_; }
    const std::map<std::uint32_t, Track>& tracks() const { return tracks_; }
    std::size_t size() const { return tracks_.size(); }

    Track& create(Track t);
    Track* find(std::uint32_t object_id);
    const Track* find(std::uint32_t object_id) const;
    Track* find_station(StationId station);
    Track* find_local(EntityId entity);
    const Track* find_local(EntityId entity) const;
    void erase(std::uint32_t object_id) { tracks_.erase(object_id); }

    /// Nearest track (after prediction to now) within gate that satisfies the filter.
    template <typename Pred>
    Track* nearest(Vec2 at, TimeMs now, double gate, Pred&& accept) {
        Track* best = nullptr;
        double best_d = gate;
        for (auto& [id, t] : tracks_) {
            if (!accept(t)) continue;
            const double d = distance(t.predicted(now), at);
            if (d <= best_d) {
                if (best == nullptr || d < best_d) {
                    best = &t;
                    best_d = d;
                }
            }
        }
        return best;
    }

    /// Merges tracks closer than gate, except pairs of distinct on-board tracks.
    void merge_duplicates(TimeMs now, double gate);

    /// Removes every track whose V2X evidence came only from `cert`.
    std::size_t purge_reporter(CertId cert);

    bool seen_envelope(const SignedEnvelope& e) const;
    void remember_envelope(const SignedEnvelope& e, TimeMs now);
    void forget_envelopes_before(TimeMs t);

    Digest hash() const;

private:
    StationId owner_;
    std::map<std::uint32_t, Track> tracks_;
    std::uint32_t next_object_id_ = 1;
    std::map<std::pair<CertId, SignatureTag>, TimeMs> seen_;
};

struct FusionParams {
    double gate = 3.0;
    double merge_distance = 1.5;  // adjacent lanes sit closer than the association gate
    Vec2 ego_position;  // own position; reports of ourselves are ignored
    StationId ego_station = 0;
};

/// Applies on-board readings: updates tracks keyed by tracker identity,
/// adopts matching V2X-only tracks, creates new ones otherwise.
void update_from_readings(LocalDynamicMap& ldm, std::span<const SensorReading> readings, Vec2 ego_position,
                          TimeMs now, double gate);

enum class IngestStatus { accepted, duplicate, rejected, decode_error, wrong_type };

struct IngestionRecord {
    IngestStatus status = IngestStatus::rejected;
    VerifyStatus verify = VerifyStatus::accept;
    std::optional<DecodeErrorKind> decode_error;
    std::size_t merged = 0;
    std::size_t created = 0;
    std::optional<std::uint32_t> sender_track;
};

/// Fuses an already verified and decoded CPM.
IngestionRecord fuse_cpm(LocalDynamicMap& ldm, const CpmMessage& cpm, CertId cert, TimeMs now,
                         const FusionParams& params);
IngestionRecord fuse_cam(LocalDynamicMap& ldm, const CamMessage& cam, CertId cert, TimeMs now,
                         const FusionParams& params);

IngestionRecord ingest_cpm(LocalDynamicMap& ldm, const SignedEnvelope& envelope, const KeyRegistry& registry,
                           TimeMs now, const FusionParams& params);
IngestionRecord ingest_cam(LocalDynamicMap& ldm, const SignedEnvelope& envelope, const KeyRegistry& registry,
                           TimeMs now, const FusionParams& params);

/// Removes tracks idle for more than ttl. Requires ttl > 0.
std::size_t expire_tracks(LocalDynamicMap& ldm, TimeMs now, TimeMs ttl);

// ---------------------------------------------------------------------------
// Generation rules

struct GenerationThresholds {
    double position_delta = 4.0;  // m
    double speed_delta = 0.5;     // m/s
    double heading_delta = 4.0;   // deg
    TimeMs t_max = 1000;
    TimeMs person_group_interval = 500;
};

/// Dynamics-triggered inclusion test against the snapshot at last inclusion.
bool should_include(const Track& track, Vec2 position, double speed, double heading, TimeMs now,
                    const GenerationThresholds& th);
bool should_include(const Track& track, TimeMs now, const GenerationThresholds& th);

struct ForeignObject {
    TimeMs received = 0;
    TimeMs measured = 0;
    Vec2 position;  // world coordinates at `measured`
    double speed = 0.0;
    double heading = 0.0;
    StationId sender = 0;
};

/// Objects reported by other stations, kept for redundancy mitigation and
/// the cross-CPM excuse rule.
class ForeignObjectLog {
public:
    void record(const CpmMessage& cpm, TimeMs received);
    void prune(TimeMs before);
    std::span<const ForeignObject> entries() const { return {entries_.data(), entries_.size()}; }

    /// True when an object near `at` was reported by a station other than
    /// `excluding` and received within [since, until].
    bool reported_near(Vec2 at, TimeMs at_time, double gate, TimeMs since, TimeMs until,
                       std::optional<StationId> excluding) const;

private:
    std::vector<ForeignObject> entries_;
};

enum class RedundancyMode { frequency, dynamics, confidence };

struct RedundancyParams {
    bool enabled = false;
    RedundancyMode mode = RedundancyMode::frequency;
    double cbr_threshold = 0.6;
    TimeMs window = 500;
};

struct CpmCandidate {
    std::uint32_t object_id = 0;
    Vec2 world_position;
    PerceivedObject object;
};

/// Frequency-based redundancy mitigation. Identity when cbr <= threshold.
std::vector<CpmCandidate> redundancy_filter(std::vector<CpmCandidate> candidates, double cbr, double threshold,
                                            const ForeignObjectLog& log, TimeMs window, TimeMs now, double gate);

class CbrWindow {
public:
    CbrWindow(TimeMs window = 1000, double capacity_bytes = 1e6) : window_(window), capacity_(capacity_bytes) {}
    void record(TimeMs t, std::size_t bytes);
    /// Bytes observed in (now - window, now] divided by capacity, clamped to [0, 1].
    double ratio(TimeMs now) const;
    TimeMs window() const { return window_; }
    double capacity() const { return capacity_; }

private:
    TimeMs window_;
    double capacity_;
    std::deque<std::pair<TimeMs, std::size_t>> log_;
};

struct CpsParams {
    GenerationThresholds thresholds;
    std::size_t trackable_limit = 255;
    std::size_t segment_objects = 255;
    int free_space_rays = 36;
    bool include_free_space = true;
    double gate = 3.0;
    TimeMs track_ttl = 1500;
    TimeMs listen_window = 1000;
    RedundancyParams redundancy;
};

/// Self-knowledge of the generating station.
struct StationSelf {
    StationId id = 0;
    StationType type = StationType::vehicle;
    Pose reported;          // position fix written into the messages
    Vec2 sensing_origin;    // position the readings are relative to
    double speed = 0.0;
    TimeMs clock_offset = 0;  // added to every timestamp the station writes
};

struct CpmGeneration {
    std::vector<CpmMessage> segments;
    std::vector<std::uint32_t> included;
    bool person_group_fired = false;
    TimeMs trigger_time = 0;
};

/// Generation state kept per station between ticks.
struct CpsGenerationState {
    std::optional<TimeMs> last_cpm;
};

/// Builds the CPM(s) for this generation instant. `free_space` is in world
/// coordinates. Marks included tracks in the LDM.
CpmGeneration generate_cpm(const StationSelf& self, LocalDynamicMap& ldm, std::span<const SensorReading> readings,
                           std::span<const SensorSpec> sensors, std::span<const SensorFreeSpace> free_space,
                           TimeMs now, const CpsParams& params, CpsGenerationState& state, double cbr,
                           const ForeignObjectLog& foreign);

// ---------------------------------------------------------------------------
// Visibility expectations shared by the EEBL conflict rule and detectors

struct VisibilityMargins {
    double range = 5.0;       // m inside the declared range
    double aperture = 5.0;    // deg inside the aperture edge
    double occlusion = 1.0;   // m inflation of occluders
    double min_distance = 2.0;
};

/// True when `point` is comfortably inside one of the sensors' areas and the
/// line of sight from that sensor clears every (inflated) occluder.
bool clearly_observable(const Pose& observer, std::span<const SensorSpec> sensors, Vec2 point,
                        std::span<const OrientedRect> occluders, const VisibilityMargins& m);
bool clearly_observable(const Pose& observer, std::span<const SensorInformation> sensors, Vec2 point,
                        std::span<const OrientedRect> occluders, const VisibilityMargins& m);

// ---------------------------------------------------------------------------
// EEBL

enum class EeblState : std::uint8_t { normal, warn, fail_safe };
std::string_view to_string(EeblState);

struct DenmRecord {
    DenmMessage denm;
    CertId cert = 0;
    TimeMs received = 0;
};

struct EeblParams {
    double corridor_length = 80.0;
    double corridor_half_width = 2.0;
    double stationary_speed = 0.5;
    double gate = 3.0;
    TimeMs denm_ttl = 3000;
    VisibilityMargins margins;
};

/// Equal-weight fusion of V2X and on-board perception: a V2X-claimed
/// stationary vehicle in the forward corridor that the unobstructed local
/// sensors do not see is a conflict (fail_safe); a corroborated emergency
/// brake DENM is a warning.
EeblState eebl_decide(const LocalDynamicMap& ldm, std::span<const SensorReading> readings, const Pose& ego,
                      std::span<const SensorSpec> sensors, std::span<const DenmRecord> denms, TimeMs now,
                      const EeblParams& params);

}  // namespace cpsim
