#pragma once

// Misbehavior detectors D1-D9. Each check is a pure function of its inputs;
// DetectorSuite owns the per-station buffers (recent CPMs and CAMs, rate log)
// and MbrAggregator the one-report-per-window rule.

#include <deque>
#include <memory>

#include "cpsim/cps.hpp"

namespace cpsim {

enum class VerdictNote : std::uint8_t { attacker_suspected, victim_possible };
std::string_view to_string(VerdictNote);

struct DetectorVerdict {
    DetectorId detector = DetectorId::D1;
    CertId suspect_cert_id = 0;
    StationId suspect_station = 0;
    double severity = 0.0;
    VerdictNote note = VerdictNote::attacker_suspected;
    std::optional<CertId> co_suspect;
    std::vector<SignedEnvelope> evidence;
    std::optional<std::pair<CamMessage, CpmMessage>> synchronized_pair;
    TimeMs time = 0;
    std::string detail;
};

/// A verified, decoded message as seen by one receiver.
struct Delivered {
    std::shared_ptr<const SignedEnvelope> envelope;
    std::shared_ptr<const Message> message;
    TimeMs received = 0;

    const CpmMessage* cpm() const { return std::get_if<CpmMessage>(message.get()); }
    const CamMessage* cam() const { return std::get_if<CamMessage>(message.get()); }
    const DenmMessage* denm() const { return std::get_if<DenmMessage>(message.get()); }
    CertId cert() const { return envelope->cert_id; }
    StationId sender() const { return message_station(*message); }
};

Delivered make_delivered(const SignedEnvelope& envelope, const Message& message, TimeMs received);

struct DetectorParams {
    double max_speed = 70.0;
    double gate = 3.0;
    std::size_t trackable_limit = 255;
    double max_rate = 10.0;          // CPMs per second
    TimeMs rate_window = 2000;       // sustained-rate window; also the minimum observation
    TimeMs silence = 2000;           // zero CPMs for this long counts as too few
    double reporting_threshold = 0.5;
    TimeMs d4_window = 1000;         // recency and listen window
    double d2_range_tolerance = 0.5;
    double d2_angle_tolerance = 1.0;
    double d5_boundary_margin = 1.0;
    TimeMs d8_cam_window = 1000;
    double d8_lateral = 1.5;
    double d8_along_time = 0.75;     // s of travel accepted along the trajectory
    double d8_along_min = 12.0;      // m, floor of the along-trajectory window
    double d8_heading = 20.0;
    double d8_speed = 2.0;
    TimeMs aggregation_window = 1000;
    VisibilityMargins visibility{5.0, 5.0, 1.5, 2.0};
};

std::vector<DetectorVerdict> d1_implausible_speed(const Delivered& msg, double max_speed);
std::vector<DetectorVerdict> d2_sensor_area_plausibility(const Delivered& cpm, const DetectorParams& p);
std::vector<DetectorVerdict> d3_capability_attestation(const Delivered& cpm, const KeyRegistry& registry);

struct D4Context {
    const LocalDynamicMap* ldm = nullptr;  // receiver's map, for extra occluders and connected tracks
    std::optional<OrientedRect> ego_footprint;
    const ForeignObjectLog* foreign = nullptr;
    bool mitigation_active = false;  // receiver believes redundancy mitigation is in force
    TimeMs mitigation_window = 500;
};

/// Checks A's latest CPM against B's CPMs in the listen window ending at or
/// before A's generation time (b_window in arrival order).
std::vector<DetectorVerdict> d4_cross_cpm_consistency(const Delivered& a, std::span<const Delivered> b_window,
                                                      const D4Context& ctx, const DetectorParams& p);

std::vector<DetectorVerdict> d5_free_space_contradiction(const Delivered& cpm, std::span<const SensorReading> readings,
                                                         const Pose& ego, TimeMs now, const DetectorParams& p);

/// Per-sender CPM arrival log.
class RateLog {
public:
    void record(const Delivered& cpm);
    void prune(TimeMs before);
    struct Sender {
        TimeMs first_seen = 0;
        TimeMs last_seen = 0;
        std::deque<std::pair<TimeMs, TimeMs>> arrivals;  // (received, generation time)
        std::optional<Delivered> last;
        std::size_t total = 0;
    };
    const std::map<StationId, Sender>& senders() const { return senders_; }

private:
    std::map<StationId, Sender> senders_;
};

/// `alive_cams` holds the latest CAM per sender (to tell silence from absence).
std::vector<DetectorVerdict> d6_rate_anomaly(const RateLog& log, TimeMs now, std::span<const SensorReading> readings,
                                             const Pose& ego, const std::map<StationId, TimeMs>& alive_cams,
                                             const DetectorParams& p);

std::vector<DetectorVerdict> d7_object_flood(const Delivered& cpm, std::size_t limit);

std::vector<DetectorVerdict> d8_cam_cpm_crosscheck(const Delivered& cam, const Delivered& cpm, const DetectorParams& p);

std::vector<DetectorVerdict> d9_local_perception_consistency(const Delivered& cpm,
                                                             std::span<const SensorReading> readings, const Pose& ego,
                                                             std::span<const SensorSpec> sensors, TimeMs now,
                                                             const DetectorParams& p,
                                                             const LocalDynamicMap* ldm = nullptr);

class MbrError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One report per verdict at or above the threshold. Throws MbrError when a
/// verdict lacks evidence or a D8 verdict lacks its synchronized pair.
std::vector<MisbehaviorReport> emit_mbr(std::span<const DetectorVerdict> verdicts, StationId reporter, TimeMs now,
                                        double threshold);

/// Suppresses repeated reports for the same (detector, suspect) within a window.
class MbrAggregator {
public:
    explicit MbrAggregator(TimeMs window = 1000) : window_(window) {}
    bool admit(DetectorId d, CertId suspect, TimeMs now);

private:
    TimeMs window_;
    std::map<std::pair<DetectorId, CertId>, TimeMs> last_;
};

struct DetectorInputs {
    TimeMs now = 0;
    StationId ego_station = 0;
    Pose ego;
    std::optional<OrientedRect> ego_footprint;
    std::span<const SensorSpec> sensors;
    std::span<const SensorReading> readings;
    std::span<const Delivered> fresh;  // accepted this tick, arrival order
    const LocalDynamicMap* ldm = nullptr;
    const ForeignObjectLog* foreign = nullptr;
    const KeyRegistry* registry = nullptr;
    bool mitigation_active = false;
    TimeMs mitigation_window = 500;
};

class DetectorSuite {
public:
    DetectorSuite() = default;
    DetectorSuite(DetectorParams params, std::vector<DetectorId> enabled);

    bool enabled(DetectorId d) const;
    const DetectorParams& params() const { return params_; }

    std::vector<DetectorVerdict> process(const DetectorInputs& in);

private:
    DetectorParams params_;
    std::uint16_t enabled_mask_ = 0;
    std::map<StationId, std::deque<Delivered>> cpms_;
    std::map<StationId, std::deque<Delivered>> cams_;
    std::map<StationId, TimeMs> last_cam_;
    RateLog rates_;
};

}  // namespace cpsim
