#pragma once

// V2X message types exchanged between stations: CAM, CPM, DENM and the
// misbehavior report. All types are plain values; equality is field-wise.

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cpsim/geometry.hpp"

namespace cpsim {

using StationId = std::uint32_t;
using CertId = std::uint64_t;
using TimeMs = std::int64_t;

inline constexpr std::uint8_t kProtocolVersion = 2;

enum class MessageId : std::uint8_t {
    denm = 1,
    cam = 2,
    cpm = 14,
    mbr = 100,
};

enum class StationType : std::uint8_t { vehicle = 0, rsu = 1, pedestrian = 2 };
enum class SensorType : std::uint8_t { camera = 0, radar = 1, lidar = 2 };
enum class ObjectClass : std::uint8_t { person_or_animal = 0, other = 1 };
enum class EventType : std::uint8_t { emergency_brake = 0, other = 1 };

enum class DetectorId : std::uint8_t {
    D1 = 1,  // implausible speed
    D2 = 2,  // sensor-area plausibility
    D3 = 3,  // capability attestation
    D4 = 4,  // cross-CPM consistency
    D5 = 5,  // free-space contradiction
    D6 = 6,  // rate anomaly
    D7 = 7,  // object flood
    D8 = 8,  // CAM/CPM cross-check
    D9 = 9,  // local perception consistency
};

std::string_view to_string(MessageId);
std::string_view to_string(StationType);
std::string_view to_string(SensorType);
std::string_view to_string(ObjectClass);
std::string_view to_string(EventType);
std::string_view to_string(DetectorId);

std::optional<SensorType> sensor_type_from_string(std::string_view);
std::optional<DetectorId> detector_from_string(std::string_view);
std::optional<StationType> station_type_from_string(std::string_view);
std::optional<ObjectClass> object_class_from_string(std::string_view);

struct Header {
    std::uint8_t protocol_version = kProtocolVersion;
    MessageId message_id = MessageId::cpm;
    StationId station_id = 0;

    friend bool operator==(const Header&, const Header&) = default;
};

struct ManagementContainer {
    TimeMs generation_time = 0;
    Vec2 reference_position;
    StationType station_type = StationType::vehicle;

    friend bool operator==(const ManagementContainer&, const ManagementContainer&) = default;
};

struct StationDataContainer {
    double speed = 0.0;
    double heading = 0.0;

    friend bool operator==(const StationDataContainer&, const StationDataContainer&) = default;
};

struct SensorInformation {
    std::uint8_t sensor_id = 0;
    SensorType sensor_type = SensorType::lidar;
    double range = 0.0;     // meters
    double aperture = 0.0;  // degrees, (0, 360]
    Vec2 mount_offset;      // vehicle frame: x right, y forward

    friend bool operator==(const SensorInformation&, const SensorInformation&) = default;
};

struct PerceivedObject {
    std::uint32_t object_id = 0;
    Vec2 relative_position;  // world-aligned offset from the reference position
    double speed = 0.0;
    double heading = 0.0;
    double length = 0.0;
    double width = 0.0;
    ObjectClass classification = ObjectClass::other;
    TimeMs time_of_measurement = 0;
    double confidence = 1.0;

    friend bool operator==(const PerceivedObject&, const PerceivedObject&) = default;
};

struct FreeSpaceAddendum {
    std::uint8_t free_space_id = 0;
    Polygon polygon;  // reporter-relative, world-aligned
    std::optional<std::vector<std::uint8_t>> sensor_ids;

    friend bool operator==(const FreeSpaceAddendum&, const FreeSpaceAddendum&) = default;
};

struct CpmMessage {
    Header header{kProtocolVersion, MessageId::cpm, 0};
    ManagementContainer management;
    std::optional<StationDataContainer> station_data;
    std::optional<std::vector<SensorInformation>> sensor_info;
    std::optional<std::vector<PerceivedObject>> perceived_objects;
    std::optional<std::vector<FreeSpaceAddendum>> free_space;

    friend bool operator==(const CpmMessage&, const CpmMessage&) = default;

    std::size_t object_count() const { return perceived_objects ? perceived_objects->size() : 0; }
};

struct CamMessage {
    Header header{kProtocolVersion, MessageId::cam, 0};
    Vec2 position;
    double speed = 0.0;
    double heading = 0.0;
    TimeMs timestamp = 0;

    friend bool operator==(const CamMessage&, const CamMessage&) = default;
};

struct DenmMessage {
    Header header{kProtocolVersion, MessageId::denm, 0};
    EventType event_type = EventType::emergency_brake;
    Vec2 event_position;
    TimeMs timestamp = 0;

    friend bool operator==(const DenmMessage&, const DenmMessage&) = default;
};

inline constexpr std::size_t kTagSize = 32;
using SignatureTag = std::array<std::uint8_t, kTagSize>;
using Bytes = std::vector<std::uint8_t>;

struct SignedEnvelope {
    Bytes payload;
    CertId cert_id = 0;
    SignatureTag signature_tag{};

    friend bool operator==(const SignedEnvelope&, const SignedEnvelope&) = default;
};

struct MisbehaviorReport {
    StationId reporter = 0;
    CertId suspect_cert_id = 0;
    DetectorId detector_id = DetectorId::D1;
    std::vector<SignedEnvelope> evidence;
    std::optional<std::pair<CamMessage, CpmMessage>> synchronized_pair;
    TimeMs created_at = 0;

    friend bool operator==(const MisbehaviorReport&, const MisbehaviorReport&) = default;
};

struct AttestedCapability {
    SensorType sensor_type = SensorType::lidar;
    double max_range = 0.0;

    friend bool operator==(const AttestedCapability&, const AttestedCapability&) = default;
};

struct Certificate {
    CertId cert_id = 0;
    StationId holder_station = 0;
    std::optional<std::vector<AttestedCapability>> attested_capabilities;
    TimeMs valid_from = 0;
    TimeMs valid_to = 0;

    friend bool operator==(const Certificate&, const Certificate&) = default;
};

using Message = std::variant<CamMessage, CpmMessage, DenmMessage, MisbehaviorReport>;

/// Timestamp a message carries (generation time for CPMs).
TimeMs message_time(const Message& m);
StationId message_station(const Message& m);
MessageId message_kind(const Message& m);

}  // namespace cpsim
