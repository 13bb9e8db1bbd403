#include "cpsim/messages.hpp"

#include <array>

namespace cpsim {

std::string_view to_string(MessageId id) {
    switch (id) {
        case MessageId::denm: return "denm";
        case MessageId::cam: return "cam";
        case MessageId::cpm: return "cpm";
        case MessageId::mbr: return "mbr";
    }
    return "?";
}

std::string_view to_string(StationType t) {
    switch (t) {
        case StationType::vehicle: return "vehicle";
        case StationType::rsu: return "rsu";
        case StationType::pedestrian: return "pedestrian";
    }
    return "?";
}

std::string_view to_string(SensorType t) {
    switch (t) {
        case SensorType::camera: return "camera";
        case SensorType::radar: return "radar";
        case SensorType::lidar: return "lidar";
    }
    return "?";
}

std::string_view to_string(ObjectClass c) {
    return c == ObjectClass::person_or_animal ? "person_or_animal" : "other";
}

std::string_view to_string(EventType e) { return e == EventType::emergency_brake ? "emergency_brake" : "other"; }

std::string_view to_string(DetectorId d) {
    static constexpr std::array<std::string_view, 9> names{"D1", "D2", "D3", "D4", "D5", "D6", "D7", "D8", "D9"};
    const auto i = static_cast<std::size_t>(d);
    return (i >= 1 && i <= 9) ? names[i - 1] : "?";
}

std::optional<SensorType> sensor_type_from_string(std::string_view s) {
    if (s == "camera") return SensorType::camera;
    if (s == "radar") return SensorType::radar;
    if (s == "lidar") return SensorType::lidar;
    return std::nullopt;
}

std::optional<DetectorId> detector_from_string(std::string_view s) {
    if (s.size() == 2 && s[0] == 'D' && s[1] >= '1' && s[1] <= '9')
        return static_cast<DetectorId>(s[1] - '0');
    return std::nullopt;
}

std::optional<StationType> station_type_from_string(std::string_view s) {
    if (s == "vehicle") return StationType::vehicle;
    if (s == "rsu") return StationType::rsu;
    if (s == "pedestrian") return StationType::pedestrian;
    return std::nullopt;
}

std::optional<ObjectClass> object_class_from_string(std::string_view s) {
    if (s == "person_or_animal") return ObjectClass::person_or_animal;
    if (s == "other") return ObjectClass::other;
    return std::nullopt;
}

TimeMs message_time(const Message& m) {
    struct {
        TimeMs operator()(const CamMessage& c) const { return c.timestamp; }
        TimeMs operator()(const CpmMessage& c) const { return c.management.generation_time; }
        TimeMs operator()(const DenmMessage& d) const { return d.timestamp; }
        TimeMs operator()(const MisbehaviorReport& r) const { return r.created_at; }
    } v;
    return std::visit(v, m);
}

StationId message_station(const Message& m) {
    struct {
        StationId operator()(const CamMessage& c) const { return c.header.station_id; }
        StationId operator()(const CpmMessage& c) const { return c.header.station_id; }
        StationId operator()(const DenmMessage& d) const { return d.header.station_id; }
        StationId operator()(const MisbehaviorReport& r) const { return r.reporter; }
    } v;
    return std::visit(v, m);
}

MessageId message_kind(const Message& m) {
    struct {
        MessageId operator()(const CamMessage&) const { return MessageId::cam; }
        MessageId operator()(const CpmMessage&) const { return MessageId::cpm; }
        MessageId operator()(const DenmMessage&) const { return MessageId::denm; }
        MessageId operator()(const MisbehaviorReport&) const { return MessageId::mbr; }
    } v;
    return std::visit(v, m);
}

}  // namespace cpsim
