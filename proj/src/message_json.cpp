#include "cpsim/message_json.hpp"

#include "cpsim/hash.hpp"

namespace cpsim {

using nlohmann::json;

namespace {

json vec(Vec2 v) { return json::array({v.x, v.y}); }

json header(const Header& h) {
    return {{"version", h.protocol_version}, {"message_id", to_string(h.message_id)}, {"station_id", h.station_id}};
}

}  // namespace

json to_json(const CpmMessage& m) {
    json j;
    j["header"] = header(m.header);
    j["management"] = {{"generation_time", m.management.generation_time},
                       {"reference_position", vec(m.management.reference_position)},
                       {"station_type", to_string(m.management.station_type)}};
    if (m.station_data) j["station_data"] = {{"speed", m.station_data->speed}, {"heading", m.station_data->heading}};
    if (m.sensor_info) {
        json arr = json::array();
        for (const auto& s : *m.sensor_info)
            arr.push_back({{"sensor_id", s.sensor_id},
                           {"type", to_string(s.sensor_type)},
                           {"range", s.range},
                           {"aperture", s.aperture},
                           {"mount_offset", vec(s.mount_offset)}});
        j["sensor_info"] = std::move(arr);
    }
    if (m.perceived_objects) {
        json arr = json::array();
        for (const auto& o : *m.perceived_objects)
            arr.push_back({{"object_id", o.object_id},
                           {"relative_position", vec(o.relative_position)},
                           {"speed", o.speed},
                           {"heading", o.heading},
                           {"dimensions", json::array({o.length, o.width})},
                           {"classification", to_string(o.classification)},
                           {"time_of_measurement", o.time_of_measurement},
                           {"confidence", o.confidence}});
        j["perceived_objects"] = std::move(arr);
    }
    if (m.free_space) {
        json arr = json::array();
        for (const auto& fs : *m.free_space) {
            json poly = json::array();
            for (const auto& p : fs.polygon) poly.push_back(vec(p));
            json e = {{"free_space_id", fs.free_space_id}, {"polygon", std::move(poly)}};
            if (fs.sensor_ids) e["sensor_ids"] = *fs.sensor_ids;
            arr.push_back(std::move(e));
        }
        j["free_space"] = std::move(arr);
    }
    return j;
}

json to_json(const CamMessage& m) {
    return {{"header", header(m.header)},
            {"position", vec(m.position)},
            {"speed", m.speed},
            {"heading", m.heading},
            {"timestamp", m.timestamp}};
}

json to_json(const DenmMessage& m) {
    return {{"header", header(m.header)},
            {"event_type", to_string(m.event_type)},
            {"event_position", vec(m.event_position)},
            {"timestamp", m.timestamp}};
}

json to_json(const MisbehaviorReport& m) {
    json ev = json::array();
    for (const auto& e : m.evidence) ev.push_back(envelope_digest(e));
    json j = {{"reporter", m.reporter},
              {"suspect_cert_id", m.suspect_cert_id},
              {"detector", to_string(m.detector_id)},
              {"evidence", std::move(ev)},
              {"created_at", m.created_at}};
    if (m.synchronized_pair)
        j["synchronized_pair"] = {{"cam", to_json(m.synchronized_pair->first)},
                                  {"cpm_generation_time", m.synchronized_pair->second.management.generation_time}};
    return j;
}

json to_json(const Message& m) {
    return std::visit([](const auto& v) { return to_json(v); }, m);
}

std::string envelope_digest(const SignedEnvelope& e) {
    Sha256Stream s;
    s.update(e.payload);
    s.update_pod(e.cert_id);
    s.update(e.signature_tag);
    const Digest d = s.peek();
    return to_hex(std::span(d.data(), 12));
}

}  // namespace cpsim
