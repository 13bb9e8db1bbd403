#include "cpsim/codec.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <set>

namespace cpsim {

std::string_view to_string(DecodeErrorKind k) {
    switch (k) {
        case DecodeErrorKind::truncated: return "truncated";
        case DecodeErrorKind::unknown_message_id: return "unknown_message_id";
        case DecodeErrorKind::unsupported_version: return "unsupported_version";
        case DecodeErrorKind::invariant_violation: return "invariant_violation";
        case DecodeErrorKind::trailing_bytes: return "trailing_bytes";
    }
    return "?";
}

namespace {

std::string field_name(const char* base, long index, const char* leaf) {
    std::string s = base;
    if (index >= 0) s += "[" + std::to_string(index) + "]";
    if (leaf != nullptr && *leaf != '\0') {
        s += ".";
        s += leaf;
    }
    return s;
}

struct Field {
    const char* base;
    long index = -1;
    const char* leaf = "";
    [[noreturn]] void fail() const { throw EncodeError(field_name(base, index, leaf)); }
};

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
    void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
    void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

    void milli_signed(double v, const Field& f) {
        const double q = std::round(v * 1000.0);
        if (!std::isfinite(q) || q < std::numeric_limits<std::int32_t>::min() ||
            q > std::numeric_limits<std::int32_t>::max())
            f.fail();
        i32(static_cast<std::int32_t>(q));
    }
    void milli_unsigned(double v, const Field& f) {
        const double q = std::round(v * 1000.0);
        if (!std::isfinite(q) || q < 0 || q > std::numeric_limits<std::uint32_t>::max()) f.fail();
        u32(static_cast<std::uint32_t>(q));
    }
    void position(Vec2 p, const Field& fx, const Field& fy) {
        milli_signed(p.x, fx);
        milli_signed(p.y, fy);
    }
    void heading(double deg, const Field& f) {
        if (!(deg >= 0.0 && deg < 360.0)) f.fail();
        auto q = static_cast<std::uint32_t>(std::llround(deg * 1000.0));
        if (q >= 360000u) q = 0;
        u32(q);
    }
    void count16(std::size_t n, const Field& f) {
        if (n > std::numeric_limits<std::uint16_t>::max()) f.fail();
        u16(static_cast<std::uint16_t>(n));
    }
    void blob(const Bytes& b, const Field& f) {
        if (b.size() > std::numeric_limits<std::uint32_t>::max()) f.fail();
        u32(static_cast<std::uint32_t>(b.size()));
        raw(b);
    }

    Bytes take() { return std::move(out_); }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    Bytes out_;
};

void write_header(Writer& w, const Header& h, MessageId id) {
    w.u8(h.protocol_version);
    w.u8(static_cast<std::uint8_t>(id));
    w.u32(h.station_id);
}

void write_cpm_body(Writer& w, const CpmMessage& m) {
    const auto& mg = m.management;
    w.i64(mg.generation_time);
    w.position(mg.reference_position, {"management.reference_position", -1, "x"},
               {"management.reference_position", -1, "y"});
    w.u8(static_cast<std::uint8_t>(mg.station_type));

    w.u8(m.station_data ? 1 : 0);
    if (m.station_data) {
        w.milli_unsigned(m.station_data->speed, {"station_data", -1, "speed"});
        w.heading(m.station_data->heading, {"station_data", -1, "heading"});
    }

    w.u8(m.sensor_info ? 1 : 0);
    if (m.sensor_info) {
        w.count16(m.sensor_info->size(), {"sensor_info"});
        long i = 0;
        for (const auto& s : *m.sensor_info) {
            w.u8(s.sensor_id);
            w.u8(static_cast<std::uint8_t>(s.sensor_type));
            w.milli_unsigned(s.range, {"sensor_info", i, "range"});
            w.milli_unsigned(s.aperture, {"sensor_info", i, "aperture"});
            w.position(s.mount_offset, {"sensor_info", i, "mount_offset.x"}, {"sensor_info", i, "mount_offset.y"});
            ++i;
        }
    }

    w.u8(m.perceived_objects ? 1 : 0);
    if (m.perceived_objects) {
        w.count16(m.perceived_objects->size(), {"perceived_objects"});
        long i = 0;
        for (const auto& o : *m.perceived_objects) {
            w.u32(o.object_id);
            w.position(o.relative_position, {"perceived_objects", i, "relative_position.x"},
                       {"perceived_objects", i, "relative_position.y"});
            w.milli_unsigned(o.speed, {"perceived_objects", i, "speed"});
            w.heading(o.heading, {"perceived_objects", i, "heading"});
            w.milli_unsigned(o.length, {"perceived_objects", i, "length"});
            w.milli_unsigned(o.width, {"perceived_objects", i, "width"});
            w.u8(static_cast<std::uint8_t>(o.classification));
            w.i64(o.time_of_measurement);
            const double c = std::round(o.confidence * 1000.0);
            if (!(c >= 0 && c <= std::numeric_limits<std::uint16_t>::max()))
                Field{"perceived_objects", i, "confidence"}.fail();
            w.u16(static_cast<std::uint16_t>(c));
            ++i;
        }
    }

    w.u8(m.free_space ? 1 : 0);
    if (m.free_space) {
        w.count16(m.free_space->size(), {"free_space"});
        long i = 0;
        for (const auto& fs : *m.free_space) {
            w.u8(fs.free_space_id);
            w.count16(fs.polygon.size(), {"free_space", i, "polygon"});
            for (const auto& p : fs.polygon)
                w.position(p, {"free_space", i, "polygon.x"}, {"free_space", i, "polygon.y"});
            w.u8(fs.sensor_ids ? 1 : 0);
            if (fs.sensor_ids) {
                if (fs.sensor_ids->size() > 255) Field{"free_space", i, "sensor_ids"}.fail();
                w.u8(static_cast<std::uint8_t>(fs.sensor_ids->size()));
                for (auto id : *fs.sensor_ids) w.u8(id);
            }
            ++i;
        }
    }
}

void write_cam_body(Writer& w, const CamMessage& m) {
    w.position(m.position, {"position", -1, "x"}, {"position", -1, "y"});
    w.milli_unsigned(m.speed, {"speed"});
    w.heading(m.heading, {"heading"});
    w.i64(m.timestamp);
}

void write_denm_body(Writer& w, const DenmMessage& m) {
    w.u8(static_cast<std::uint8_t>(m.event_type));
    w.position(m.event_position, {"event_position", -1, "x"}, {"event_position", -1, "y"});
    w.i64(m.timestamp);
}

void write_envelope(Writer& w, const SignedEnvelope& e, long i) {
    w.blob(e.payload, {"evidence", i, "payload"});
    w.u64(e.cert_id);
    w.raw(e.signature_tag);
}

void write_mbr_body(Writer& w, const MisbehaviorReport& m) {
    w.u64(m.suspect_cert_id);
    w.u8(static_cast<std::uint8_t>(m.detector_id));
    w.i64(m.created_at);
    w.count16(m.evidence.size(), {"evidence"});
    long i = 0;
    for (const auto& e : m.evidence) write_envelope(w, e, i++);
    w.u8(m.synchronized_pair ? 1 : 0);
    if (m.synchronized_pair) {
        w.blob(canonical_bytes(m.synchronized_pair->first), {"synchronized_pair", -1, "cam"});
        w.blob(canonical_bytes(m.synchronized_pair->second), {"synchronized_pair", -1, "cpm"});
    }
}

// ---------------------------------------------------------------------------

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

    std::uint8_t u8() {
        need(1);
        return b_[pos_++];
    }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double milli_signed() { return static_cast<double>(i32()) / 1000.0; }
    double milli_unsigned() { return static_cast<double>(u32()) / 1000.0; }
    Vec2 position() {
        const double x = milli_signed();
        const double y = milli_signed();
        return {x, y};
    }
    bool flag(const char* what) {
        const auto f = u8();
        if (f > 1) throw DecodeError(DecodeErrorKind::invariant_violation, std::string("presence flag ") + what);
        return f == 1;
    }
    std::span<const std::uint8_t> take(std::size_t n) {
        need(n);
        auto s = b_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    Bytes blob() {
        const auto n = u32();
        auto s = take(n);
        return {s.begin(), s.end()};
    }
    bool at_end() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) throw DecodeError(DecodeErrorKind::truncated, "input ends inside a field");
    }
    std::uint64_t le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

[[noreturn]] void violation(const std::string& what) { throw DecodeError(DecodeErrorKind::invariant_violation, what); }

template <typename E>
E enum_in(std::uint8_t v, std::uint8_t max_value, const char* what) {
    if (v > max_value) violation(std::string("enum out of range: ") + what);
    return static_cast<E>(v);
}

double heading_of(Reader& r, const char* what) {
    const auto q = r.u32();
    if (q >= 360000u) violation(std::string("heading out of range: ") + what);
    return q / 1000.0;
}

CpmMessage read_cpm(Reader& r, Header h) {
    CpmMessage m;
    m.header = h;
    m.management.generation_time = r.i64();
    m.management.reference_position = r.position();
    m.management.station_type = enum_in<StationType>(r.u8(), 2, "station_type");

    if (r.flag("station_data")) {
        StationDataContainer sd;
        sd.speed = r.milli_unsigned();
        sd.heading = heading_of(r, "station_data.heading");
        m.station_data = sd;
    }
    if (r.flag("sensor_info")) {
        const auto n = r.u16();
        std::vector<SensorInformation> v;
        v.reserve(n);
        for (std::uint16_t i = 0; i < n; ++i) {
            SensorInformation s;
            s.sensor_id = r.u8();
            s.sensor_type = enum_in<SensorType>(r.u8(), 2, "sensor_type");
            s.range = r.milli_unsigned();
            s.aperture = r.milli_unsigned();
            s.mount_offset = r.position();
            v.push_back(s);
        }
        m.sensor_info = std::move(v);
    }
    if (r.flag("perceived_objects")) {
        const auto n = r.u16();
        std::vector<PerceivedObject> v;
        v.reserve(n);
        for (std::uint16_t i = 0; i < n; ++i) {
            PerceivedObject o;
            o.object_id = r.u32();
            o.relative_position = r.position();
            o.speed = r.milli_unsigned();
            o.heading = heading_of(r, "perceived_object.heading");
            o.length = r.milli_unsigned();
            o.width = r.milli_unsigned();
            o.classification = enum_in<ObjectClass>(r.u8(), 1, "classification");
            o.time_of_measurement = r.i64();
            const auto c = r.u16();
            if (c > 1000) violation("confidence above 1");
            o.confidence = c / 1000.0;
            v.push_back(o);
        }
        m.perceived_objects = std::move(v);
    }
    if (r.flag("free_space")) {
        const auto n = r.u16();
        std::vector<FreeSpaceAddendum> v;
        v.reserve(n);
        for (std::uint16_t i = 0; i < n; ++i) {
            FreeSpaceAddendum fs;
            fs.free_space_id = r.u8();
            const auto pts = r.u16();
            fs.polygon.reserve(pts);
            for (std::uint16_t k = 0; k < pts; ++k) fs.polygon.push_back(r.position());
            if (r.flag("free_space.sensor_ids")) {
                const auto c = r.u8();
                std::vector<std::uint8_t> ids(c);
                for (auto& id : ids) id = r.u8();
                fs.sensor_ids = std::move(ids);
            }
            v.push_back(std::move(fs));
        }
        m.free_space = std::move(v);
    }
    if (auto why = invariant_violation(m); !why.empty()) violation(why);
    return m;
}

CamMessage read_cam(Reader& r, Header h) {
    CamMessage m;
    m.header = h;
    m.position = r.position();
    m.speed = r.milli_unsigned();
    m.heading = heading_of(r, "cam.heading");
    m.timestamp = r.i64();
    return m;
}

DenmMessage read_denm(Reader& r, Header h) {
    DenmMessage m;
    m.header = h;
    m.event_type = enum_in<EventType>(r.u8(), 1, "event_type");
    m.event_position = r.position();
    m.timestamp = r.i64();
    return m;
}

Message decode_impl(std::span<const std::uint8_t> bytes, bool nested);

MisbehaviorReport read_mbr(Reader& r, Header h) {
    MisbehaviorReport m;
    m.reporter = h.station_id;
    m.suspect_cert_id = r.u64();
    const auto det = r.u8();
    if (det < 1 || det > 9) violation("detector id out of range");
    m.detector_id = static_cast<DetectorId>(det);
    m.created_at = r.i64();
    const auto n = r.u16();
    if (n == 0) violation("misbehavior report without evidence");
    m.evidence.reserve(n);
    for (std::uint16_t i = 0; i < n; ++i) {
        SignedEnvelope e;
        e.payload = r.blob();
        e.cert_id = r.u64();
        auto tag = r.take(kTagSize);
        std::memcpy(e.signature_tag.data(), tag.data(), kTagSize);
        m.evidence.push_back(std::move(e));
    }
    if (r.flag("synchronized_pair")) {
        const Bytes cam = r.blob();
        const Bytes cpm = r.blob();
        auto cam_msg = decode_impl(cam, true);
        auto cpm_msg = decode_impl(cpm, true);
        if (!std::holds_alternative<CamMessage>(cam_msg) || !std::holds_alternative<CpmMessage>(cpm_msg))
            violation("synchronized pair must hold a CAM and a CPM");
        m.synchronized_pair = std::make_pair(std::get<CamMessage>(cam_msg), std::get<CpmMessage>(cpm_msg));
    }
    if (m.detector_id == DetectorId::D8 && !m.synchronized_pair)
        violation("D8 report requires a synchronized CAM/CPM pair");
    return m;
}

Message decode_impl(std::span<const std::uint8_t> bytes, bool nested) {
    Reader r(bytes);
    Header h;
    h.protocol_version = r.u8();
    const auto id = r.u8();
    h.station_id = r.u32();
    if (h.protocol_version != kProtocolVersion)
        throw DecodeError(DecodeErrorKind::unsupported_version, "protocol version " + std::to_string(h.protocol_version));

    Message out;
    switch (id) {
        case static_cast<std::uint8_t>(MessageId::cpm):
            h.message_id = MessageId::cpm;
            out = read_cpm(r, h);
            break;
        case static_cast<std::uint8_t>(MessageId::cam):
            h.message_id = MessageId::cam;
            out = read_cam(r, h);
            break;
        case static_cast<std::uint8_t>(MessageId::denm):
            h.message_id = MessageId::denm;
            out = read_denm(r, h);
            break;
        case static_cast<std::uint8_t>(MessageId::mbr):
            if (nested) violation("nested misbehavior report");
            out = read_mbr(r, h);
            break;
        default:
            throw DecodeError(DecodeErrorKind::unknown_message_id, "message id " + std::to_string(id));
    }
    if (!r.at_end()) throw DecodeError(DecodeErrorKind::trailing_bytes, "bytes after message end");
    return out;
}

}  // namespace

std::string invariant_violation(const CpmMessage& m) {
    if (m.header.message_id != MessageId::cpm) return "header message id is not CPM";
    if (m.sensor_info) {
        std::set<std::uint8_t> ids;
        for (const auto& s : *m.sensor_info) {
            if (!(s.range > 0.0)) return "sensor range must be positive";
            if (!(s.aperture > 0.0 && s.aperture <= 360.0)) return "sensor aperture outside (0, 360]";
            if (!ids.insert(s.sensor_id).second) return "duplicate sensor id";
        }
    }
    if (m.perceived_objects) {
        for (const auto& o : *m.perceived_objects) {
            if (o.speed < 0.0) return "negative object speed";
            if (!(o.confidence >= 0.0 && o.confidence <= 1.0)) return "confidence outside [0, 1]";
        }
    }
    if (m.free_space) {
        std::set<std::uint8_t> fs_ids;
        for (const auto& fs : *m.free_space) {
            if (!fs_ids.insert(fs.free_space_id).second) return "duplicate free space id";
            if (fs.polygon.size() < 3) return "free space polygon needs at least 3 points";
            if (!is_simple_polygon(fs.polygon)) return "free space polygon is not simple";
            if (fs.sensor_ids) {
                for (auto id : *fs.sensor_ids) {
                    bool found = false;
                    if (m.sensor_info)
                        for (const auto& s : *m.sensor_info) found = found || s.sensor_id == id;
                    if (!found) return "free space references unknown sensor id";
                }
            }
        }
    }
    return {};
}

Bytes canonical_bytes(const CpmMessage& m) {
    Writer w;
    write_header(w, m.header, MessageId::cpm);
    write_cpm_body(w, m);
    return w.take();
}

Bytes canonical_bytes(const CamMessage& m) {
    Writer w;
    write_header(w, m.header, MessageId::cam);
    write_cam_body(w, m);
    return w.take();
}

Bytes canonical_bytes(const DenmMessage& m) {
    Writer w;
    write_header(w, m.header, MessageId::denm);
    write_denm_body(w, m);
    return w.take();
}

Bytes canonical_bytes(const MisbehaviorReport& m) {
    Writer w;
    write_header(w, Header{kProtocolVersion, MessageId::mbr, m.reporter}, MessageId::mbr);
    write_mbr_body(w, m);
    return w.take();
}

Bytes canonical_bytes(const Message& m) {
    return std::visit([](const auto& v) { return canonical_bytes(v); }, m);
}

Message decode(std::span<const std::uint8_t> bytes) { return decode_impl(bytes, false); }

}  // namespace cpsim
