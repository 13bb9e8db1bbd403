#include "cpsim/detectors.hpp"

#include <algorithm>
#include <cstdio>

namespace cpsim {

std::string_view to_string(VerdictNote n) {
    return n == VerdictNote::attacker_suspected ? "attacker_suspected" : "victim_possible";
}

Delivered make_delivered(const SignedEnvelope& envelope, const Message& message, TimeMs received) {
    return {std::make_shared<const SignedEnvelope>(envelope), std::make_shared<const Message>(message), received};
}

namespace {

DetectorVerdict verdict(DetectorId id, const Delivered& about, double severity, std::string detail,
                        VerdictNote note = VerdictNote::attacker_suspected) {
    DetectorVerdict v;
    v.detector = id;
    v.suspect_cert_id = about.cert();
    v.suspect_station = about.sender();
    v.severity = severity;
    v.note = note;
    v.evidence.push_back(*about.envelope);
    v.time = about.received;
    v.detail = std::move(detail);
    return v;
}

Vec2 object_world(const CpmMessage& m, const PerceivedObject& o) {
    return m.management.reference_position + o.relative_position;
}

Vec2 object_at(const CpmMessage& m, const PerceivedObject& o, TimeMs t) {
    return extrapolate(object_world(m, o), o.speed, o.heading, static_cast<double>(t - o.time_of_measurement));
}

std::string fmt_point(Vec2 p) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "(%.1f, %.1f)", p.x, p.y);
    return buf;
}

Pose sender_pose_at(const CpmMessage& m, TimeMs t) {
    const double speed = m.station_data ? m.station_data->speed : 0.0;
    const double heading = m.station_data ? m.station_data->heading : 0.0;
    return {extrapolate(m.management.reference_position, speed, heading,
                        static_cast<double>(t - m.management.generation_time)),
            heading};
}

}  // namespace

std::vector<DetectorVerdict> d1_implausible_speed(const Delivered& msg, double max_speed) {
    if (const auto* cam = msg.cam()) {
        if (cam->speed > max_speed)
            return {verdict(DetectorId::D1, msg, 0.8, "CAM speed " + std::to_string(cam->speed))};
        return {};
    }
    if (const auto* cpm = msg.cpm()) {
        if (cpm->station_data && cpm->station_data->speed > max_speed)
            return {verdict(DetectorId::D1, msg, 0.8, "station speed " + std::to_string(cpm->station_data->speed))};
        if (cpm->perceived_objects)
            for (const auto& o : *cpm->perceived_objects)
                if (o.speed > max_speed)
                    return {verdict(DetectorId::D1, msg, 0.8,
                                    "object " + std::to_string(o.object_id) + " speed " + std::to_string(o.speed))};
    }
    return {};
}

std::vector<DetectorVerdict> d2_sensor_area_plausibility(const Delivered& msg, const DetectorParams& p) {
    const auto* cpm = msg.cpm();
    if (cpm == nullptr || !cpm->sensor_info || !cpm->perceived_objects) return {};
    const Pose self{cpm->management.reference_position, cpm->station_data ? cpm->station_data->heading : 0.0};
    const bool oriented = cpm->station_data.has_value();
    for (const auto& o : *cpm->perceived_objects) {
        const Vec2 w = object_world(*cpm, o);
        bool inside = false;
        for (const auto& s : *cpm->sensor_info) {
            const SensorPose sp = sensor_pose(self, s.mount_offset);
            const double d = distance(sp.origin, w);
            if (d > s.range + p.d2_range_tolerance) continue;
            if (!oriented || s.aperture >= 360.0 || d < p.d2_range_tolerance ||
                std::abs(angle_diff(bearing_of(w - sp.origin), sp.boresight)) <= s.aperture / 2.0 + p.d2_angle_tolerance) {
                inside = true;
                break;
            }
        }
        if (!inside)
            return {verdict(DetectorId::D2, msg, 0.9,
                            "object " + std::to_string(o.object_id) + " outside declared sensor areas")};
    }
    return {};
}

std::vector<DetectorVerdict> d3_capability_attestation(const Delivered& msg, const KeyRegistry& registry) {
    const auto* cpm = msg.cpm();
    if (cpm == nullptr || !cpm->sensor_info) return {};
    const Certificate* cert = registry.certificate(msg.cert());
    if (cert == nullptr || !cert->attested_capabilities) return {};
    for (const auto& s : *cpm->sensor_info) {
        for (const auto& a : *cert->attested_capabilities) {
            if (a.sensor_type != s.sensor_type) continue;
            if (s.range > a.max_range + 1e-3)
                return {verdict(DetectorId::D3, msg, 0.9,
                                std::string(to_string(s.sensor_type)) + " declared " + std::to_string(s.range) +
                                    " m exceeds attested " + std::to_string(a.max_range) + " m")};
        }
    }
    return {};
}

std::vector<DetectorVerdict> d4_cross_cpm_consistency(const Delivered& a, std::span<const Delivered> b_window,
                                                      const D4Context& ctx, const DetectorParams& p) {
    const auto* A = a.cpm();
    if (A == nullptr || !A->perceived_objects || A->perceived_objects->empty() || b_window.empty()) return {};
    const TimeMs tA = A->management.generation_time;

    const Delivered* latest = nullptr;
    std::vector<const CpmMessage*> bs;
    for (const auto& d : b_window) {
        const auto* b = d.cpm();
        if (b == nullptr) continue;
        const TimeMs tb = b->management.generation_time;
        if (tb > tA || tb < tA - p.d4_window) continue;
        bs.push_back(b);
        if (latest == nullptr || tb >= latest->cpm()->management.generation_time) latest = &d;
    }
    if (latest == nullptr) return {};
    const CpmMessage& B = *latest->cpm();
    if (!B.sensor_info || !B.station_data || B.header.station_id == A->header.station_id) return {};

    const Pose b_pose = sender_pose_at(B, tA);
    std::vector<OrientedRect> b_objects;
    for (const auto* b : bs)
        if (b->perceived_objects)
            for (const auto& o : *b->perceived_objects)
                b_objects.push_back({object_at(*b, o, tA), o.heading, o.length, o.width});

    std::vector<OrientedRect> extra;
    const Pose a_pose = sender_pose_at(*A, tA);
    extra.push_back({a_pose.position, a_pose.heading, 4.5, 1.8});
    if (ctx.ego_footprint) extra.push_back(*ctx.ego_footprint);
    if (ctx.ldm != nullptr)
        for (const auto& [id, t] : ctx.ldm->tracks())
            if (t.station_id != B.header.station_id) extra.push_back(t.footprint_at(tA));

    const bool b_is_rsu = B.management.station_type == StationType::rsu;
    for (const auto& o : *A->perceived_objects) {
        const Vec2 pos = object_at(*A, o, tA);
        if (distance(pos, b_pose.position) < p.gate) continue;
        if (std::any_of(b_objects.begin(), b_objects.end(),
                        [&](const OrientedRect& r) { return distance(r.center, pos) <= p.gate; }))
            continue;
        if (b_is_rsu && ctx.ego_footprint && distance(ctx.ego_footprint->center, pos) <= p.gate) continue;
        if (b_is_rsu && ctx.ldm != nullptr) {
            bool connected = false;
            for (const auto& [id, t] : ctx.ldm->tracks())
                if (t.kind == TrackKind::connected && distance(t.predicted(tA), pos) <= p.gate) connected = true;
            if (connected) continue;
        }
        if (ctx.mitigation_active && ctx.foreign != nullptr &&
            ctx.foreign->reported_near(pos, tA, p.gate, tA - ctx.mitigation_window, tA + ctx.mitigation_window,
                                       B.header.station_id))
            continue;
        std::vector<OrientedRect> occ;
        for (const auto* list : {&b_objects, &extra})
            for (const auto& r : *list)
                if (distance(r.center, pos) > p.gate) occ.push_back(r);
        if (!clearly_observable(b_pose, std::span<const SensorInformation>(*B.sensor_info), pos, occ, p.visibility))
            continue;

        const std::string detail = "object " + std::to_string(o.object_id) + " at " + fmt_point(pos) + " of station " +
                                   std::to_string(A->header.station_id) + " missing from station " +
                                   std::to_string(B.header.station_id);
        DetectorVerdict va = verdict(DetectorId::D4, a, 0.6, detail, VerdictNote::attacker_suspected);
        va.evidence.push_back(*latest->envelope);
        va.co_suspect = latest->cert();
        DetectorVerdict vb = verdict(DetectorId::D4, *latest, 0.6, detail, VerdictNote::victim_possible);
        vb.evidence.insert(vb.evidence.begin(), *a.envelope);
        vb.co_suspect = a.cert();
        vb.time = a.received;
        return {va, vb};
    }
    return {};
}

std::vector<DetectorVerdict> d5_free_space_contradiction(const Delivered& msg, std::span<const SensorReading> readings,
                                                         const Pose& ego, TimeMs now, const DetectorParams& p) {
    const auto* cpm = msg.cpm();
    if (cpm == nullptr || !cpm->free_space) return {};
    const Vec2 ref = cpm->management.reference_position;
    const TimeMs tg = cpm->management.generation_time;
    const Vec2 sender = ref;
    for (const auto& fs : *cpm->free_space) {
        Polygon world;
        world.reserve(fs.polygon.size());
        for (const auto& v : fs.polygon) world.push_back(ref + v);
        for (const auto& r : readings) {
            const Vec2 q = extrapolate(ego.position + r.relative_position, r.speed, r.heading,
                                       static_cast<double>(tg - now));
            if (distance(q, sender) < p.gate) continue;
            if (point_in_polygon(world, q) && distance_to_boundary(world, q) >= p.d5_boundary_margin)
                return {verdict(DetectorId::D5, msg, 0.8,
                                "entity " + std::to_string(r.entity_id) + " inside declared free space " +
                                    std::to_string(fs.free_space_id))};
        }
    }
    return {};
}

void RateLog::record(const Delivered& d) {
    const auto* cpm = d.cpm();
    if (cpm == nullptr) return;
    auto [it, fresh] = senders_.try_emplace(cpm->header.station_id);
    Sender& s = it->second;
    if (fresh) s.first_seen = d.received;
    s.last_seen = d.received;
    s.arrivals.emplace_back(d.received, cpm->management.generation_time);
    s.last = d;
    ++s.total;
}

void RateLog::prune(TimeMs before) {
    for (auto& [id, s] : senders_)
        while (!s.arrivals.empty() && s.arrivals.front().first < before) s.arrivals.pop_front();
}

std::vector<DetectorVerdict> d6_rate_anomaly(const RateLog& log, TimeMs now, std::span<const SensorReading> readings,
                                             const Pose& ego, const std::map<StationId, TimeMs>& alive_cams,
                                             const DetectorParams& p) {
    std::vector<DetectorVerdict> out;
    for (const auto& [id, s] : log.senders()) {
        if (now - s.first_seen < p.rate_window || !s.last) continue;
        std::vector<TimeMs> gens;
        for (const auto& [rx, gen] : s.arrivals)
            if (rx > now - p.rate_window && rx <= now) gens.push_back(gen);
        std::sort(gens.begin(), gens.end());
        gens.erase(std::unique(gens.begin(), gens.end()), gens.end());
        const double allowed = p.max_rate * static_cast<double>(p.rate_window) / 1000.0;
        if (static_cast<double>(gens.size()) > allowed) {
            out.push_back(verdict(DetectorId::D6, *s.last, 0.7,
                                  std::to_string(gens.size()) + " CPMs in " + std::to_string(p.rate_window) + " ms"));
            out.back().time = now;
            continue;
        }
        // Too few: the sender still broadcasts CAMs but has stopped CPMs while
        // objects it used to report remain in our own view.
        auto cam = alive_cams.find(id);
        if (s.total < 2 || now - s.last_seen < p.silence || cam == alive_cams.end() || now - cam->second > 1000)
            continue;
        const auto* last = s.last->cpm();
        if (!last->perceived_objects) continue;
        bool persists = false;
        for (const auto& o : *last->perceived_objects) {
            const Vec2 q = object_at(*last, o, now);
            for (const auto& r : readings)
                if (distance(ego.position + r.relative_position, q) <= p.gate) persists = true;
        }
        if (persists) {
            out.push_back(verdict(DetectorId::D6, *s.last, 0.6,
                                  "silent for " + std::to_string(now - s.last_seen) + " ms with objects in view"));
            out.back().time = now;
        }
    }
    return out;
}

std::vector<DetectorVerdict> d7_object_flood(const Delivered& msg, std::size_t limit) {
    const auto* cpm = msg.cpm();
    if (cpm == nullptr || cpm->object_count() <= limit) return {};
    return {verdict(DetectorId::D7, msg, 0.8,
                    std::to_string(cpm->object_count()) + " objects exceed limit " + std::to_string(limit))};
}

std::vector<DetectorVerdict> d8_cam_cpm_crosscheck(const Delivered& cam_msg, const Delivered& cpm_msg,
                                                   const DetectorParams& p) {
    const auto* cam = cam_msg.cam();
    const auto* cpm = cpm_msg.cpm();
    if (cam == nullptr || cpm == nullptr || !cpm->perceived_objects) return {};
    if (cam->header.station_id == cpm->header.station_id) return {};
    const Vec2 fwd = heading_vector(cam->heading);
    const Vec2 right = heading_vector(cam->heading + 90.0);
    std::optional<double> best;
    for (const auto& o : *cpm->perceived_objects) {
        const double dt = static_cast<double>(o.time_of_measurement - cam->timestamp);
        if (std::abs(dt) > static_cast<double>(p.d8_cam_window)) continue;
        const Vec2 predicted = extrapolate(cam->position, cam->speed, cam->heading, dt);
        const Vec2 d = object_world(*cpm, o) - predicted;
        const bool moving = cam->speed > 1.0;
        if (std::abs(dot(d, right)) > p.d8_lateral) continue;
        if (std::abs(dot(d, fwd)) > std::max(cam->speed * p.d8_along_time, p.d8_along_min) + p.gate) continue;
        if (moving && std::abs(angle_diff(o.heading, cam->heading)) > p.d8_heading) continue;
        if (std::abs(o.speed - cam->speed) > p.d8_speed) continue;
        const double dev = norm(d);
        if (!best || dev < *best) best = dev;
    }
    if (!best || *best <= p.gate) return {};
    const std::string detail = "station " + std::to_string(cam->header.station_id) + " deviates " +
                               std::to_string(*best) + " m from its CAM trajectory in CPM of station " +
                               std::to_string(cpm->header.station_id);
    DetectorVerdict vc = verdict(DetectorId::D8, cam_msg, 0.7, detail);
    vc.evidence.push_back(*cpm_msg.envelope);
    vc.co_suspect = cpm_msg.cert();
    vc.synchronized_pair = std::make_pair(*cam, *cpm);
    vc.time = std::max(cam_msg.received, cpm_msg.received);
    DetectorVerdict vp = verdict(DetectorId::D8, cpm_msg, 0.7, detail);
    vp.evidence.insert(vp.evidence.begin(), *cam_msg.envelope);
    vp.co_suspect = cam_msg.cert();
    vp.synchronized_pair = vc.synchronized_pair;
    vp.time = vc.time;
    return {vc, vp};
}

std::vector<DetectorVerdict> d9_local_perception_consistency(const Delivered& msg,
                                                             std::span<const SensorReading> readings, const Pose& ego,
                                                             std::span<const SensorSpec> sensors, TimeMs now,
                                                             const DetectorParams& p, const LocalDynamicMap* ldm) {
    const auto* cpm = msg.cpm();
    if (cpm == nullptr || !cpm->perceived_objects) return {};
    std::vector<OrientedRect> seen;
    for (const auto& r : readings) seen.push_back({ego.position + r.relative_position, r.heading, r.length, r.width});
    // Known objects outside the field of view still block it.
    std::vector<OrientedRect> known;
    if (ldm != nullptr)
        for (const auto& [id, t] : ldm->tracks()) known.push_back(t.footprint_at(now));
    for (const auto& o : *cpm->perceived_objects) {
        const Vec2 pos = object_at(*cpm, o, now);
        if (distance(pos, ego.position) < p.gate) continue;
        if (std::any_of(seen.begin(), seen.end(), [&](const OrientedRect& s) { return distance(s.center, pos) <= p.gate; }))
            continue;
        std::vector<OrientedRect> occ;
        for (const auto* list : {&seen, &known})
            for (const auto& s : *list)
                if (distance(s.center, pos) > p.gate) occ.push_back(s);
        if (!clearly_observable(ego, sensors, pos, occ, p.visibility)) continue;
        auto v = verdict(DetectorId::D9, msg, 0.6,
                         "object " + std::to_string(o.object_id) + " at " + fmt_point(pos) + " in clear view but not perceived",
                         VerdictNote::victim_possible);
        v.time = now;
        return {v};
    }
    return {};
}

std::vector<MisbehaviorReport> emit_mbr(std::span<const DetectorVerdict> verdicts, StationId reporter, TimeMs now,
                                        double threshold) {
    std::vector<MisbehaviorReport> out;
    for (const auto& v : verdicts) {
        if (v.severity < threshold) continue;
        if (v.evidence.empty()) throw MbrError("verdict without evidence envelope");
        if (v.detector == DetectorId::D8 && !v.synchronized_pair)
            throw MbrError("D8 verdict without synchronized CAM/CPM pair");
        MisbehaviorReport r;
        r.reporter = reporter;
        r.suspect_cert_id = v.suspect_cert_id;
        r.detector_id = v.detector;
        r.evidence = v.evidence;
        r.synchronized_pair = v.synchronized_pair;
        r.created_at = now;
        out.push_back(std::move(r));
    }
    return out;
}

bool MbrAggregator::admit(DetectorId d, CertId suspect, TimeMs now) {
    auto [it, fresh] = last_.try_emplace({d, suspect}, now);
    if (fresh) return true;
    if (now - it->second < window_) return false;
    it->second = now;
    return true;
}

DetectorSuite::DetectorSuite(DetectorParams params, std::vector<DetectorId> enabled) : params_(params) {
    for (auto d : enabled) enabled_mask_ |= static_cast<std::uint16_t>(1u << static_cast<unsigned>(d));
}

bool DetectorSuite::enabled(DetectorId d) const {
    return (enabled_mask_ & (1u << static_cast<unsigned>(d))) != 0;
}

std::vector<DetectorVerdict> DetectorSuite::process(const DetectorInputs& in) {
    const auto& p = params_;
    for (const auto& d : in.fresh) {
        if (d.cpm()) {
            cpms_[d.sender()].push_back(d);
            rates_.record(d);
        } else if (d.cam()) {
            cams_[d.sender()].push_back(d);
            last_cam_[d.sender()] = d.received;
        }
    }
    const TimeMs keep = std::max({p.d4_window, p.rate_window, p.d8_cam_window}) + 1000;
    for (auto* buf : {&cpms_, &cams_})
        for (auto& [s, q] : *buf)
            while (!q.empty() && q.front().received < in.now - keep) q.pop_front();
    rates_.prune(in.now - keep);

    std::vector<DetectorVerdict> out;
    auto add = [&](std::vector<DetectorVerdict> v) {
        for (auto& x : v) out.push_back(std::move(x));
    };

    D4Context d4ctx{in.ldm, in.ego_footprint, in.foreign, in.mitigation_active, in.mitigation_window};
    for (const auto& d : in.fresh) {
        if (d.sender() == in.ego_station) continue;
        if (enabled(DetectorId::D1)) add(d1_implausible_speed(d, p.max_speed));
        const auto* cpm = d.cpm();
        if (cpm == nullptr) continue;
        if (enabled(DetectorId::D2)) add(d2_sensor_area_plausibility(d, p));
        if (enabled(DetectorId::D3) && in.registry != nullptr) add(d3_capability_attestation(d, *in.registry));
        if (enabled(DetectorId::D7)) add(d7_object_flood(d, p.trackable_limit));
        if (enabled(DetectorId::D5)) add(d5_free_space_contradiction(d, in.readings, in.ego, in.now, p));
        if (enabled(DetectorId::D9))
            add(d9_local_perception_consistency(d, in.readings, in.ego, in.sensors, in.now, p, in.ldm));
        if (enabled(DetectorId::D4)) {
            for (const auto& [b, q] : cpms_) {
                if (b == d.sender() || b == in.ego_station || q.empty()) continue;
                auto rs = rates_.senders().find(b);
                if (rs == rates_.senders().end() || in.now - rs->second.first_seen < p.d4_window) continue;
                std::vector<Delivered> window(q.begin(), q.end());
                add(d4_cross_cpm_consistency(d, window, d4ctx, p));
            }
        }
        if (enabled(DetectorId::D8)) {
            for (const auto& [x, q] : cams_) {
                if (x == d.sender() || x == in.ego_station) continue;
                const Delivered* best = nullptr;
                TimeMs best_dt = 0;
                for (const auto& c : q) {
                    const TimeMs dt = std::abs(c.cam()->timestamp - cpm->management.generation_time);
                    if (dt <= p.d8_cam_window && (best == nullptr || dt < best_dt)) {
                        best = &c;
                        best_dt = dt;
                    }
                }
                if (best != nullptr) add(d8_cam_cpm_crosscheck(*best, d, p));
            }
        }
    }
    if (enabled(DetectorId::D6)) add(d6_rate_anomaly(rates_, in.now, in.readings, in.ego, last_cam_, p));
    return out;
}

}  // namespace cpsim
