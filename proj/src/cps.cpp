#include "cpsim/cps.hpp"

#include <algorithm>

namespace cpsim {

bool should_include(const Track& track, Vec2 position, double speed, double heading, TimeMs now,
                    const GenerationThresholds& th) {
    const auto& last = track.last_included_in_cpm;
    if (!last) return true;
    return distance(position, last->position) > th.position_delta || std::abs(speed - last->speed) > th.speed_delta ||
           std::abs(angle_diff(heading, last->heading)) > th.heading_delta || now - last->time >= th.t_max;
}

bool should_include(const Track& track, TimeMs now, const GenerationThresholds& th) {
    return should_include(track, track.predicted(now), track.speed, track.heading, now, th);
}

void ForeignObjectLog::record(const CpmMessage& cpm, TimeMs received) {
    if (!cpm.perceived_objects) return;
    for (const auto& po : *cpm.perceived_objects)
        entries_.push_back({received, po.time_of_measurement, cpm.management.reference_position + po.relative_position,
                            po.speed, po.heading, cpm.header.station_id});
}

void ForeignObjectLog::prune(TimeMs before) {
    std::erase_if(entries_, [before](const ForeignObject& e) { return e.received < before; });
}

bool ForeignObjectLog::reported_near(Vec2 at, TimeMs at_time, double gate, TimeMs since, TimeMs until,
                                     std::optional<StationId> excluding) const {
    for (const auto& e : entries_) {
        if (e.received < since || e.received > until) continue;
        if (excluding && e.sender == *excluding) continue;
        const Vec2 p = extrapolate(e.position, e.speed, e.heading, static_cast<double>(at_time - e.measured));
        if (distance(p, at) <= gate) return true;
    }
    return false;
}

std::vector<CpmCandidate> redundancy_filter(std::vector<CpmCandidate> candidates, double cbr, double threshold,
                                            const ForeignObjectLog& log, TimeMs window, TimeMs now, double gate) {
    if (cbr <= threshold) return candidates;
    std::erase_if(candidates, [&](const CpmCandidate& c) {
        return log.reported_near(c.world_position, now, gate, now - window, now, std::nullopt);
    });
    return candidates;
}

void CbrWindow::record(TimeMs t, std::size_t bytes) {
    log_.emplace_back(t, bytes);
    while (!log_.empty() && log_.front().first <= t - 2 * window_) log_.pop_front();
}

double CbrWindow::ratio(TimeMs now) const {
    if (capacity_ <= 0.0) return 0.0;
    double bytes = 0.0;
    for (const auto& [t, b] : log_)
        if (t > now - window_ && t <= now) bytes += static_cast<double>(b);
    return std::clamp(bytes / capacity_, 0.0, 1.0);
}

namespace {

Vec2 quantize_mm(Vec2 v) { return {std::round(v.x * 1000.0) / 1000.0, std::round(v.y * 1000.0) / 1000.0}; }

}  // namespace

CpmGeneration generate_cpm(const StationSelf& self, LocalDynamicMap& ldm, std::span<const SensorReading> readings,
                           std::span<const SensorSpec> sensors, std::span<const SensorFreeSpace> free_space,
                           TimeMs now, const CpsParams& params, CpsGenerationState& state, double cbr,
                           const ForeignObjectLog& foreign) {
    CpmGeneration gen;
    gen.trigger_time = now;
    const auto& th = params.thresholds;
    const TimeMs stamp = now + self.clock_offset;

    // Person/animal group rule: any such on-board track left out for too long
    // pulls every sensed person/animal into this CPM.
    for (const auto& [id, t] : ldm.tracks()) {
        if (t.classification != ObjectClass::person_or_animal || !t.local_entity) continue;
        if (!t.last_included_in_cpm || now - t.last_included_in_cpm->time >= th.person_group_interval) {
            gen.person_group_fired = true;
            break;
        }
    }

    std::vector<CpmCandidate> candidates;
    for (const auto& r : readings) {
        const Track* t = ldm.find_local(r.entity_id);
        if (t == nullptr) continue;
        if (self.type == StationType::rsu && t->kind == TrackKind::connected) continue;
        const Vec2 world = self.sensing_origin + r.relative_position;
        const bool dyn = should_include(*t, world, r.speed, r.heading, now, th);
        const bool group = gen.person_group_fired && r.classification == ObjectClass::person_or_animal;
        if (!dyn && !group) continue;
        PerceivedObject po;
        po.object_id = t->object_id;
        po.relative_position = r.relative_position;
        po.speed = r.speed;
        po.heading = r.heading;
        po.length = r.length;
        po.width = r.width;
        po.classification = r.classification;
        po.time_of_measurement = stamp;
        po.confidence = 0.9;
        candidates.push_back({t->object_id, world, po});
    }

    if (params.redundancy.enabled && params.redundancy.mode == RedundancyMode::frequency)
        candidates = redundancy_filter(std::move(candidates), cbr, params.redundancy.cbr_threshold, foreign,
                                       params.redundancy.window, now, params.gate);

    if (candidates.size() > params.trackable_limit) {
        std::stable_sort(candidates.begin(), candidates.end(), [&](const CpmCandidate& a, const CpmCandidate& b) {
            return norm(a.object.relative_position) < norm(b.object.relative_position);
        });
        candidates.resize(params.trackable_limit);
    }

    const bool due = !state.last_cpm || now - *state.last_cpm >= th.t_max;
    if (candidates.empty() && !due) return gen;

    for (const auto& c : candidates) {
        Track* t = ldm.find(c.object_id);
        t->last_included_in_cpm = InclusionSnapshot{now, c.world_position, c.object.speed, c.object.heading};
        gen.included.push_back(c.object_id);
    }
    state.last_cpm = now;

    CpmMessage base;
    base.header.station_id = self.id;
    base.management.generation_time = stamp;
    base.management.reference_position = self.reported.position;
    base.management.station_type = self.type;
    base.station_data = StationDataContainer{self.speed, normalize_heading(self.reported.heading)};
    std::vector<SensorInformation> info;
    for (const auto& s : sensors) info.push_back(to_sensor_information(s));
    base.sensor_info = info;

    std::vector<FreeSpaceAddendum> fs;
    if (params.include_free_space) {
        for (const auto& f : free_space) {
            FreeSpaceAddendum a;
            a.free_space_id = static_cast<std::uint8_t>(fs.size());
            for (const auto& p : f.polygon) a.polygon.push_back(quantize_mm(p - self.sensing_origin));
            a.sensor_ids = std::vector<std::uint8_t>{f.sensor_id};
            if (a.polygon.size() >= 3 && is_simple_polygon(a.polygon)) fs.push_back(std::move(a));
        }
    }

    const std::size_t per = std::max<std::size_t>(1, params.segment_objects);
    std::size_t i = 0;
    do {
        CpmMessage seg = base;
        std::vector<PerceivedObject> objs;
        for (std::size_t k = 0; k < per && i < candidates.size(); ++k, ++i) objs.push_back(candidates[i].object);
        seg.perceived_objects = std::move(objs);
        if (gen.segments.empty() && params.include_free_space) seg.free_space = fs;
        gen.segments.push_back(std::move(seg));
    } while (i < candidates.size());
    return gen;
}

namespace {

template <typename SensorT>
bool observable_impl(const Pose& observer, std::span<const SensorT> sensors, Vec2 point,
                     std::span<const OrientedRect> occluders, const VisibilityMargins& m) {
    for (const auto& s : sensors) {
        const SensorPose sp = sensor_pose(observer, s.mount_offset);
        const double d = distance(sp.origin, point);
        if (d > s.range - m.range || d < m.min_distance) continue;
        // Near the sensor a fixed angular margin is only centimeters wide, so
        // the metric occlusion margin also applies at the aperture edge.
        const double edge = std::max(m.aperture, rad2deg(std::atan2(m.occlusion, d)));
        if (s.aperture < 360.0 &&
            std::abs(angle_diff(bearing_of(point - sp.origin), sp.boresight)) > s.aperture / 2.0 - edge)
            continue;
        bool blocked = false;
        for (const auto& o : occluders) {
            const OrientedRect big = o.inflated(m.occlusion);
            if (big.contains(sp.origin) || segment_hits_rect(sp.origin, point, big)) {
                blocked = true;
                break;
            }
        }
        if (!blocked) return true;
    }
    return false;
}

}  // namespace

bool clearly_observable(const Pose& observer, std::span<const SensorSpec> sensors, Vec2 point,
                        std::span<const OrientedRect> occluders, const VisibilityMargins& m) {
    return observable_impl(observer, sensors, point, occluders, m);
}

bool clearly_observable(const Pose& observer, std::span<const SensorInformation> sensors, Vec2 point,
                        std::span<const OrientedRect> occluders, const VisibilityMargins& m) {
    return observable_impl(observer, sensors, point, occluders, m);
}

std::string_view to_string(EeblState s) {
    switch (s) {
        case EeblState::normal: return "normal";
        case EeblState::warn: return "warn";
        case EeblState::fail_safe: return "fail_safe";
    }
    return "?";
}

EeblState eebl_decide(const LocalDynamicMap& ldm, std::span<const SensorReading> readings, const Pose& ego,
                      std::span<const SensorSpec> sensors, std::span<const DenmRecord> denms, TimeMs now,
                      const EeblParams& params) {
    std::vector<Vec2> seen;
    std::vector<OrientedRect> seen_boxes;
    for (const auto& r : readings) {
        seen.push_back(ego.position + r.relative_position);
        seen_boxes.push_back({seen.back(), r.heading, r.length, r.width});
    }
    auto seen_near = [&](Vec2 p) {
        return std::any_of(seen.begin(), seen.end(), [&](Vec2 s) { return distance(s, p) <= params.gate; });
    };

    const Vec2 fwd = heading_vector(ego.heading);
    const Vec2 right = heading_vector(ego.heading + 90.0);
    for (const auto& [id, t] : ldm.tracks()) {
        if (t.last_local_update == now) continue;
        if (!t.has(source_cpm) && !t.has(source_cam)) continue;
        if (t.speed >= params.stationary_speed || t.classification != ObjectClass::other) continue;
        const Vec2 p = t.predicted(now);
        const Vec2 rel = p - ego.position;
        const double along = dot(rel, fwd);
        if (along <= 0.0 || along > params.corridor_length || std::abs(dot(rel, right)) > params.corridor_half_width)
            continue;
        if (seen_near(p)) continue;
        std::vector<OrientedRect> occ;
        for (const auto& b : seen_boxes)
            if (distance(b.center, p) > params.gate) occ.push_back(b);
        if (clearly_observable(ego, sensors, p, occ, params.margins)) return EeblState::fail_safe;
    }

    for (const auto& d : denms) {
        if (d.denm.event_type != EventType::emergency_brake || now - d.received > params.denm_ttl) continue;
        if (seen_near(d.denm.event_position)) return EeblState::warn;
        for (const auto& [id, t] : ldm.tracks())
            if ((t.has(source_cpm) || t.has(source_cam)) && distance(t.predicted(now), d.denm.event_position) <= params.gate)
                return EeblState::warn;
    }
    return EeblState::normal;
}

}  // namespace cpsim
