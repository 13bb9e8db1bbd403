#include <algorithm>

#include "cpsim/cps.hpp"

namespace cpsim {

Track& LocalDynamicMap::create(Track t) {
    t.object_id = next_object_id_++;
    auto [it, inserted] = tracks_.emplace(t.object_id, std::move(t));
    return it->second;
}

Track* LocalDynamicMap::find(std::uint32_t object_id) {
    auto it = tracks_.find(object_id);
    return it == tracks_.end() ? nullptr : &it->second;
}

const Track* LocalDynamicMap::find(std::uint32_t object_id) const {
    auto it = tracks_.find(object_id);
    return it == tracks_.end() ? nullptr : &it->second;
}

Track* LocalDynamicMap::find_station(StationId station) {
    for (auto& [id, t] : tracks_)
        if (t.station_id == station) return &t;
    return nullptr;
}

Track* LocalDynamicMap::find_local(EntityId entity) {
    for (auto& [id, t] : tracks_)
        if (t.local_entity == entity) return &t;
    return nullptr;
}

const Track* LocalDynamicMap::find_local(EntityId entity) const {
    for (const auto& [id, t] : tracks_)
        if (t.local_entity == entity) return &t;
    return nullptr;
}

namespace {

bool mergeable(const Track& a, const Track& b) {
    if (a.local_entity && b.local_entity && *a.local_entity != *b.local_entity) return false;
    if (a.station_id && b.station_id && *a.station_id != *b.station_id) return false;
    return true;
}

int keep_rank(const Track& t) { return (t.station_id ? 2 : 0) + (t.local_entity ? 1 : 0); }

void absorb(Track& keep, const Track& gone, TimeMs now) {
    const bool gone_fresher = gone.last_local_update == now && keep.last_local_update != now;
    if (gone_fresher || (gone.last_update > keep.last_update && keep.last_local_update != now)) {
        keep.position = gone.position;
        keep.speed = gone.speed;
        keep.heading = gone.heading;
        keep.length = gone.length;
        keep.width = gone.width;
        keep.classification = gone.classification;
        keep.last_update = gone.last_update;
    }
    keep.sources |= gone.sources;
    keep.reporters.insert(gone.reporters.begin(), gone.reporters.end());
    if (!keep.station_id) keep.station_id = gone.station_id;
    if (keep.station_id) keep.kind = TrackKind::connected;
    if (!keep.local_entity) {
        keep.local_entity = gone.local_entity;
        keep.last_local_update = gone.last_local_update;
    }
    if (gone.last_included_in_cpm &&
        (!keep.last_included_in_cpm || gone.last_included_in_cpm->time > keep.last_included_in_cpm->time))
        keep.last_included_in_cpm = gone.last_included_in_cpm;
}

}  // namespace

void LocalDynamicMap::merge_duplicates(TimeMs now, double gate) {
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<std::pair<std::uint32_t, Vec2>> pos;
        pos.reserve(tracks_.size());
        for (const auto& [id, t] : tracks_) pos.emplace_back(id, t.predicted(now));
        std::vector<std::uint32_t> removed;
        for (std::size_t i = 0; i < pos.size(); ++i) {
            if (std::find(removed.begin(), removed.end(), pos[i].first) != removed.end()) continue;
            for (std::size_t j = i + 1; j < pos.size(); ++j) {
                if (std::find(removed.begin(), removed.end(), pos[j].first) != removed.end()) continue;
                if (distance(pos[i].second, pos[j].second) >= gate) continue;
                Track& a = tracks_.at(pos[i].first);
                Track& b = tracks_.at(pos[j].first);
                if (!mergeable(a, b)) continue;
                const bool keep_a = keep_rank(a) >= keep_rank(b);
                Track& keep = keep_a ? a : b;
                const Track& gone = keep_a ? b : a;
                absorb(keep, gone, now);
                removed.push_back(gone.object_id);
                changed = true;
                if (!keep_a) break;
            }
        }
        for (auto id : removed) tracks_.erase(id);
    }
}

std::size_t LocalDynamicMap::purge_reporter(CertId cert) {
    std::size_t n = 0;
    for (auto it = tracks_.begin(); it != tracks_.end();) {
        const Track& t = it->second;
        const bool only_cert = !t.reporters.empty() &&
                               std::all_of(t.reporters.begin(), t.reporters.end(), [&](CertId c) { return c == cert; });
        if (t.v2x_only() && only_cert) {
            it = tracks_.erase(it);
            ++n;
        } else {
            ++it;
        }
    }
    return n;
}

bool LocalDynamicMap::seen_envelope(const SignedEnvelope& e) const {
    return seen_.contains({e.cert_id, e.signature_tag});
}

void LocalDynamicMap::remember_envelope(const SignedEnvelope& e, TimeMs now) {
    seen_.emplace(std::make_pair(e.cert_id, e.signature_tag), now);
}

void LocalDynamicMap::forget_envelopes_before(TimeMs t) {
    std::erase_if(seen_, [t](const auto& kv) { return kv.second < t; });
}

Digest LocalDynamicMap::hash() const {
    Sha256Stream s;
    s.update_pod(owner_);
    for (const auto& [id, t] : tracks_) {
        s.update_pod(id);
        const std::int64_t q[5] = {std::llround(t.position.x * 1000), std::llround(t.position.y * 1000),
                                   std::llround(t.speed * 1000), std::llround(t.heading * 1000), t.last_update};
        s.update_pod(q);
        const std::uint8_t meta[3] = {static_cast<std::uint8_t>(t.kind), t.sources,
                                      static_cast<std::uint8_t>(t.classification)};
        s.update_pod(meta);
    }
    return s.peek();
}

void update_from_readings(LocalDynamicMap& ldm, std::span<const SensorReading> readings, Vec2 ego_position,
                          TimeMs now, double gate) {
    for (const auto& r : readings) {
        const Vec2 world = ego_position + r.relative_position;
        Track* t = ldm.find_local(r.entity_id);
        if (t == nullptr) t = ldm.nearest(world, now, gate, [](const Track& c) { return !c.local_entity; });
        if (t == nullptr) t = &ldm.create(Track{});
        t->position = world;
        t->speed = r.speed;
        t->heading = r.heading;
        t->length = r.length;
        t->width = r.width;
        t->classification = r.classification;
        t->last_update = now;
        t->last_local_update = now;
        t->local_entity = r.entity_id;
        t->sources |= source_local_sensor;
    }
}

namespace {

void overwrite_kinematics(Track& t, Vec2 pos, double speed, double heading, TimeMs now) {
    if (t.last_local_update == now) return;  // on-board measurement of this tick wins
    t.position = pos;
    t.speed = speed;
    t.heading = heading;
    t.last_update = now;
}

Track& upsert_station(LocalDynamicMap& ldm, StationId sid, Vec2 pos, TimeMs now, double gate) {
    Track* t = ldm.find_station(sid);
    if (t == nullptr) t = ldm.nearest(pos, now, gate, [](const Track& c) { return !c.station_id; });
    if (t == nullptr) {
        Track fresh;
        fresh.position = pos;
        fresh.last_update = now;
        t = &ldm.create(fresh);
    }
    t->station_id = sid;
    t->kind = TrackKind::connected;
    return *t;
}

}  // namespace

IngestionRecord fuse_cpm(LocalDynamicMap& ldm, const CpmMessage& cpm, CertId cert, TimeMs now,
                         const FusionParams& params) {
    IngestionRecord rec;
    rec.status = IngestStatus::accepted;
    const StationId sid = cpm.header.station_id;
    if (sid == params.ego_station) return rec;

    const Vec2 ref = cpm.management.reference_position;
    const double dt_sender = static_cast<double>(now - cpm.management.generation_time);
    const double s_speed = cpm.station_data ? cpm.station_data->speed : 0.0;
    const double s_heading = cpm.station_data ? cpm.station_data->heading : 0.0;
    const Vec2 s_pos = extrapolate(ref, s_speed, s_heading, dt_sender);
    {
        Track& st = upsert_station(ldm, sid, s_pos, now, params.gate);
        overwrite_kinematics(st, s_pos, s_speed, s_heading, now);
        st.sources |= source_cpm;
        st.reporters.insert(cert);
        rec.sender_track = st.object_id;
    }

    if (cpm.perceived_objects) {
        for (const auto& po : *cpm.perceived_objects) {
            const Vec2 world = ref + po.relative_position;
            const Vec2 comp =
                extrapolate(world, po.speed, po.heading, static_cast<double>(now - po.time_of_measurement));
            if (distance(comp, params.ego_position) < params.gate) continue;
            Track* t = ldm.nearest(comp, now, params.gate, [sid](const Track& c) { return c.station_id != sid; });
            if (t != nullptr) {
                ++rec.merged;
            } else {
                t = &ldm.create(Track{});
                t->last_update = now;
                ++rec.created;
            }
            if (t->last_local_update != now) {
                t->length = po.length;
                t->width = po.width;
                t->classification = po.classification;
            }
            overwrite_kinematics(*t, comp, po.speed, po.heading, now);
            t->sources |= source_cpm;
            t->reporters.insert(cert);
        }
    }
    ldm.merge_duplicates(now, params.merge_distance);
    return rec;
}

IngestionRecord fuse_cam(LocalDynamicMap& ldm, const CamMessage& cam, CertId cert, TimeMs now,
                         const FusionParams& params) {
    IngestionRecord rec;
    rec.status = IngestStatus::accepted;
    const StationId sid = cam.header.station_id;
    if (sid == params.ego_station) return rec;
    const Vec2 pos = extrapolate(cam.position, cam.speed, cam.heading, static_cast<double>(now - cam.timestamp));
    const bool existed = ldm.find_station(sid) != nullptr ||
                         ldm.nearest(pos, now, params.gate, [](const Track& c) { return !c.station_id; }) != nullptr;
    Track& t = upsert_station(ldm, sid, pos, now, params.gate);
    overwrite_kinematics(t, pos, cam.speed, cam.heading, now);
    t.sources |= source_cam;
    t.reporters.insert(cert);
    rec.sender_track = t.object_id;
    (existed ? rec.merged : rec.created) = 1;
    ldm.merge_duplicates(now, params.merge_distance);
    return rec;
}

namespace {

template <typename Msg, typename Fuse>
IngestionRecord ingest_envelope(LocalDynamicMap& ldm, const SignedEnvelope& envelope, const KeyRegistry& registry,
                                TimeMs now, const FusionParams& params, Fuse&& fuse) {
    IngestionRecord rec;
    if (ldm.seen_envelope(envelope)) {
        rec.status = IngestStatus::duplicate;
        return rec;
    }
    rec.verify = verify(envelope, registry, now);
    if (rec.verify != VerifyStatus::accept) {
        rec.status = IngestStatus::rejected;
        return rec;
    }
    Message m;
    try {
        m = decode(envelope.payload);
    } catch (const DecodeError& e) {
        rec.status = IngestStatus::decode_error;
        rec.decode_error = e.kind();
        return rec;
    }
    const auto* msg = std::get_if<Msg>(&m);
    if (msg == nullptr) {
        rec.status = IngestStatus::wrong_type;
        return rec;
    }
    IngestionRecord out = fuse(ldm, *msg, envelope.cert_id, now, params);
    ldm.remember_envelope(envelope, now);
    return out;
}

}  // namespace

IngestionRecord ingest_cpm(LocalDynamicMap& ldm, const SignedEnvelope& envelope, const KeyRegistry& registry,
                           TimeMs now, const FusionParams& params) {
    return ingest_envelope<CpmMessage>(ldm, envelope, registry, now, params,
                                       [](auto&&... a) { return fuse_cpm(a...); });
}

IngestionRecord ingest_cam(LocalDynamicMap& ldm, const SignedEnvelope& envelope, const KeyRegistry& registry,
                           TimeMs now, const FusionParams& params) {
    return ingest_envelope<CamMessage>(ldm, envelope, registry, now, params,
                                       [](auto&&... a) { return fuse_cam(a...); });
}

std::size_t expire_tracks(LocalDynamicMap& ldm, TimeMs now, TimeMs ttl) {
    if (ttl <= 0) throw std::invalid_argument("expire_tracks requires ttl > 0");
    std::vector<std::uint32_t> stale;
    for (const auto& [id, t] : ldm.tracks())
        if (now - t.last_update > ttl) stale.push_back(id);
    for (auto id : stale) ldm.erase(id);
    return stale.size();
}

}  // namespace cpsim
