#include "cpsim/simulation.hpp"

#include <algorithm>
#include <exception>
#include <sstream>

#include "cpsim/message_json.hpp"

#ifdef CPSIM_HAVE_OPENMP
#include <omp.h>
#endif

namespace cpsim {

using nlohmann::json;

bool RunMetrics::eebl_in_state(StationId station, EeblState state, TimeMs from, TimeMs to) const {
    EeblState current = EeblState::normal;
    TimeMs since = 0;
    auto overlaps = [&](TimeMs a, TimeMs b) { return current == state && a < to && b > from; };
    for (const auto& c : eebl) {
        if (c.station != station) continue;
        if (overlaps(since, c.time)) return true;
        current = c.state;
        since = c.time;
    }
    return overlaps(since, std::max(duration, to));
}

std::size_t RunMetrics::verdicts_against(CertId cert, std::optional<VerdictNote> note) const {
    return static_cast<std::size_t>(std::count_if(verdicts.begin(), verdicts.end(), [&](const VerdictRecord& v) {
        return v.suspect == cert && (!note || v.note == *note);
    }));
}

TraceWriter::TraceWriter(const std::string& path, bool keep) : keep_(keep) {
    if (!path.empty()) {
        file_.open(path);
        if (!file_) throw std::runtime_error("cannot open trace file " + path);
    }
}

void TraceWriter::write(const json& record) {
    const std::string line = record.dump();
    hash_.update(line);
    hash_.update("\n");
    ++count_;
    if (file_.is_open()) file_ << line << '\n';
    if (keep_) lines_.push_back(line);
}

std::string TraceWriter::finish() {
    const auto digest = hash_.peek();
    const std::string hex = to_hex(digest);
    const json footer = {{"type", "footer"}, {"lines", count_}, {"hash", hex}};
    const std::string line = footer.dump();
    if (file_.is_open()) {
        file_ << line << '\n';
        file_.close();
    }
    if (keep_) lines_.push_back(line);
    return hex;
}

namespace {

constexpr std::size_t kEnvelopeOverhead = 8 + kTagSize;  // cert id + tag

bool is_message_out(const AttackSpec& a) { return attack_info(a.id).point == InjectionPoint::message_out; }

bool attacker_emits(const AttackSpec& a) { return is_message_out(a) && a.id != AttackId::T3_C; }

}  // namespace

Simulation::Simulation(const ScenarioConfig& cfg, RunOptions opts)
    : cfg_(cfg),
      opts_(std::move(opts)),
      world_(build_world(cfg)),
      cbr_(cfg.channel.window_ms, cfg.channel.capacity_bytes_per_window),
      channel_rng_(mix_seed(cfg.seed, 0xc4a77e1ULL)),
      attack_rng_(mix_seed(cfg.seed, 0xa77ac4ULL)),
      trace_(opts_.trace_path, opts_.keep_trace) {
    metrics_.scenario = cfg.name;
    metrics_.seed = cfg.seed;
    metrics_.duration = cfg.duration_ms;
    attack_state_.resize(cfg.attacks.size());

    std::set<StationId> uncertified;
    for (const auto& a : cfg.attacks)
        if (attacker_emits(a) && a.profile.membership == Membership::external) uncertified.insert(a.attacker);

    const TimeMs valid_to = cfg.duration_ms + 60000;
    auto enroll = [&](StationId s, const std::vector<SensorSpec>* sensors) {
        Certificate c;
        c.cert_id = cert_of(s);
        c.holder_station = s;
        c.valid_from = 0;
        c.valid_to = valid_to;
        if (cfg.attestation && sensors != nullptr) {
            std::vector<AttestedCapability> caps;
            for (const auto& sp : *sensors) {
                auto it = std::find_if(caps.begin(), caps.end(),
                                       [&](const AttestedCapability& x) { return x.sensor_type == sp.sensor_type; });
                if (it == caps.end())
                    caps.push_back({sp.sensor_type, sp.range});
                else
                    it->max_range = std::max(it->max_range, sp.range);
            }
            c.attested_capabilities = caps;
        }
        registry_.enroll(c, derive_key(cfg.seed, c.cert_id));
        certs_[s] = c.cert_id;
        return c.cert_id;
    };

    for (const auto& ec : cfg.entities) {
        if (!ec.station) continue;
        StationNode n;
        n.config = *ec.station;
        n.entity = ec.entity.id;
        n.sensors = ec.sensors;
        n.ldm = LocalDynamicMap(n.config.id);
        if (n.config.certified && !uncertified.contains(n.config.id)) n.cert = enroll(n.config.id, &ec.sensors);
        for (const auto& a : cfg.attacks) {
            if (attacker_emits(a) && a.attacker == n.config.id) n.attacker = true;
            if (a.id == AttackId::T3_C && a.victim == n.config.id)
                n.config.cps.segment_objects = static_cast<std::size_t>(a.number("segment_objects", 4));
        }
        if (!n.attacker && !cfg.detectors.enabled.empty())
            n.detectors.emplace(cfg.detectors.params, cfg.detectors.enabled);
        n.aggregator = MbrAggregator(cfg.detectors.params.aggregation_window);
        nodes_.push_back(std::move(n));
    }
    std::sort(nodes_.begin(), nodes_.end(),
              [](const StationNode& a, const StationNode& b) { return a.config.id < b.config.id; });

    for (const auto& a : cfg.attacks) {
        if (a.id == AttackId::T4_A && certs_.contains(a.attacker)) enroll(pseudonym_station(a), nullptr);
        AttackOutcome o;
        o.id = a.id;
        o.detector = attack_info(a.id).detector;
        StationId carrier = 0;
        if (a.id == AttackId::T4_A) carrier = pseudonym_station(a);
        else if (attacker_emits(a)) carrier = a.attacker;
        else if (a.victim) carrier = *a.victim;
        if (auto it = certs_.find(carrier); it != certs_.end() && attack_info(a.id).point != InjectionPoint::world)
            o.target_cert = it->second;
        for (StationId s : {a.attacker, a.victim.value_or(0), a.id == AttackId::T4_A ? pseudonym_station(a) : 0})
            if (auto it = certs_.find(s); it != certs_.end()) attack_certs_.insert(it->second);
        metrics_.attacks.push_back(o);
    }

    trace_.write({{"type", "header"},
                  {"format", "cpsim-trace"},
                  {"version", 1},
                  {"name", cfg.name},
                  {"seed", cfg.seed},
                  {"config_hash", to_hex(sha256(cfg.source.dump()))},
                  {"config", cfg.source}});
}

const StationNode* Simulation::node(StationId id) const {
    for (const auto& n : nodes_)
        if (n.config.id == id) return &n;
    return nullptr;
}

CertId Simulation::signing_cert(StationId header_station) const {
    auto it = certs_.find(header_station);
    return it == certs_.end() ? 0 : it->second;
}

void Simulation::sense_all() {
    const auto count = static_cast<long>(nodes_.size());
    std::exception_ptr failure;
#ifdef CPSIM_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic) if (opts_.parallel)
#endif
    for (long i = 0; i < count; ++i) {
        StationNode& n = nodes_[static_cast<std::size_t>(i)];
        try {
            n.readings = sense(n.config.id, world_);
            n.free_space.clear();
            if (n.config.cps.include_free_space && !n.sensors.empty())
                n.free_space = free_space(n.config.id, world_, n.config.cps.free_space_rays);
        } catch (...) {
#ifdef CPSIM_HAVE_OPENMP
#pragma omp critical
#endif
            failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

void Simulation::prepare_self(StationNode& n) {
    const Entity* e = world_.find(n.entity);
    StationSelf& s = n.self;
    s.id = n.config.id;
    s.type = n.config.type;
    s.reported = e->pose;
    s.sensing_origin = e->pose.position;
    s.speed = e->speed;
    s.clock_offset = 0;
    for (const auto& a : cfg_.attacks) {
        if (a.victim != n.config.id) continue;
        s.clock_offset += inject_clock(a, world_.time);
        if (attack_info(a.id).point == InjectionPoint::sensor_in) inject_sensor_in(a, world_.time, n.readings, s);
    }
}

std::vector<Simulation::Wire> Simulation::generate(StationNode& n, double cbr) {
    const TimeMs now = world_.time;
    const auto& cps = n.config.cps;
    update_from_readings(n.ldm, n.readings, n.self.sensing_origin, now, cps.gate);
    expire_tracks(n.ldm, now, cps.track_ttl);

    Outgoing out;
    if (n.config.send_cam) {
        CamMessage cam;
        cam.header.station_id = n.config.id;
        cam.position = n.self.reported.position;
        cam.speed = n.self.speed;
        cam.heading = normalize_heading(n.self.reported.heading);
        cam.timestamp = now + n.self.clock_offset;
        out.messages.emplace_back(cam);
    }
    auto gen = generate_cpm(n.self, n.ldm, n.readings, n.sensors, n.free_space, now, cps, n.generation, cbr, n.foreign);
    if (gen.person_group_fired) ++metrics_.person_group_activations;
    for (auto& seg : gen.segments) out.messages.emplace_back(std::move(seg));

    OutgoingContext ctx{now, cfg_.tick_ms, &n.self, &world_, &n.ldm, n.sensors, cps.trackable_limit, &attack_rng_};
    std::set<StationId> pseudonyms;
    for (std::size_t i = 0; i < cfg_.attacks.size(); ++i) {
        const auto& a = cfg_.attacks[i];
        if (!is_message_out(a)) continue;
        const bool mine = a.id == AttackId::T3_C ? a.victim == n.config.id : a.attacker == n.config.id;
        if (!mine) continue;
        if (a.id == AttackId::T4_A) pseudonyms.insert(pseudonym_station(a));
        const std::size_t before = out.annotations.size();
        inject_message_out(a, attack_state_[i], out, ctx);
        for (std::size_t k = before; k < out.annotations.size(); ++k) {
            metrics_.annotations.push_back(out.annotations[k]);
            trace_.write({{"type", "annotation"}, {"t", now}, {"attack", to_string(a.id)}, {"text", out.annotations[k]}});
        }
    }

    std::vector<Wire> wire;
    for (const auto& m : out.messages) {
        const StationId hs = message_station(m);
        CertId cert = n.cert;
        if (hs != n.config.id && pseudonyms.contains(hs)) cert = signing_cert(hs);
        SignedEnvelope env;
        try {
            env = cert != 0 ? sign(m, cert, registry_) : unsigned_envelope(m);
        } catch (const EncodeError& e) {
            ++metrics_.encode_failures;
            trace_.write({{"type", "encode_error"}, {"t", now}, {"from", n.config.id}, {"field", e.field()}});
            continue;
        }
        Wire w;
        w.envelope = std::make_shared<const SignedEnvelope>(std::move(env));
        try {
            w.message = std::make_shared<const Message>(decode(w.envelope->payload));
        } catch (const DecodeError&) {
        }
        w.sender = n.config.id;
        cbr_.record(now, w.envelope->payload.size() + kEnvelopeOverhead);
        ++metrics_.envelopes_sent;
        json rec = {{"type", "tx"},
                    {"t", now},
                    {"from", n.config.id},
                    {"cert", w.envelope->cert_id},
                    {"kind", to_string(message_kind(m))},
                    {"bytes", w.envelope->payload.size()},
                    {"digest", envelope_digest(*w.envelope)}};
        if (cfg_.record_payloads) {
            rec["payload"] = to_hex(w.envelope->payload);
            rec["message"] = to_json(m);
        }
        trace_.write(rec);
        wire.push_back(std::move(w));
    }
    return wire;
}

void Simulation::record_verdicts(StationNode& n, std::vector<DetectorVerdict> verdicts) {
    const TimeMs now = world_.time;
    const double threshold = cfg_.detectors.params.reporting_threshold;
    for (const auto& v : verdicts) {
        VerdictRecord rec{now, n.config.id, v.detector, v.suspect_cert_id, v.suspect_station, v.co_suspect, v.note,
                          v.severity};
        metrics_.verdicts.push_back(rec);
        json tv = {{"type", "verdict"},   {"t", now},          {"receiver", n.config.id},
                   {"detector", to_string(v.detector)}, {"suspect", v.suspect_cert_id},
                   {"note", to_string(v.note)}, {"severity", v.severity}, {"detail", v.detail}};
        if (v.co_suspect) tv["co_suspect"] = *v.co_suspect;
        trace_.write(tv);

        const auto reports = emit_mbr(std::span(&v, 1), n.config.id, now, threshold);
        for (const auto& r : reports) {
            if (!v.co_suspect && r.suspect_cert_id != 0 && n.distrusted.insert(r.suspect_cert_id).second) {
                const std::size_t purged = n.ldm.purge_reporter(r.suspect_cert_id);
                std::erase_if(n.denms, [&](const DenmRecord& d) { return d.cert == r.suspect_cert_id; });
                trace_.write({{"type", "distrust"}, {"t", now}, {"station", n.config.id},
                              {"cert", r.suspect_cert_id}, {"purged", purged}});
            }
            if (!n.aggregator.admit(r.detector_id, r.suspect_cert_id, now)) continue;
            metrics_.mbrs.push_back({now, n.config.id, r.suspect_cert_id, r.detector_id, r.evidence.size()});
            ++metrics_.mbr_counts[r.detector_id];
            ++metrics_.mbr_total;
            if (!attack_certs_.contains(r.suspect_cert_id)) ++metrics_.false_positive_mbrs;
            json evidence = json::array();
            for (const auto& e : r.evidence)
                evidence.push_back({{"cert", e.cert_id}, {"digest", envelope_digest(e)}, {"payload", to_hex(e.payload)},
                                    {"tag", to_hex(e.signature_tag)}});
            json tm = {{"type", "mbr"},      {"t", now},        {"reporter", n.config.id},
                       {"suspect", r.suspect_cert_id}, {"detector", to_string(r.detector_id)},
                       {"evidence", evidence}};
            if (r.synchronized_pair)
                tm["pair"] = {to_json(r.synchronized_pair->first), to_json(r.synchronized_pair->second)};
            trace_.write(tm);
            for (std::size_t i = 0; i < metrics_.attacks.size(); ++i) {
                auto& o = metrics_.attacks[i];
                if (o.detected || o.target_cert == 0 || o.target_cert != r.suspect_cert_id ||
                    o.detector != r.detector_id)
                    continue;
                o.detected = true;
                o.time_to_detection = std::max<TimeMs>(0, now - cfg_.attacks[i].start);
            }
        }
    }
}

void Simulation::deliver(StationNode& n, const std::vector<Wire>& wire, double cbr) {
    const TimeMs now = world_.time;
    const Entity* me = world_.find(n.entity);
    FusionParams fp;
    fp.gate = n.config.cps.gate;
    fp.ego_position = me->pose.position;
    fp.ego_station = n.config.id;
    std::vector<Delivered> fresh;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& w : wire) {
        if (w.sender == n.config.id) continue;
        if (cfg_.channel.loss_rate > 0.0 && u(channel_rng_) < cfg_.channel.loss_rate) continue;
        const VerifyStatus vs = verify(*w.envelope, registry_, now);
        if (vs != VerifyStatus::accept) {
            ++metrics_.rejected[vs];
            continue;
        }
        if (!w.message) {
            ++metrics_.rejected[VerifyStatus::malformed];
            continue;
        }
        const CertId cert = w.envelope->cert_id;
        if (n.distrusted.contains(cert) || n.ldm.seen_envelope(*w.envelope)) continue;
        n.ldm.remember_envelope(*w.envelope, now);
        ++metrics_.envelopes_accepted;
        const Message& m = *w.message;
        if (const auto* cpm = std::get_if<CpmMessage>(&m)) {
            fuse_cpm(n.ldm, *cpm, cert, now, fp);
            n.foreign.record(*cpm, now);
        } else if (const auto* cam = std::get_if<CamMessage>(&m)) {
            fuse_cam(n.ldm, *cam, cert, now, fp);
        } else if (const auto* denm = std::get_if<DenmMessage>(&m)) {
            n.denms.push_back({*denm, cert, now});
        } else {
            continue;
        }
        fresh.push_back({w.envelope, w.message, now});
    }
    const auto& rp = n.config.cps.redundancy;
    n.foreign.prune(now - std::max(n.config.cps.listen_window, rp.window) - 1000);
    n.ldm.forget_envelopes_before(now - 5000);

    if (n.detectors) {
        const OrientedRect fp_rect = me->footprint();
        DetectorInputs in;
        in.now = now;
        in.ego_station = n.config.id;
        in.ego = Pose{me->pose.position, me->pose.heading};
        in.ego_footprint = fp_rect;
        in.sensors = n.sensors;
        in.readings = n.readings;
        in.fresh = fresh;
        in.ldm = &n.ldm;
        in.foreign = &n.foreign;
        in.registry = &registry_;
        in.mitigation_active = rp.enabled && cbr > rp.cbr_threshold;
        in.mitigation_window = rp.window;
        record_verdicts(n, n.detectors->process(in));
    }

    if (n.config.type == StationType::vehicle) {
        std::erase_if(n.denms, [&](const DenmRecord& d) { return now - d.received > cfg_.eebl.denm_ttl; });
        const EeblState s = eebl_decide(n.ldm, n.readings, me->pose, n.sensors, n.denms, now, cfg_.eebl);
        if (s != n.eebl) {
            n.eebl = s;
            metrics_.eebl.push_back({now, n.config.id, s});
            trace_.write({{"type", "eebl"}, {"t", now}, {"station", n.config.id}, {"state", to_string(s)}});
        }
    }
}

void Simulation::tick() {
    const TimeMs now = world_.time;
    for (std::size_t i = 0; i < cfg_.attacks.size(); ++i) inject_world(cfg_.attacks[i], i, world_);
    sense_all();
    const double cbr = cbr_.ratio(now);
    cbr_sum_ += cbr;
    ++ticks_;

    std::vector<Wire> outgoing;
    for (auto& n : nodes_) {
        prepare_self(n);
        auto w = generate(n, cbr);
        for (auto& x : w) outgoing.push_back(std::move(x));
    }
    for (auto& n : nodes_) deliver(n, in_flight_, cbr);
    in_flight_ = std::move(outgoing);

    trace_.write({{"type", "tick"}, {"t", now}, {"state", to_hex(state_hash(world_))}, {"cbr", cbr}});
    step_in_place(world_, cfg_.tick_ms);
}

RunMetrics Simulation::finish() {
    while (!done()) tick();
    metrics_.mean_cbr = ticks_ == 0 ? 0.0 : cbr_sum_ / static_cast<double>(ticks_);
    for (auto& o : metrics_.attacks)
        if (o.target_cert != 0) {
            o.victim_possible = metrics_.verdicts_against(o.target_cert, VerdictNote::victim_possible);
            o.attacker_suspected = metrics_.verdicts_against(o.target_cert, VerdictNote::attacker_suspected);
        }
    json summary = {{"type", "summary"},
                    {"mbrs", metrics_.mbr_total},
                    {"verdicts", metrics_.verdicts.size()},
                    {"mean_cbr", metrics_.mean_cbr},
                    {"sent", metrics_.envelopes_sent},
                    {"accepted", metrics_.envelopes_accepted}};
    trace_.write(summary);
    metrics_.trace_hash = trace_.finish();
    return metrics_;
}

RunMetrics run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
    Simulation sim(cfg, opts);
    return sim.finish();
}

ReplayResult replay(const std::string& trace_path) {
    std::ifstream in(trace_path);
    if (!in) throw std::runtime_error("cannot open trace " + trace_path);
    std::string first, line, last;
    if (!std::getline(in, first)) throw std::runtime_error("empty trace " + trace_path);
    while (std::getline(in, line))
        if (!line.empty()) last = line;
    const json header = json::parse(first);
    if (header.value("type", "") != "header" || header.value("format", "") != "cpsim-trace")
        throw std::runtime_error("not a cpsim trace: " + trace_path);
    ReplayResult r;
    if (!last.empty()) {
        const json footer = json::parse(last);
        if (footer.value("type", "") == "footer") r.recorded_hash = footer.value("hash", "");
    }
    r.metrics = run_scenario(parse_scenario(header.at("config")));
    r.matches = !r.recorded_hash.empty() && r.recorded_hash == r.metrics.trace_hash;
    return r;
}

std::string render_metrics(const RunMetrics& m) {
    std::ostringstream os;
    os << "scenario " << m.scenario << " seed " << m.seed << " duration " << m.duration << " ms\n";
    os << "envelopes sent " << m.envelopes_sent << ", accepted deliveries " << m.envelopes_accepted;
    std::size_t rejected = 0;
    for (const auto& [k, v] : m.rejected) rejected += v;
    os << ", rejected deliveries " << rejected << "\n";
    os << "mean CBR " << m.mean_cbr << "\n";
    os << "MBRs " << m.mbr_total << " (false positives " << m.false_positive_mbrs << ")";
    for (const auto& [d, c] : m.mbr_counts) os << " " << to_string(d) << "=" << c;
    os << "\n";
    for (const auto& a : m.attacks) {
        os << "attack " << to_string(a.id) << " detector "
           << (a.detector ? std::string(to_string(*a.detector)) : std::string("none")) << ": "
           << (a.detected ? "detected" : "not detected");
        if (a.time_to_detection) os << " after " << *a.time_to_detection << " ms";
        os << "\n";
    }
    os << "EEBL transitions " << m.eebl.size() << "\n";
    for (const auto& c : m.eebl) os << "  t=" << c.time << " station " << c.station << " " << to_string(c.state) << "\n";
    os << "trace hash " << m.trace_hash << "\n";
    return os.str();
}

}  // namespace cpsim
