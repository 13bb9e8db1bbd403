#pragma once

// Attack injection. Each attack id has one interception point in the tick
// pipeline: outgoing messages, ground-truth world, victim readings or victim
// clock.

#include <json.hpp>
#include <limits>
#include <random>
#include <span>
#include <string>

#include "cpsim/cps.hpp"

namespace cpsim {

enum class AttackId : std::uint8_t {
    T3_A, T3_B, T3_C, T3_D, T3_E, T3_F, T3_G, T3_H, T3_I, T3_K, T3_L, T3_M, T3_N,
    T4_A, T4_B, T4_C, FIG4_EEBL,
};

inline constexpr std::size_t kAttackCount = 17;

std::string_view to_string(AttackId);
std::optional<AttackId> attack_from_string(std::string_view);

enum class InjectionPoint : std::uint8_t { message_out, world, sensor_in, clock };
std::string_view to_string(InjectionPoint);

struct AttackInfo {
    AttackId id;
    std::string_view row;  // "III-A" ... "IV-C", "Fig4"
    InjectionPoint point;
    std::optional<DetectorId> detector;
    std::string_view summary;
    std::string_view parameters;  // name=default, comma separated
};

std::span<const AttackInfo> attack_catalog();
const AttackInfo& attack_info(AttackId);

enum class Membership : std::uint8_t { internal, external };
enum class Motivation : std::uint8_t { malicious, rational };
enum class Activity : std::uint8_t { active, passive };
enum class Scope : std::uint8_t { local, extended };
enum class AttackPath : std::uint8_t { direct, indirect };

struct AttackerProfile {
    Membership membership = Membership::internal;
    Motivation motivation = Motivation::malicious;
    Activity activity = Activity::active;
    Scope scope = Scope::local;
    AttackPath path = AttackPath::direct;
};

struct AttackSpec {
    AttackId id = AttackId::T3_A;
    StationId attacker = 0;  // 0 for physical attackers without a station
    std::optional<StationId> victim;
    TimeMs start = 0;
    TimeMs stop = std::numeric_limits<TimeMs>::max();
    AttackerProfile profile;
    nlohmann::json params = nlohmann::json::object();

    bool active_at(TimeMs t) const { return t >= start && t < stop; }
    bool injects() const { return profile.activity == Activity::active; }
    double number(const char* name, double fallback) const;
    Vec2 vec(const char* name, Vec2 fallback) const;
};

/// Entity id used for the decoy of the attack at `index` in the scenario list.
inline EntityId decoy_id(std::size_t index) { return static_cast<EntityId>(10000 + index); }

/// Station id of the extra pseudonym the T4_A attacker signs forged CAMs with.
StationId pseudonym_station(const AttackSpec& spec);

class AttackConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Checks parameter presence and types against the attack's needs.
void validate_attack(const AttackSpec& spec, const WorldState& world);

/// Per-attack mutable state carried across ticks.
struct AttackState {
    std::optional<Vec2> anchor;
    std::uint64_t injected = 0;
};

struct OutgoingContext {
    TimeMs now = 0;
    TimeMs tick = 100;
    const StationSelf* self = nullptr;
    const WorldState* world = nullptr;
    const LocalDynamicMap* ldm = nullptr;
    std::span<const SensorSpec> sensors;
    std::size_t trackable_limit = 255;
    std::mt19937_64* rng = nullptr;
};

/// Messages a station is about to sign, in emission order, plus free-form
/// annotations for the trace.
struct Outgoing {
    std::vector<Message> messages;
    std::vector<std::string> annotations;
};

/// Mutates the attacker's outgoing stream (or, for T3_C, the victim's).
void inject_message_out(const AttackSpec& spec, AttackState& state, Outgoing& out, const OutgoingContext& ctx);

/// Adds the attack's decoy entities (hidden until the attack window opens).
void setup_world(const AttackSpec& spec, std::size_t index, WorldState& world);

/// Per-tick ground-truth manipulation.
void inject_world(const AttackSpec& spec, std::size_t index, WorldState& world);

/// Victim-side perception and positioning tampering.
void inject_sensor_in(const AttackSpec& spec, TimeMs now, std::vector<SensorReading>& readings, StationSelf& self);

/// Victim clock skew in ms (0 outside the window).
TimeMs inject_clock(const AttackSpec& spec, TimeMs now);

struct EeblTimeline {
    TimeMs step1_start = 0;
    TimeMs step2_start = 0;
    TimeMs conflict_start = 0;
    TimeMs conflict_end = 0;
};

/// Scripted phases of the composite EEBL attack.
EeblTimeline run_eebl_composite(const AttackSpec& spec);

}  // namespace cpsim
