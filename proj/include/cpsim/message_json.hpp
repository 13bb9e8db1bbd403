#pragma once

// Human-readable structured text form of messages, used in traces.

#include <json.hpp>

#include "cpsim/messages.hpp"

namespace cpsim {

nlohmann::json to_json(const CpmMessage& m);
nlohmann::json to_json(const CamMessage& m);
nlohmann::json to_json(const DenmMessage& m);
nlohmann::json to_json(const MisbehaviorReport& m);
nlohmann::json to_json(const Message& m);

/// Short digest used to reference envelopes across trace records.
std::string envelope_digest(const SignedEnvelope& e);

}  // namespace cpsim
