#pragma once

// Canonical binary encoding. Layout is documented in docs/wire_format.md;
// tests/golden holds the reference corpus.

#include <span>
#include <stdexcept>
#include <string>

#include "cpsim/messages.hpp"

namespace cpsim {

class EncodeError : public std::runtime_error {
public:
    explicit EncodeError(std::string field)
        : std::runtime_error("field out of representable range: " + field), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class DecodeErrorKind {
    truncated,
    unknown_message_id,
    unsupported_version,
    invariant_violation,
    trailing_bytes,
};

std::string_view to_string(DecodeErrorKind);

class DecodeError : public std::runtime_error {
public:
    DecodeError(DecodeErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    DecodeErrorKind kind() const { return kind_; }

private:
    DecodeErrorKind kind_;
};

Bytes canonical_bytes(const Message& m);
Bytes canonical_bytes(const CpmMessage& m);
Bytes canonical_bytes(const CamMessage& m);
Bytes canonical_bytes(const DenmMessage& m);
Bytes canonical_bytes(const MisbehaviorReport& m);

/// Strict inverse of canonical_bytes; throws DecodeError, never returns a partial message.
Message decode(std::span<const std::uint8_t> bytes);

/// Checks the structural invariants enforced by decode (used by encoders of
/// untrusted input and by tests). Returns an empty string when valid.
std::string invariant_violation(const CpmMessage& m);

}  // namespace cpsim
