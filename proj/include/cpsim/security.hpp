#pragma once

// Simplified authentication model: every certificate is bound to a secret
// key in a registry shared by all honest participants. A tag verifies iff it
// was computed over exactly the payload bytes under the certificate's key.

#include <map>
#include <memory>
#include <stdexcept>
#include <string_view>

#include "cpsim/messages.hpp"

namespace cpsim {

using SecretKey = std::array<std::uint8_t, 32>;

class SignatureScheme {
public:
    virtual ~SignatureScheme() = default;
    virtual std::string_view name() const = 0;
    virtual SignatureTag tag(const SecretKey& key, std::span<const std::uint8_t> payload, CertId cert) const = 0;
};

/// Default deterministic keyed-tag scheme (HMAC-SHA256 over payload || cert id).
class HmacSha256Scheme final : public SignatureScheme {
public:
    std::string_view name() const override { return "hmac-sha256"; }
    SignatureTag tag(const SecretKey& key, std::span<const std::uint8_t> payload, CertId cert) const override;
};

class KeyRegistry {
public:
    struct Entry {
        Certificate certificate;
        SecretKey key;
    };

    KeyRegistry();
    explicit KeyRegistry(std::shared_ptr<const SignatureScheme> scheme);

    void enroll(const Certificate& cert, const SecretKey& key);
    const Entry* find(CertId id) const;
    const Certificate* certificate(CertId id) const;
    const SignatureScheme& scheme() const { return *scheme_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::shared_ptr<const SignatureScheme> scheme_;
    std::map<CertId, Entry> entries_;
};

/// Derives a per-certificate key from a scenario seed.
SecretKey derive_key(std::uint64_t seed, CertId cert);

enum class SecurityErrorKind { unknown_certificate, expired };

class SecurityError : public std::runtime_error {
public:
    SecurityError(SecurityErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    SecurityErrorKind kind() const { return kind_; }

private:
    SecurityErrorKind kind_;
};

SignedEnvelope sign(const Message& message, CertId cert, const KeyRegistry& registry);
SignedEnvelope sign_payload(Bytes payload, TimeMs at, CertId cert, const KeyRegistry& registry);

/// Envelope emitted by a station without credentials: cert id 0, zero tag.
SignedEnvelope unsigned_envelope(const Message& message);

enum class VerifyStatus {
    accept,
    unknown_certificate,
    expired,
    bad_signature,
    holder_mismatch,
    malformed,
};

std::string_view to_string(VerifyStatus);

VerifyStatus verify(const SignedEnvelope& envelope, const KeyRegistry& registry, TimeMs now);

}  // namespace cpsim
