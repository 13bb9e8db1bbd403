#include "cpsim/security.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "cpsim/codec.hpp"
#include "cpsim/hash.hpp"

namespace cpsim {

SignatureTag HmacSha256Scheme::tag(const SecretKey& key, std::span<const std::uint8_t> payload, CertId cert) const {
    Bytes input(payload.begin(), payload.end());
    for (int i = 0; i < 8; ++i) input.push_back(static_cast<std::uint8_t>(cert >> (8 * i)));
    SignatureTag out{};
    unsigned int len = 0;
    HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), input.data(), input.size(), out.data(), &len);
    return out;
}

KeyRegistry::KeyRegistry() : KeyRegistry(std::make_shared<HmacSha256Scheme>()) {}

KeyRegistry::KeyRegistry(std::shared_ptr<const SignatureScheme> scheme) : scheme_(std::move(scheme)) {}

void KeyRegistry::enroll(const Certificate& cert, const SecretKey& key) {
    if (cert.cert_id == 0) throw std::invalid_argument("certificate id 0 is reserved for unsigned traffic");
    if (cert.attested_capabilities)
        for (const auto& c : *cert.attested_capabilities)
            if (!(c.max_range > 0)) throw std::invalid_argument("attested max_range must be positive");
    entries_[cert.cert_id] = Entry{cert, key};
}

const KeyRegistry::Entry* KeyRegistry::find(CertId id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
}

const Certificate* KeyRegistry::certificate(CertId id) const {
    const Entry* e = find(id);
    return e ? &e->certificate : nullptr;
}

SecretKey derive_key(std::uint64_t seed, CertId cert) {
    std::string material = "cpsim-key/" + std::to_string(seed) + "/" + std::to_string(cert);
    return sha256(material);
}

SignedEnvelope sign_payload(Bytes payload, TimeMs at, CertId cert, const KeyRegistry& registry) {
    const auto* entry = registry.find(cert);
    if (entry == nullptr)
        throw SecurityError(SecurityErrorKind::unknown_certificate, "unknown certificate " + std::to_string(cert));
    if (at < entry->certificate.valid_from || at > entry->certificate.valid_to)
        throw SecurityError(SecurityErrorKind::expired, "certificate " + std::to_string(cert) + " not valid at " +
                                                            std::to_string(at));
    SignedEnvelope env;
    env.signature_tag = registry.scheme().tag(entry->key, payload, cert);
    env.payload = std::move(payload);
    env.cert_id = cert;
    return env;
}

SignedEnvelope sign(const Message& message, CertId cert, const KeyRegistry& registry) {
    return sign_payload(canonical_bytes(message), message_time(message), cert, registry);
}

SignedEnvelope unsigned_envelope(const Message& message) {
    SignedEnvelope env;
    env.payload = canonical_bytes(message);
    return env;
}

std::string_view to_string(VerifyStatus s) {
    switch (s) {
        case VerifyStatus::accept: return "accept";
        case VerifyStatus::unknown_certificate: return "unknown_certificate";
        case VerifyStatus::expired: return "expired";
        case VerifyStatus::bad_signature: return "bad_signature";
        case VerifyStatus::holder_mismatch: return "holder_mismatch";
        case VerifyStatus::malformed: return "malformed";
    }
    return "?";
}

VerifyStatus verify(const SignedEnvelope& envelope, const KeyRegistry& registry, TimeMs now) {
    const auto* entry = registry.find(envelope.cert_id);
    if (entry == nullptr) return VerifyStatus::unknown_certificate;
    const auto expected = registry.scheme().tag(entry->key, envelope.payload, envelope.cert_id);
    if (CRYPTO_memcmp(expected.data(), envelope.signature_tag.data(), kTagSize) != 0)
        return VerifyStatus::bad_signature;
    if (now < entry->certificate.valid_from || now > entry->certificate.valid_to) return VerifyStatus::expired;
    // Header: version (1), message id (1), station id (4, little-endian).
    if (envelope.payload.size() < 6) return VerifyStatus::malformed;
    StationId sender = 0;
    for (int i = 0; i < 4; ++i) sender |= static_cast<StationId>(envelope.payload[2 + i]) << (8 * i);
    if (sender != entry->certificate.holder_station) return VerifyStatus::holder_mismatch;
    return VerifyStatus::accept;
}

}  // namespace cpsim
