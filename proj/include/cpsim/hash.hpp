#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace cpsim {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> data);

/// Incremental SHA-256 used for trace and state hashing.
class Sha256Stream {
public:
    Sha256Stream();
    ~Sha256Stream();
    Sha256Stream(const Sha256Stream&) = delete;
    Sha256Stream& operator=(const Sha256Stream&) = delete;
    Sha256Stream(Sha256Stream&&) noexcept;
    Sha256Stream& operator=(Sha256Stream&&) noexcept;

    void update(std::span<const std::uint8_t> data);
    void update(std::string_view text);
    template <typename T>
    void update_pod(const T& v) {
        update(std::span(reinterpret_cast<const std::uint8_t*>(&v), sizeof(T)));
    }
    /// Digest of everything fed so far; the stream stays usable.
    Digest peek() const;

private:
    void* ctx_;
};

/// splitmix64 finalizer; used to derive independent deterministic RNG seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return mix64(a ^ mix64(b)); }

}  // namespace cpsim
