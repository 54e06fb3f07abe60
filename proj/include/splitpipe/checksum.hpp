#pragma once

#include <cstdint>
#include <span>

namespace splitpipe {

// FNV-1a, 64 bit. Used both for payload integrity checks and as the unit of
// work inside the synthetic compute kernel.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> data,
                             std::uint64_t seed = kFnvOffset) {
    std::uint64_t h = seed;
    for (std::uint8_t b : data) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

// splitmix64: cheap, well-distributed mixer for deriving payload streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Seed for the body bytes entering a given stage of a given batch. Stage 0 is
// the orchestrator-dispatched input; stage k>0 is the activation produced by
// stage k. Identical (seed, batch, stage) always yields identical bytes.
inline std::uint64_t payload_seed(std::uint64_t global_seed, std::uint64_t batch_id,
                                  std::uint32_t stage) {
    std::uint64_t s = global_seed ^ 0x9e3779b97f4a7c15ull;
    s = s * kFnvPrime ^ batch_id;
    s = s * kFnvPrime ^ stage;
    std::uint64_t mix = s;
    return splitmix64(mix);
}

inline void fill_payload(std::span<std::uint8_t> out, std::uint64_t seed) {
    std::uint64_t state = seed;
    size_t i = 0;
    while (i + 8 <= out.size()) {
        std::uint64_t w = splitmix64(state);
        for (int k = 0; k < 8; k++) out[i++] = (std::uint8_t)(w >> (8 * k));
    }
    if (i < out.size()) {
        std::uint64_t w = splitmix64(state);
        for (int k = 0; i < out.size(); k++) out[i++] = (std::uint8_t)(w >> (8 * k));
    }
}

}  // namespace splitpipe
