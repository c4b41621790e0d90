#pragma once

#include <array>
#include <cstdint>

namespace modesim::rng {

// Identifies one logical random stream. Streams with distinct keys are
// statistically independent; equal keys always replay the same sequence,
// no matter how trials are scheduled across threads.
struct RngStreamKey {
    std::uint64_t master_seed = 0;
    std::uint64_t trial_index = 0;
    std::uint32_t field_index = 0;
};

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// The key holds the master seed, the counter holds (trial, field, block),
// so every (seed, trial, field) tuple owns a private 2^32-block stream.
class PhiloxStream {
public:
    explicit PhiloxStream(const RngStreamKey& key)
        : key_{static_cast<std::uint32_t>(key.master_seed),
               static_cast<std::uint32_t>(key.master_seed >> 32)},
          base_{static_cast<std::uint32_t>(key.trial_index),
                static_cast<std::uint32_t>(key.trial_index >> 32),
                key.field_index, 0} {}

    std::uint32_t next_u32() {
        if (pos_ == 4) {
            block_ = philox4x32(base_, key_);
            ++base_[3];
            pos_ = 0;
        }
        return block_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform double in [0, 1) with full 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // One keyed block, exposed for known-answer tests.
    static std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                                   std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                   static_cast<std::uint32_t>(p0)};
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        return ctr;
    }

private:
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> base_;
    std::array<std::uint32_t, 4> block_{};
    int pos_ = 4;
};

}  // namespace modesim::rng
