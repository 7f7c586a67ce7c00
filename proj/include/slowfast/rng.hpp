#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

namespace slowfast {

/// Philox4x32-10 counter-based generator. A block is a pure function of
/// (key, counter), so streams need no shared state.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Standard normals addressed by (seed, stream, step). Each Philox block
/// yields two 64-bit uniforms in (0, 1) and one Box-Muller pair.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

    /// Fills `out` with the normals of `step`; out.size() may be odd.
    void fill(std::uint64_t step, std::span<double> out) const noexcept {
        for (std::size_t j = 0; j < out.size(); j += 2) {
            const auto pair = normal_pair(step, static_cast<std::uint32_t>(j / 2));
            out[j] = pair[0];
            if (j + 1 < out.size()) out[j + 1] = pair[1];
        }
    }

    [[nodiscard]] std::array<double, 2> normal_pair(std::uint64_t step, std::uint32_t block) const noexcept {
        // counter = (block, step, stream); steps beyond 2^32 are not used by the simulators
        const Philox4x32::Block ctr = {block, static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(stream_),
                                       static_cast<std::uint32_t>(stream_ >> 32)};
        const auto r = Philox4x32::generate(ctr, key_);
        const double u1 = to_unit((static_cast<std::uint64_t>(r[0]) << 32) | r[1]);
        const double u2 = to_unit((static_cast<std::uint64_t>(r[2]) << 32) | r[3]);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        constexpr double kTwoPi = 6.283185307179586476925;
        return {rad * std::cos(kTwoPi * u2), rad * std::sin(kTwoPi * u2)};
    }

private:
    // (bits + 0.5) / 2^64 on the top 53 bits: strictly inside (0, 1).
    static double to_unit(std::uint64_t bits) noexcept {
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    Philox4x32::Key key_;
    std::uint64_t stream_;
};

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double v) noexcept {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace slowfast
