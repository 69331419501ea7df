#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace trajsim
{
    /// Deterministic random stream identified by (seed, stream_id).
    ///
    /// The engine is std::mt19937_64, whose output sequence is fixed by the
    /// standard. All variate transforms below are implemented here rather than
    /// through <random> distributions, whose algorithms are unspecified and
    /// differ between standard libraries.
    class RngStream
    {
    public:
        RngStream(std::uint64_t seed, std::uint64_t stream_id);

        std::uint64_t seed() const noexcept { return m_seed; }
        std::uint64_t stream_id() const noexcept { return m_stream_id; }

        /// Restores the state the stream had right after construction.
        void reset();

        std::uint64_t next_u64() { return m_engine(); }

        /// Uniform on the open interval (0, 1).
        double uniform_open();

        /// Uniform on [0, 1).
        double uniform01();

        /// Uniform integer on [0, bound). `bound` must be positive.
        std::uint64_t uniform_below(std::uint64_t bound);

    private:
        std::uint64_t m_seed;
        std::uint64_t m_stream_id;
        std::mt19937_64 m_engine;
    };

    /// Stable 64-bit id for a textual stream tag (FNV-1a).
    std::uint64_t stream_id_for(std::string_view tag) noexcept;

    /// Exponential variate with the given rate (mean 1/rate). Throws on rate <= 0.
    double sample_exp(RngStream& stream, double rate);

    /// Uniform real on [lo, hi).
    double sample_uniform(RngStream& stream, double lo, double hi);

    /// Uniform integer on [lo, hi] inclusive.
    std::int64_t sample_uniform_int(RngStream& stream, std::int64_t lo, std::int64_t hi);

    /// Poisson variate by sequential inversion. Intended for moderate means.
    std::uint64_t sample_poisson(RngStream& stream, double mean);

    /// Packet sizes of the AMS-IX trimodal mix: 40 B (7/12), 576 B (4/12), 1500 B (1/12).
    struct TrimodalPacket
    {
        static constexpr std::array<std::uint32_t, 3> sizes{40, 576, 1500};
        static constexpr std::array<std::uint32_t, 3> weights{7, 4, 1};
        static constexpr std::uint32_t weight_total = 12;

        /// 4084 / 12 bytes.
        static constexpr double mean_bytes() noexcept { return 4084.0 / 12.0; }
        /// E[size^2] in bytes^2.
        static constexpr double second_moment_bytes() noexcept
        {
            return (7.0 * 40 * 40 + 4.0 * 576 * 576 + 1.0 * 1500 * 1500) / 12.0;
        }

        std::uint32_t size = 40;
    };

    TrimodalPacket sample_trimodal(RngStream& stream);

    /// Zero-truncated Poisson burst of trimodal packets.
    std::vector<TrimodalPacket> sample_burst(RngStream& stream, double mean_len = 20.0);

    /// Zero-truncated Poisson burst length alone (>= 1).
    std::uint64_t sample_burst_length(RngStream& stream, double mean_len = 20.0);

    /// Mean of a Poisson(mean) variate conditioned on being >= 1.
    double zero_truncated_poisson_mean(double mean);
}
