#include "trajsim/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace trajsim
{
    namespace
    {
        constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
        {
            std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            return z ^ (z >> 31);
        }

        std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id)
        {
            // Mix (seed, stream) through splitmix so neighbouring ids give unrelated states.
            std::uint64_t state = seed ^ (stream_id * 0xD1B54A32D192ED03ULL);
            std::array<std::uint32_t, 8> words{};
            for (std::size_t i = 0; i < words.size(); i += 2)
            {
                const std::uint64_t v = splitmix64(state);
                words[i] = static_cast<std::uint32_t>(v);
                words[i + 1] = static_cast<std::uint32_t>(v >> 32);
            }
            std::seed_seq seq(words.begin(), words.end());
            return std::mt19937_64(seq);
        }

        constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;
    }

    RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : m_seed(seed), m_stream_id(stream_id), m_engine(make_engine(seed, stream_id))
    {
    }

    void RngStream::reset()
    {
        m_engine = make_engine(m_seed, m_stream_id);
    }

    double RngStream::uniform_open()
    {
        return (static_cast<double>(m_engine() >> 11) + 0.5) * kTwoPow53Inv;
    }

    double RngStream::uniform01()
    {
        return static_cast<double>(m_engine() >> 11) * kTwoPow53Inv;
    }

    std::uint64_t RngStream::uniform_below(std::uint64_t bound)
    {
        if (bound == 0)
        {
            throw std::invalid_argument("uniform_below: bound must be positive");
        }
        // Rejection on the top of the range keeps the draw exactly uniform.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    (std::numeric_limits<std::uint64_t>::max() % bound);
        std::uint64_t x = m_engine();
        while (x >= limit)
        {
            x = m_engine();
        }
        return x % bound;
    }

    std::uint64_t stream_id_for(std::string_view tag) noexcept
    {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (const char c : tag)
        {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001B3ULL;
        }
        return h;
    }

    double sample_exp(RngStream& stream, double rate)
    {
        if (!(rate > 0.0) || !std::isfinite(rate))
        {
            throw std::invalid_argument("sample_exp: rate must be positive and finite, got " +
                                        std::to_string(rate));
        }
        return -std::log(stream.uniform_open()) / rate;
    }

    double sample_uniform(RngStream& stream, double lo, double hi)
    {
        if (!(hi >= lo))
        {
            throw std::invalid_argument("sample_uniform: hi < lo");
        }
        return lo + (hi - lo) * stream.uniform01();
    }

    std::int64_t sample_uniform_int(RngStream& stream, std::int64_t lo, std::int64_t hi)
    {
        if (hi < lo)
        {
            throw std::invalid_argument("sample_uniform_int: hi < lo");
        }
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1U;
        return lo + static_cast<std::int64_t>(stream.uniform_below(span));
    }

    std::uint64_t sample_poisson(RngStream& stream, double mean)
    {
        if (!(mean > 0.0) || !std::isfinite(mean) || mean > 700.0)
        {
            throw std::invalid_argument("sample_poisson: mean must be in (0, 700]");
        }
        const double u = stream.uniform01();
        double p = std::exp(-mean);
        double cdf = p;
        std::uint64_t k = 0;
        while (u >= cdf)
        {
            ++k;
            p *= mean / static_cast<double>(k);
            const double next = cdf + p;
            if (next == cdf)
            {
                break; // tail exhausted in double precision
            }
            cdf = next;
        }
        return k;
    }

    TrimodalPacket sample_trimodal(RngStream& stream)
    {
        const auto slot = stream.uniform_below(TrimodalPacket::weight_total);
        if (slot < 7)
        {
            return {40};
        }
        if (slot < 11)
        {
            return {576};
        }
        return {1500};
    }

    std::uint64_t sample_burst_length(RngStream& stream, double mean_len)
    {
        if (!(mean_len > 0.0))
        {
            throw std::invalid_argument("sample_burst: mean_len must be positive");
        }
        std::uint64_t len = 0;
        while (len == 0)
        {
            len = sample_poisson(stream, mean_len);
        }
        return len;
    }

    std::vector<TrimodalPacket> sample_burst(RngStream& stream, double mean_len)
    {
        const auto len = sample_burst_length(stream, mean_len);
        std::vector<TrimodalPacket> burst;
        burst.reserve(len);
        for (std::uint64_t i = 0; i < len; ++i)
        {
            burst.push_back(sample_trimodal(stream));
        }
        return burst;
    }

    double zero_truncated_poisson_mean(double mean)
    {
        return mean / (-std::expm1(-mean));
    }
}
