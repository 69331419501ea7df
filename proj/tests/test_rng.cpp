#include <doctest.h>

#include "trajsim/rng.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

using namespace trajsim;

TEST_SUITE("rng")
{
    TEST_CASE("exponential mean converges")
    {
        RngStream s(1, 7);
        const int n = 1'000'000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i)
        {
            sum += sample_exp(s, 2.0);
        }
        CHECK(std::fabs(sum / n - 0.5) <= 0.005);
    }

    TEST_CASE("reset replays the stream")
    {
        RngStream s(99, 3);
        const double a = sample_exp(s, 1.0);
        const double b = sample_exp(s, 1.0);
        s.reset();
        CHECK(sample_exp(s, 1.0) == a);
        CHECK(sample_exp(s, 1.0) == b);
    }

    TEST_CASE("huge rate stays positive and finite")
    {
        RngStream s(5, 5);
        for (int i = 0; i < 100'000; ++i)
        {
            const double x = sample_exp(s, 1e9);
            REQUIRE(x > 0.0);
            REQUIRE(std::isfinite(x));
        }
    }

    TEST_CASE("bad rates throw")
    {
        RngStream s(1, 1);
        CHECK_THROWS_AS(sample_exp(s, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(sample_exp(s, -1.0), std::invalid_argument);
        CHECK_THROWS_AS(sample_burst(s, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(sample_burst(s, -3.0), std::invalid_argument);
    }

    TEST_CASE("trimodal frequencies and mean")
    {
        RngStream s(2024, 11);
        const int n = 1'200'000;
        long small = 0;
        double bytes = 0.0;
        for (int i = 0; i < n; ++i)
        {
            const auto p = sample_trimodal(s);
            REQUIRE((p.size == 40 || p.size == 576 || p.size == 1500));
            small += p.size == 40;
            bytes += p.size;
        }
        // Binomial(n, 7/12): sigma = sqrt(n p q).
        const double sigma = std::sqrt(n * (7.0 / 12.0) * (5.0 / 12.0));
        CHECK(std::fabs(static_cast<double>(small) - 700'000.0) <= 3.0 * sigma);
        CHECK(std::fabs(bytes / n - 4084.0 / 12.0) <= 0.01 * 4084.0 / 12.0);
        CHECK(TrimodalPacket::mean_bytes() == doctest::Approx(340.3333333333).epsilon(1e-12));
    }

    TEST_CASE("burst lengths are zero-truncated Poisson")
    {
        RngStream s(8, 8);
        const int n = 200'000;
        double len_sum = 0.0;
        double byte_sum = 0.0;
        for (int i = 0; i < n; ++i)
        {
            const auto burst = sample_burst(s, 20.0);
            REQUIRE(!burst.empty());
            len_sum += static_cast<double>(burst.size());
            for (const auto& p : burst)
            {
                byte_sum += p.size;
            }
        }
        const double expected_len = 20.0 / (1.0 - std::exp(-20.0));
        CHECK(zero_truncated_poisson_mean(20.0) == doctest::Approx(expected_len).epsilon(1e-14));
        CHECK(zero_truncated_poisson_mean(20.0) - 20.0 == doctest::Approx(4.122307e-8).epsilon(1e-5));
        CHECK(std::fabs(len_sum / n - expected_len) <= 3.0 * std::sqrt(20.0 / n));
        CHECK(std::fabs(byte_sum / n - 6806.6667) <= 0.01 * 6806.6667);
    }

    TEST_CASE("small means truncate to at least one")
    {
        RngStream s(3, 3);
        for (int i = 0; i < 10'000; ++i)
        {
            REQUIRE(sample_burst_length(s, 0.05) >= 1);
        }
    }

    TEST_CASE("streams are independent of each other's seeds")
    {
        RngStream third(77, stream_id_for("third"));
        std::vector<double> ref;
        for (int i = 0; i < 10; ++i)
        {
            ref.push_back(third.uniform01());
        }
        for (const auto& [sa, sb] : {std::pair{1ULL, 2ULL}, std::pair{2ULL, 1ULL}})
        {
            RngStream a(sa, 1);
            RngStream b(sb, 2);
            RngStream c(77, stream_id_for("third"));
            for (int i = 0; i < 10; ++i)
            {
                a.next_u64();
                b.next_u64();
                CHECK(c.uniform01() == ref[static_cast<std::size_t>(i)]);
            }
        }
    }

    TEST_CASE("distinct stream ids diverge")
    {
        RngStream a(1, 1);
        RngStream b(1, 2);
        int same = 0;
        for (int i = 0; i < 100; ++i)
        {
            same += a.next_u64() == b.next_u64();
        }
        CHECK(same == 0);
    }

    TEST_CASE("uniform integers cover the closed range")
    {
        RngStream s(4, 4);
        std::set<std::int64_t> seen;
        for (int i = 0; i < 10'000; ++i)
        {
            const auto v = sample_uniform_int(s, 0, 20);
            REQUIRE(v >= 0);
            REQUIRE(v <= 20);
            seen.insert(v);
        }
        CHECK(seen.size() == 21);
    }
}
