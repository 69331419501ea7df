#include <doctest.h>

#include "trajsim/rng.hpp"
#include "trajsim/stats.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

using namespace trajsim;

TEST_SUITE("stats")
{
    TEST_CASE("nearest-rank examples")
    {
        std::vector<double> hundred(100);
        std::iota(hundred.begin(), hundred.end(), 1.0);
        CHECK(percentile(hundred, 50) == 50.0);

        const std::vector<double> one{7.0};
        for (const double p : {0.0, 5.0, 50.0, 95.0, 100.0})
        {
            CHECK(percentile(one, p) == 7.0);
        }

        std::vector<double> thousand(1000);
        std::iota(thousand.begin(), thousand.end(), 1.0);
        CHECK(percentile(thousand, 95) == 950.0);
        CHECK(percentile(thousand, 0) == 1.0);
        CHECK(percentile(thousand, 100) == 1000.0);
    }

    TEST_CASE("nearest-rank matches a reference definition")
    {
        RngStream s(12, 12);
        for (int trial = 0; trial < 200; ++trial)
        {
            const auto n = static_cast<std::size_t>(1 + s.uniform_below(300));
            std::vector<double> data(n);
            for (auto& x : data)
            {
                x = static_cast<double>(s.uniform_below(50));
            }
            auto sorted = data;
            std::sort(sorted.begin(), sorted.end());
            for (const int p : {1, 5, 25, 50, 75, 95, 99})
            {
                // Smallest value with at least p% of the data at or below it.
                double expected = sorted.back();
                for (std::size_t i = 0; i < n; ++i)
                {
                    if (100 * (i + 1) >= static_cast<std::size_t>(p) * n)
                    {
                        expected = sorted[i];
                        break;
                    }
                }
                REQUIRE(percentile(data, p) == expected);
            }
        }
    }

    TEST_CASE("boxplot is ordered on arbitrary inputs")
    {
        RngStream s(13, 13);
        for (int trial = 0; trial < 500; ++trial)
        {
            const auto n = static_cast<std::size_t>(1 + s.uniform_below(100));
            std::vector<double> data(n);
            for (auto& x : data)
            {
                x = sample_exp(s, 1.0) - 0.5;
            }
            const auto b = boxplot(data);
            REQUIRE(b.p5 <= b.p25);
            REQUIRE(b.p25 <= b.p50);
            REQUIRE(b.p50 <= b.p75);
            REQUIRE(b.p75 <= b.p95);
        }
    }

    TEST_CASE("invalid input")
    {
        const std::vector<double> empty;
        CHECK_THROWS_AS(percentile(empty, 50), std::invalid_argument);
        CHECK_THROWS_AS(boxplot(empty), std::invalid_argument);
        const std::vector<double> data{1, 2, 3};
        CHECK_THROWS_AS(percentile(data, -1), std::invalid_argument);
        CHECK_THROWS_AS(percentile(data, 100.5), std::invalid_argument);
    }
}
