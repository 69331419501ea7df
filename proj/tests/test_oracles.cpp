#include <doctest.h>

#include "trajsim/oracles.hpp"

#include <array>
#include <cmath>

using namespace trajsim;
using namespace trajsim::oracles;

namespace
{
    // Crosshaul classes rebuilt from first principles: 40 Gb/s, 75 % load split
    // evenly, 80 B fronthaul frames and the 40/576/1500 B backhaul mix.
    struct XhaulReference
    {
        double lambda_fh;
        double lambda_bh;
        double s_fh;
        double es_bh;
        double es2_bh;
    };

    XhaulReference xhaul_reference()
    {
        const double rate = 40e9;
        const double fh_bits = 0.375 * rate;
        const double bh_bits = 0.375 * rate;
        const std::array<double, 3> sizes{40, 576, 1500};
        const std::array<double, 3> probs{7.0 / 12, 4.0 / 12, 1.0 / 12};
        double mean_bytes = 0.0;
        double es = 0.0;
        double es2 = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
        {
            const double s = sizes[i] * 8 / rate;
            mean_bytes += probs[i] * sizes[i];
            es += probs[i] * s;
            es2 += probs[i] * s * s;
        }
        return {fh_bits / 640.0, bh_bits / (mean_bytes * 8), 640.0 / rate, es, es2};
    }
}

TEST_SUITE("oracles")
{
    TEST_CASE("mm1 values")
    {
        CHECK(mm1_wq(1.0, 2.0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(mm1_wq(1.9, 2.0) == doctest::Approx(9.5).epsilon(1e-12));
        CHECK(mm1_wq(1e-12, 2.0) == doctest::Approx(0.0).epsilon(1e-9));
        CHECK_THROWS_AS(mm1_wq(2.0, 2.0), UnstableSystem);
        CHECK_THROWS_AS(mm1_wq(3.0, 2.0), UnstableSystem);
    }

    TEST_CASE("mg1 values and reductions")
    {
        // lambda E[S^2] / (2 (1 - rho)) = 0.5 * 1 / (2 * 0.5).
        CHECK(mg1_wq(TrafficClass::deterministic(0.5, 1.0)) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(mg1_wq(TrafficClass::deterministic(0.25, 1.0)) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
        for (const double lambda : {0.1, 0.5, 1.0, 1.5, 1.9})
        {
            CHECK(mg1_wq(TrafficClass::exponential(lambda, 0.5)) == doctest::Approx(mm1_wq(lambda, 2.0)).epsilon(1e-12));
            CHECK(mg1_wq(TrafficClass::deterministic(lambda, 0.5)) == doctest::Approx(md1_wq(lambda, 0.5)).epsilon(1e-12));
        }
        CHECK_THROWS_AS(mg1_wq(TrafficClass::deterministic(1.0, 1.0)), UnstableSystem);
    }

    TEST_CASE("md1 values")
    {
        CHECK(md1_wq(23.4375e6, 16e-9) == doctest::Approx(4.8e-9).epsilon(1e-12));
        CHECK(md1_wq(1e-9, 16e-9) == doctest::Approx(0.0).epsilon(1e-9));
        for (const double rho : {0.1, 0.4, 0.8})
        {
            const double s = 0.25;
            CHECK(md1_wq(rho / s, s) / mm1_wq(rho / s, 1.0 / s) == doctest::Approx(0.5).epsilon(1e-12));
        }
        CHECK_THROWS_AS(md1_wq(1.0, 1.0), UnstableSystem);
    }

    TEST_CASE("crosshaul reference values")
    {
        const auto ref = xhaul_reference();
        // Frozen from the independent computation above.
        CHECK(ref.lambda_fh == doctest::Approx(23.4375e6).epsilon(1e-12));
        CHECK(ref.lambda_bh == doctest::Approx(5.509304603e6).epsilon(1e-9));

        const TrafficClass fh = TrafficClass::deterministic(ref.lambda_fh, ref.s_fh, 1);
        const TrafficClass bh{ref.lambda_bh, ref.es_bh, ref.es2_bh, 0};
        const std::array<TrafficClass, 2> both{fh, bh};

        const double residual = 0.5 * (ref.lambda_fh * ref.s_fh * ref.s_fh + ref.lambda_bh * ref.es2_bh);
        CHECK(residual == doctest::Approx(35.948e-9).epsilon(1e-4));

        const auto hol = hol_priority_wq(both);
        REQUIRE(hol.size() == 2);
        CHECK(hol[0] == doctest::Approx(residual / (1 - 0.375)).epsilon(1e-12));
        CHECK(hol[1] == doctest::Approx(residual / ((1 - 0.375) * (1 - 0.75))).epsilon(1e-12));
        CHECK(hol[0] == doctest::Approx(57.517e-9).epsilon(1e-4));
        CHECK(hol[1] == doctest::Approx(230.07e-9).epsilon(1e-4));

        const auto mixed = aggregate(both);
        CHECK(mixed.load() == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(mixed.rate == doctest::Approx(28.946804603e6).epsilon(1e-9));
        CHECK(mg1_wq(mixed) == doctest::Approx(residual / 0.25).epsilon(1e-12));
        CHECK(mg1_wq(mixed) == doctest::Approx(143.794e-9).epsilon(1e-4));
    }

    TEST_CASE("hol priority properties")
    {
        const TrafficClass one{2.0, 0.2, 0.1, 0};
        const std::array<TrafficClass, 1> single{one};
        CHECK(hol_priority_wq(single)[0] == doctest::Approx(mg1_wq(one)).epsilon(1e-14));

        const TrafficClass hi{1.0, 0.2, 0.08, 1};
        const TrafficClass lo{1.0, 0.2, 0.08, 0};
        const std::array<TrafficClass, 2> two{lo, hi};
        const auto w = hol_priority_wq(two);
        CHECK(w[0] < w[1]);

        // Equal priorities collapse into one FIFO level.
        const std::array<TrafficClass, 2> same{TrafficClass{1.0, 0.2, 0.08, 0}, TrafficClass{1.0, 0.2, 0.08, 0}};
        const auto ws = hol_priority_wq(same);
        CHECK(ws[0] == ws[1]);
        CHECK(ws[0] == doctest::Approx(mg1_wq(aggregate(same))).epsilon(1e-12));

        const std::array<TrafficClass, 2> overload{TrafficClass{3.0, 0.2, 0.08, 1}, TrafficClass{3.0, 0.2, 0.08, 0}};
        CHECK_THROWS_AS(hol_priority_wq(overload), UnstableSystem);
    }

    TEST_CASE("oracles grow without bound near saturation")
    {
        double prev = 0.0;
        for (const double rho : {0.1, 0.5, 0.9, 0.99, 0.999})
        {
            const double w = mg1_wq(TrafficClass::exponential(rho, 1.0));
            CHECK(w > prev);
            prev = w;
        }
        CHECK(prev > 900.0);
    }
}
