#include <doctest.h>

#include "balls_in_bins.hpp"
#include "trajsim/scenarios/miot.hpp"

#include <cmath>
#include <map>
#include <numeric>

using namespace trajsim;
using namespace trajsim::scenarios;

namespace
{
    MiotConfig assumptions()
    {
        return MiotConfig::from(Config::load(std::string(TRAJSIM_SOURCE_DIR) + "/config/miot-assumptions.conf"));
    }

    double chi2_critical(int df, double z)
    {
        // Wilson-Hilferty.
        const double a = 2.0 / (9.0 * df);
        return df * std::pow(1.0 - a + z * std::sqrt(a), 3);
    }

    // Chi-square statistic of observed counts against `p`, pooling cells
    // until each expects at least 5.
    std::pair<double, int> chi2(const std::vector<std::uint32_t>& observed_values, const std::vector<double>& p)
    {
        std::vector<double> obs(p.size(), 0.0);
        for (const auto v : observed_values)
        {
            obs.at(v) += 1.0;
        }
        const double n = static_cast<double>(observed_values.size());
        double stat = 0.0;
        int cells = 0;
        double eo = 0.0;
        double ee = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i)
        {
            eo += obs[i];
            ee += p[i] * n;
            if (ee >= 5.0)
            {
                stat += (eo - ee) * (eo - ee) / ee;
                ++cells;
                eo = ee = 0.0;
            }
        }
        if (ee > 0.0 || eo > 0.0)
        {
            // Remainder joins the last cell's tail; counted as its own cell.
            stat += ee > 0.0 ? (eo - ee) * (eo - ee) / ee : eo;
            ++cells;
        }
        return {stat, cells - 1};
    }

    MiotResult run(const MiotConfig& cfg, MonitorStore* out = nullptr)
    {
        auto model = build_miot(cfg);
        model.env.run(cfg.horizon_s);
        if (out)
        {
            *out = model.env.monitor();
        }
        return miot_result(model.env.monitor(), cfg);
    }
}

TEST_SUITE("scenario-miot")
{
    TEST_CASE("singleton oracle")
    {
        const auto p10 = singleton_distribution(10, 54);
        CHECK(std::accumulate(p10.begin(), p10.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p10[9] == 0.0);
        const double m = moments(p10).mean;
        // K ((n - 1) / n)^(K - 1)
        CHECK(m == doctest::Approx(10.0 * std::pow(53.0 / 54.0, 9)).epsilon(1e-12));
        CHECK(m == doctest::Approx(8.4516).epsilon(1e-4));
        const double m54 = moments(singleton_distribution(54, 54)).mean;
        CHECK(m54 == doctest::Approx(20.0514).epsilon(1e-4));
        CHECK(singleton_distribution(1, 54)[1] == doctest::Approx(1.0).epsilon(1e-15));
    }

    TEST_CASE("preamble contention matches balls in bins")
    {
        constexpr std::size_t rounds = 10000;
        for (const int K : {10, 54})
        {
            const auto p = singleton_distribution(K, 54);
            const auto [mu, var] = moments(p);
            const auto successes = ra_probe(static_cast<std::size_t>(K), 54, rounds, 17);
            REQUIRE(successes.size() == rounds);
            const double observed =
                std::accumulate(successes.begin(), successes.end(), 0.0) / static_cast<double>(rounds);
            CHECK(std::fabs(observed - mu) <= 3.0 * std::sqrt(var / rounds));
            const auto [stat, df] = chi2(successes, p);
            CHECK(stat < chi2_critical(df, 3.09));
        }
    }

    TEST_CASE("ra_round")
    {
        RngStream rng(1, 2);
        CHECK(ra_round(1, 54, rng) == std::vector<bool>{true});
        const auto both = ra_round(2, 1, rng);
        CHECK(both == std::vector<bool>{false, false});
        double total = 0.0;
        for (int i = 0; i < 20000; ++i)
        {
            const auto ok = ra_round(10, 54, rng);
            total += static_cast<double>(std::count(ok.begin(), ok.end(), true));
        }
        CHECK(total / 20000.0 == doctest::Approx(8.4516).epsilon(0.01));
    }

    TEST_CASE("rao boundaries")
    {
        CHECK(next_rao(0.0, 0.01) == 0.0);
        CHECK(next_rao(0.005, 0.01) == doctest::Approx(0.01).epsilon(1e-15));
        CHECK(next_rao(0.03, 0.01) >= 0.03);
        for (int k = 0; k < 1000; ++k)
        {
            const double t = k * 0.002;
            const double r = next_rao(t, 0.002);
            CHECK(r >= t);
            CHECK(r - t < 0.002);
        }
    }

    TEST_CASE("energy integration")
    {
        const std::vector<PowerSample> trace{{0.0, 1.0}, {2.0, 3.0}, {3.0, 0.0}};
        CHECK(integrate_energy(trace, 0.0, 10.0) == doctest::Approx(5.0).epsilon(1e-15));
        const std::vector<PowerSample> zero{{0.0, 0.0}};
        CHECK(integrate_energy(zero, -1.0, 100.0) == 0.0);
        // Unterminated last segment is closed at the end time.
        const std::vector<PowerSample> open{{1.0, 2.0}};
        CHECK(integrate_energy(open, 0.0, 4.0) == doctest::Approx(6.0).epsilon(1e-15));
        // Additive over a split.
        const std::vector<PowerSample> split{{0.0, 1.0}, {1.0, 1.0}, {2.0, 3.0}, {3.0, 0.0}};
        CHECK(integrate_energy(split, 0.0, 10.0) == doctest::Approx(integrate_energy(trace, 0.0, 10.0)).epsilon(1e-15));
    }

    TEST_CASE("single device: every reading on the first attempt, hand-computed energy")
    {
        auto cfg = assumptions();
        cfg.n_devices = 1;
        cfg.power.off = 7.0;
        cfg.power.sync = 0.0;
        MonitorStore store;
        const auto r = run(cfg, &store);
        CHECK(r.readings == 24);
        CHECK(r.attempts == 24);
        CHECK(r.collisions == 0);
        CHECK(r.dropped == 0);
        const double per_reading = cfg.power.ra * cfg.duration.ra + cfg.power.tx * cfg.duration.tx +
                                   cfg.power.inactive * cfg.duration.inactive;
        CHECK(r.energy_per_reading() == doctest::Approx(per_reading).epsilon(1e-12));
    }

    TEST_CASE("two devices on one preamble collide")
    {
        auto cfg = assumptions();
        cfg.n_devices = 2;
        cfg.n_preambles = 1;
        cfg.sync_window_s = 1e-9;
        cfg.horizon_s = 60.0;
        MonitorStore store;
        const auto r = run(cfg, &store);
        const auto ok = store.find_key("ok");
        REQUIRE(ok);
        std::vector<AttributeRecord> first;
        for (const auto& a : store.attributes())
        {
            if (a.key == *ok && first.size() < 2)
            {
                first.push_back(a);
            }
        }
        REQUIRE(first.size() == 2);
        CHECK(first[0].value == 0.0);
        CHECK(first[1].value == 0.0);
        // Same RAO: the holder reports after its hold, the rejected one at once.
        CHECK(std::fabs(first[0].time - first[1].time) < cfg.rao_period_s);
        CHECK(r.collisions >= 2);
    }

    TEST_CASE("attempts per reading stay within the retry budget")
    {
        auto cfg = assumptions();
        cfg.n_devices = 3000;
        cfg.n_preambles = 2;
        cfg.sync_window_s = 5.0;
        cfg.horizon_s = 3600.0;
        MonitorStore store;
        const auto r = run(cfg, &store);
        const auto ok = *store.find_key("ok");
        const auto reading = *store.find_key("reading");
        std::map<std::uint64_t, int> attempts;
        std::uint64_t successes = 0;
        int worst = 0;
        for (const auto& a : store.attributes())
        {
            if (a.key == reading)
            {
                attempts[a.index] = 0;
            }
            else if (a.key == ok)
            {
                worst = std::max(worst, ++attempts[a.index]);
                successes += a.value == 1.0;
            }
        }
        CHECK(worst == cfg.max_attempts());
        CHECK(r.dropped > 0);
        // Every reading ended in a connection or a drop.
        CHECK(successes + r.dropped == r.readings);
        CHECK(r.readings == cfg.n_devices);
    }

    TEST_CASE("trend at desk scale")
    {
        auto cfg = assumptions();
        cfg.horizon_s = 3600.0;
        cfg.n_devices = 30000;
        cfg.seed = 7;
        cfg.sync_window_s = 5.0;
        const double tight = run(cfg).energy_per_reading();
        cfg.sync_window_s = 60.0;
        const double loose = run(cfg).energy_per_reading();
        CHECK(tight > loose);
    }

    TEST_CASE("configuration")
    {
        CHECK_THROWS_AS(MiotConfig::from(Config{}), ConfigError);
        auto c = Config::load(std::string(TRAJSIM_SOURCE_DIR) + "/config/miot-assumptions.conf");
        CHECK(MiotConfig::from(c).max_attempts() == 10);
        c.set("retries_are_total", "true");
        CHECK(MiotConfig::from(c).max_attempts() == 9);
        c.set("power.sync", "0");
        CHECK_THROWS_AS(MiotConfig::from(c), ConfigError);
        const auto d = assumptions();
        const auto back = MiotConfig::from(d.describe());
        CHECK(back.power.ra == d.power.ra);
        CHECK(back.rao_period_s == d.rao_period_s);
    }
}
