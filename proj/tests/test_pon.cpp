#include <doctest.h>

#include "trajsim/scenarios/pon.hpp"
#include "trajsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

using namespace trajsim;
using namespace trajsim::scenarios;

namespace
{
    PonConfig config(PonMode mode, double limit, double horizon, std::uint64_t seed = 3)
    {
        PonConfig cfg;
        cfg.mode = mode;
        cfg.n_onus = mode == PonMode::Rrh ? 7 : 31;
        cfg.grant_limit_bytes = limit;
        cfg.horizon_s = horizon;
        cfg.seed = seed;
        return cfg;
    }

    struct Run
    {
        PonDelays d;
        std::shared_ptr<PonState> state;
        double load = 0.0;
    };

    Run simulate(const PonConfig& cfg, bool log_windows = false)
    {
        auto model = build_pon(cfg, 0, log_windows);
        model.env.run(cfg.horizon_s);
        return {pon_delays(model.env.monitor()), model.state, pon_offered_load(*model.state, cfg, cfg.horizon_s)};
    }

    std::deque<QueuedPacket> packets(std::initializer_list<std::uint32_t> sizes)
    {
        std::deque<QueuedPacket> q;
        for (const auto s : sizes)
        {
            q.push_back({0.0, s});
        }
        return q;
    }
}

TEST_SUITE("scenario-pon")
{
    TEST_CASE("grant sizing")
    {
        DbaState st;
        st.pending_request = {4000.0, 800.0};
        st.next_window_start = 2e-6;
        const auto w = dba_next_window(st, 0, 1500.0, false, 1e-6);
        CHECK(w.grant_bytes == 1500.0);
        CHECK(w.start == 2e-6);
        CHECK(dba_next_window(st, 1, kNoLimit, false, 5e-6).grant_bytes == 800.0);
        CHECK(dba_next_window(st, 1, kNoLimit, false, 5e-6).start == 5e-6);
        // The cell is exempt from the limit.
        CHECK(dba_next_window(st, 0, 1500.0, true, 0.0).grant_bytes == 4000.0);
    }

    TEST_CASE("windows carry whole packets")
    {
        const double bps = 1.25e9;
        auto p = plan_window({1e-3, 1500.0}, packets({1000, 1000}), bps, nullptr);
        CHECK(p.packets == 1);
        CHECK(p.bytes == 1000.0);
        CHECK(p.duration == doctest::Approx(6.4e-6).epsilon(1e-12));
        CHECK(p.start == 1e-3);

        // Stops at the first packet that does not fit; no skipping ahead.
        p = plan_window({0.0, 2150.0}, packets({40, 576, 1500, 40}), bps, nullptr);
        CHECK(p.packets == 3);
        CHECK(p.bytes == 2116.0);

        p = plan_window({0.0, 0.0}, packets({40}), bps, nullptr);
        CHECK(p.packets == 0);
        CHECK(p.duration == 0.0);
    }

    TEST_CASE("fronthaul reservations")
    {
        PonConfig cfg = config(PonMode::Rrh, kNoLimit, 1.0);
        CHECK(cfg.reservation_s() == doctest::Approx(38.4e-6).epsilon(1e-12));
        const FhReservations r{cfg.rrh_period_s, cfg.reservation_s(), cfg.guard_time_s};
        CHECK(r.period - r.duration == doctest::Approx(28.27e-6).epsilon(1e-9));
        CHECK(r.usable_gap() == doctest::Approx(26.27e-6).epsilon(1e-9));
        CHECK(r.earliest_start(0.0) == doctest::Approx(39.4e-6).epsilon(1e-12));
        CHECK(r.earliest_start(50e-6) == 50e-6);
        CHECK(r.earliest_start(66.0e-6) == doctest::Approx(66.67e-6 + 39.4e-6).epsilon(1e-12));
        CHECK(r.room(39.4e-6) == doctest::Approx(26.27e-6).epsilon(1e-9));

        // 1500 B take 9.6 us: two fit in one gap.
        const auto p = plan_window({39.4e-6, 7500.0}, packets({1500, 1500, 1500, 1500, 1500}), 1.25e9, &r);
        CHECK(p.packets == 2);
        CHECK(p.start + p.duration <= r.period - r.guard);

        // Head packet does not fit in what is left: moved to the next gap.
        const auto q = plan_window({60e-6, 1500.0}, packets({1500}), 1.25e9, &r);
        CHECK(q.start == doctest::Approx(r.period + 39.4e-6).epsilon(1e-12));
        CHECK(q.packets == 1);
    }

    TEST_CASE("configuration")
    {
        CHECK(config(PonMode::SmallCell, kNoLimit, 1).nominal_load() == doctest::Approx(0.616).epsilon(1e-12));
        CHECK(config(PonMode::Rrh, kNoLimit, 1).nominal_load() == doctest::Approx(0.688).epsilon(1e-3));
        CHECK(limit_label(kNoLimit) == "Inf");
        CHECK(limit_label(1500) == "1500");

        Config c;
        c.set("grant_limit_bytes", "1000");
        CHECK_THROWS_AS(PonConfig::from(c), ConfigError);
        Config zero;
        zero.set("grant_limit_bytes", "0");
        CHECK(std::isinf(PonConfig::from(zero).grant_limit_bytes));
        Config inf;
        inf.set("grant_limit_bytes", "Inf");
        CHECK(std::isinf(PonConfig::from(inf).grant_limit_bytes));
        Config rrh_cell;
        rrh_cell.set("mode", "rrh");
        rrh_cell.set("cell_rate_bps", "1e8");
        CHECK_THROWS_AS(PonConfig::from(rrh_cell), ConfigError);
        Config heavy;
        heavy.set("onu_rate_bps", "40e6");
        CHECK_THROWS_AS(PonConfig::from(heavy), ConfigError);
    }

    TEST_CASE("upstream windows never overlap and respect the guard")
    {
        for (const auto mode : {PonMode::SmallCell, PonMode::Rrh})
        {
            const auto cfg = config(mode, 1500.0, 0.05);
            const auto r = simulate(cfg, true);
            const auto& w = r.state->windows;
            REQUIRE(w.size() > 100);
            const FhReservations res{cfg.rrh_period_s, cfg.reservation_s(), cfg.guard_time_s};
            for (std::size_t i = 0; i < w.size(); ++i)
            {
                CHECK(w[i].end >= w[i].start);
                if (i > 0)
                {
                    CHECK(w[i].start >= w[i - 1].end + cfg.guard_time_s - 1e-15);
                }
                if (mode == PonMode::Rrh && w[i].bytes > 0)
                {
                    CHECK(res.earliest_start(w[i].start) == w[i].start);
                    CHECK(w[i].end <= w[i].start + res.room(w[i].start) + 1e-15);
                }
            }
        }
    }

    TEST_CASE("every ONU is polled at least every 2 ms")
    {
        const auto r = simulate(config(PonMode::SmallCell, 1500.0, 0.1), true);
        std::map<std::size_t, SimTime> last;
        double worst = 0.0;
        for (const auto& w : r.state->windows)
        {
            if (auto it = last.find(w.onu); it != last.end())
            {
                worst = std::max(worst, w.start - it->second);
            }
            last[w.onu] = w.start;
        }
        CHECK(last.size() == 32);
        CHECK(worst <= 2e-3);
    }

    TEST_CASE("fronthaul reservations never queue")
    {
        for (const double limit : {1500.0, kNoLimit})
        {
            const auto r = simulate(config(PonMode::Rrh, limit, 0.05));
            REQUIRE(r.d.fh.size() > 700);
            CHECK(*std::max_element(r.d.fh.begin(), r.d.fh.end()) == 0.0);
            CHECK(r.d.cell.empty());
        }
    }

    TEST_CASE("bytes are conserved")
    {
        const auto cfg = config(PonMode::SmallCell, 3000.0, 0.05);
        auto model = build_pon(cfg);
        model.env.run(cfg.horizon_s);
        double queued = 0.0;
        for (const auto& q : model.state->queues)
        {
            for (const auto& p : q)
            {
                queued += p.bytes;
            }
        }
        double generated = 0.0;
        for (const double g : model.state->generated_bytes)
        {
            generated += g;
        }
        // Sent plus in flight plus still queued.
        const auto bytes = model.env.monitor().find_key("bytes");
        REQUIRE(bytes);
        double recorded = 0.0;
        for (const auto& a : model.env.monitor().attributes())
        {
            if (a.key == *bytes)
            {
                recorded += a.value;
            }
        }
        CHECK(recorded == doctest::Approx(generated).epsilon(1e-12));
        CHECK(queued <= generated);
        CHECK(queued > 0.0);
    }

    TEST_CASE("grant limit trades residential delay for cell delay")
    {
        const auto limited = simulate(config(PonMode::SmallCell, 1500.0, 0.2));
        const auto open = simulate(config(PonMode::SmallCell, kNoLimit, 0.2));
        CHECK(percentile(limited.d.onu, 50) > percentile(open.d.onu, 50));
        CHECK(percentile(limited.d.cell, 50) < percentile(open.d.cell, 50));
        CHECK(percentile(open.d.cell, 50) == doctest::Approx(percentile(open.d.onu, 50)).epsilon(0.10));
    }

    TEST_CASE("offered load")
    {
        const auto sc = simulate(config(PonMode::SmallCell, kNoLimit, 0.3));
        const auto rrh = simulate(config(PonMode::Rrh, kNoLimit, 0.3));
        CHECK(sc.load == doctest::Approx(0.616).epsilon(0.02));
        CHECK(rrh.load == doctest::Approx(0.688).epsilon(0.02));
        CHECK(rrh.state->fh_reservations == static_cast<std::uint64_t>(std::ceil(0.3 / 66.67e-6)));
    }

    TEST_CASE("summary rows")
    {
        const auto cfg = config(PonMode::SmallCell, 1500.0, 0.02);
        auto model = build_pon(cfg);
        model.env.run(cfg.horizon_s);
        const auto t = summarize_pon(model.env.monitor(), cfg);
        const auto d = pon_delays(model.env.monitor());
        CHECK(lookup(t, {{"mode", "smallcell"}, {"limit", "1500"}, {"source", "onu"}}, "p95") == percentile(d.onu, 95));
        CHECK(lookup(t, {{"source", "cell"}}, "count") == static_cast<double>(d.cell.size()));
        CHECK(lookup(t, {{"source", "all"}}, "offered_load") > 0.5);
    }
}
