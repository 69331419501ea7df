#include "trajsim/scenarios/miot.hpp"

#include "trajsim/rng.hpp"

#include <algorithm>
#include <cmath>

namespace trajsim::scenarios
{
    namespace
    {
        const std::vector<std::string> kPowerKeys{"power.off", "power.sync", "power.ra",
                                                  "power.backoff", "power.tx", "power.inactive"};
        const std::vector<std::string> kDurationKeys{"duration.ra", "duration.tx", "duration.inactive"};
    }

    const std::vector<std::string>& MiotConfig::keys()
    {
        static const std::vector<std::string> k = [] {
            std::vector<std::string> v{"n_devices",      "sync_window_s",     "reading_period_s", "W",
                                       "m",              "n_preambles",       "rao_period_s",     "backoff_slot_s",
                                       "horizon_s",      "seed",              "retries_are_total", "backoff_exclusive",
                                       "monitor_resources"};
            v.insert(v.end(), kPowerKeys.begin(), kPowerKeys.end());
            v.insert(v.end(), kDurationKeys.begin(), kDurationKeys.end());
            return v;
        }();
        return k;
    }

    MiotConfig MiotConfig::from(const Config& cfg)
    {
        cfg.require_known(keys(), "miot");
        std::string missing;
        for (const auto* group : {&kPowerKeys, &kDurationKeys})
        {
            for (const auto& key : *group)
            {
                if (!cfg.has(key))
                {
                    missing += (missing.empty() ? "" : ", ") + key;
                }
            }
        }
        if (!missing.empty())
        {
            throw ConfigError("miot: missing " + missing +
                              " (the power table and phase durations have no built-in values; see "
                              "config/miot-assumptions.conf)");
        }

        MiotConfig c;
        const auto n = cfg.get_int("n_devices", static_cast<std::int64_t>(c.n_devices));
        if (n < 1)
        {
            throw ConfigError("miot: n_devices must be at least 1");
        }
        c.n_devices = static_cast<std::uint64_t>(n);
        c.sync_window_s = cfg.get_real("sync_window_s", c.sync_window_s);
        c.reading_period_s = cfg.get_real("reading_period_s", c.reading_period_s);
        c.W = static_cast<int>(cfg.get_int("W", c.W));
        c.m = static_cast<int>(cfg.get_int("m", c.m));
        c.n_preambles = static_cast<int>(cfg.get_int("n_preambles", c.n_preambles));
        c.rao_period_s = cfg.get_real("rao_period_s", c.rao_period_s);
        c.backoff_slot_s = cfg.get_real("backoff_slot_s", c.rao_period_s);
        c.horizon_s = cfg.get_real("horizon_s", c.horizon_s);
        c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
        c.retries_are_total = cfg.get_bool("retries_are_total", c.retries_are_total);
        c.backoff_exclusive = cfg.get_bool("backoff_exclusive", c.backoff_exclusive);
        c.monitor_resources = cfg.get_bool("monitor_resources", c.monitor_resources);

        c.power = {cfg.get_real("power.off", 0.0),     cfg.get_real("power.sync", 0.0),
                   cfg.get_real("power.ra", 0.0),      cfg.get_real("power.backoff", 0.0),
                   cfg.get_real("power.tx", 0.0),      cfg.get_real("power.inactive", 0.0)};
        c.duration = {cfg.get_real("duration.ra", 0.0), cfg.get_real("duration.tx", 0.0),
                      cfg.get_real("duration.inactive", 0.0)};

        if (!(c.sync_window_s > 0.0))
        {
            throw ConfigError("miot: sync_window_s must be positive");
        }
        if (!(c.reading_period_s > 0.0) || !(c.rao_period_s > 0.0) || !(c.backoff_slot_s > 0.0) ||
            !(c.horizon_s > 0.0))
        {
            throw ConfigError("miot: reading_period_s, rao_period_s, backoff_slot_s and horizon_s must be positive");
        }
        if (c.n_preambles < 1 || c.m < 0 || c.W < 0 || (c.retries_are_total && c.m < 1) ||
            (c.backoff_exclusive && c.W < 2))
        {
            throw ConfigError("miot: need n_preambles >= 1, m >= 0 (>= 1 when retries_are_total), W >= 0 "
                              "(>= 2 with backoff_exclusive)");
        }
        const double powers[] = {c.power.off, c.power.sync, c.power.ra, c.power.backoff, c.power.tx, c.power.inactive};
        if (std::any_of(std::begin(powers), std::end(powers), [](double p) { return !(p >= 0.0) || std::isinf(p); }))
        {
            throw ConfigError("miot: powers must be finite and non-negative");
        }
        if (std::count(std::begin(powers), std::end(powers), c.power.off) != 1)
        {
            throw ConfigError("miot: power.off must differ from every other power level (it delimits readings)");
        }
        if (!(c.duration.ra > 0.0))
        {
            throw ConfigError("miot: duration.ra must be positive");
        }
        if (c.duration.tx < 0.0 || c.duration.inactive < 0.0)
        {
            throw ConfigError("miot: durations must be non-negative");
        }
        return c;
    }

    Config MiotConfig::describe() const
    {
        Config out;
        out.set("n_devices", std::to_string(n_devices));
        out.set("sync_window_s", format_real(sync_window_s));
        out.set("reading_period_s", format_real(reading_period_s));
        out.set("W", std::to_string(W));
        out.set("m", std::to_string(m));
        out.set("n_preambles", std::to_string(n_preambles));
        out.set("rao_period_s", format_real(rao_period_s));
        out.set("backoff_slot_s", format_real(backoff_slot_s));
        out.set("horizon_s", format_real(horizon_s));
        out.set("seed", std::to_string(seed));
        out.set("retries_are_total", retries_are_total ? "true" : "false");
        out.set("backoff_exclusive", backoff_exclusive ? "true" : "false");
        out.set("monitor_resources", monitor_resources ? "true" : "false");
        out.set("power.off", format_real(power.off));
        out.set("power.sync", format_real(power.sync));
        out.set("power.ra", format_real(power.ra));
        out.set("power.backoff", format_real(power.backoff));
        out.set("power.tx", format_real(power.tx));
        out.set("power.inactive", format_real(power.inactive));
        out.set("duration.ra", format_real(duration.ra));
        out.set("duration.tx", format_real(duration.tx));
        out.set("duration.inactive", format_real(duration.inactive));
        return out;
    }

    SimTime next_rao(SimTime t, double period)
    {
        // t / period is rounded, so fix up the integer both ways.
        auto k = std::ceil(t / period);
        while (k > 0.0 && (k - 1.0) * period >= t)
        {
            k -= 1.0;
        }
        while (k * period < t)
        {
            k += 1.0;
        }
        return k * period;
    }

    std::vector<bool> ra_round(std::size_t contenders, std::size_t n_preambles, RngStream& rng)
    {
        std::vector<std::size_t> pick(contenders);
        std::vector<std::uint32_t> load(n_preambles, 0);
        for (auto& p : pick)
        {
            p = static_cast<std::size_t>(rng.uniform_below(n_preambles));
            ++load[p];
        }
        std::vector<bool> ok(contenders);
        for (std::size_t i = 0; i < contenders; ++i)
        {
            ok[i] = load[pick[i]] == 1;
        }
        return ok;
    }

    double integrate_energy(std::span<const PowerSample> trace, double off_power, SimTime end)
    {
        double e = 0.0;
        for (std::size_t i = 0; i < trace.size(); ++i)
        {
            if (trace[i].watts == off_power)
            {
                continue;
            }
            const SimTime until = i + 1 < trace.size() ? trace[i + 1].time : end;
            e += trace[i].watts * std::max(0.0, until - trace[i].time);
        }
        return e;
    }

    namespace
    {
        std::vector<std::string> preamble_names(int n)
        {
            std::vector<std::string> names;
            for (int k = 1; k <= n; ++k)
            {
                names.push_back("preamble" + std::to_string(k));
            }
            return names;
        }

        void add_preambles(Environment& env, int n, bool monitor)
        {
            for (const auto& name : preamble_names(n))
            {
                env.add_resource({.name = name, .capacity = 1, .queue_size = 0, .monitor = monitor});
            }
        }

        /// Select a preamble and try to seize it; attribute "ok" ends as 1 only
        /// for a contender that was alone on its preamble in this RAO.
        ///
        /// The first contender gets the preamble and learns about the others
        /// through the rejections they caused while it held it. It holds the
        /// preamble for `hold` (less than one RAO period) and then spends the
        /// rest of the attempt, `ra_s` in total, like everybody else.
        void ra_attempt(Trajectory& t, int n_preambles, double ra_s, double hold, const std::shared_ptr<MiotState>& st)
        {
            Trajectory won("ra_seized");
            won.timeout([st, hold](Context& ctx) {
                   st->rejected_at_seize[ctx.index()] = ctx.selected()->rejected_count();
                   return hold;
               })
                .set_attribute("ok",
                               [st](Context& ctx) {
                                   return ctx.selected()->rejected_count() == st->rejected_at_seize[ctx.index()] ? 1.0
                                                                                                               : 0.0;
                               })
                .release_selected()
                .timeout(ra_s - hold);
            Trajectory lost("ra_rejected");
            lost.set_attribute("ok", 0.0).timeout(ra_s);
            t.select(preamble_names(n_preambles), SelectPolicy::Random)
                .seize_selected(1, seize_paths(std::move(won), std::move(lost)));
        }
    }

    MiotModel build_miot(const MiotConfig& cfg, std::int32_t replication)
    {
        MiotModel model{Environment(cfg.seed, replication), std::make_shared<MiotState>()};
        auto& env = model.env;
        auto st = model.state;
        st->rejected_at_seize.assign(cfg.n_devices, 0);
        st->attempts.assign(cfg.n_devices, 0);
        add_preambles(env, cfg.n_preambles, cfg.monitor_resources);

        const PowerTable pw = cfg.power;
        const PhaseDurations dur = cfg.duration;
        const double rao = cfg.rao_period_s;
        const double window = cfg.sync_window_s;
        const double slot = cfg.backoff_slot_s;
        const int lo = cfg.backoff_exclusive ? 1 : 0;
        const int hi = cfg.backoff_exclusive ? cfg.W - 1 : cfg.W;
        const int max_attempts = cfg.max_attempts();

        Trajectory success("connected");
        success.set_attribute("P", pw.tx).timeout(dur.tx).set_attribute("P", pw.inactive).timeout(dur.inactive);

        // Rolls back from its last activity to the "P = ra" step of the meter.
        Trajectory retry("backoff");
        retry.set_attribute("P", pw.backoff)
            .timeout([=](Context& ctx) {
                const auto slots = sample_uniform_int(ctx.rng(), lo, hi);
                const SimTime t = ctx.now() + static_cast<double>(slots) * slot;
                return next_rao(t, rao) - ctx.now();
            })
            .rollback(6);

        Trajectory drop("drop");
        drop.set_attribute("dropped", [](Context& ctx) { return ctx.attribute("dropped") + 1.0; });

        Trajectory meter("meter");
        meter.trap("reading")                            // 0
            .set_attribute("P", pw.off)                  // 1
            .wait()                                      // 2
            .set_attribute("reading",                    // 3
                           [st](Context& ctx) {
                               st->attempts[ctx.index()] = 0;
                               return ctx.attribute("reading") + 1.0;
                           })
            .set_attribute("P", pw.sync)                 // 4
            .timeout([=](Context& ctx) {                 // 5
                const SimTime t = ctx.now() + sample_uniform(ctx.rng(), 0.0, window);
                return next_rao(t, rao) - ctx.now();
            })
            .set_attribute("P", pw.ra);                  // 6
        ra_attempt(meter, cfg.n_preambles, dur.ra, std::min(dur.ra, 0.5 * rao), st); // 7, 8
        meter
            .branch(                                     // 9
                [st, max_attempts](Context& ctx) -> std::size_t {
                    if (ctx.attribute("ok") == 1.0)
                    {
                        return 1;
                    }
                    return ++st->attempts[ctx.index()] < max_attempts ? 2 : 3;
                },
                {std::move(success), std::move(retry), std::move(drop)}, {true, true, true})
            .rollback(9);                                // 10 -> 1

        env.add_generator({.name_prefix = "meter", .trajectory = std::move(meter), .initial_batch = cfg.n_devices});

        Trajectory trigger("trigger");
        trigger.send("reading");
        const double period = cfg.reading_period_s;
        env.add_generator({.name_prefix = "trigger",
                           .trajectory = std::move(trigger),
                           .interarrival = [period](Context&) { return period; },
                           .initial_batch = 1,
                           .monitor = false});
        return model;
    }

    std::vector<std::uint32_t> ra_probe(std::size_t contenders, int n_preambles, std::size_t rounds,
                                        std::uint64_t seed)
    {
        constexpr double kRao = 1.0;
        constexpr double kRa = 0.5;
        Environment env(seed);
        auto st = std::make_shared<MiotState>();
        st->rejected_at_seize.assign(contenders, 0);
        add_preambles(env, n_preambles, false);
        Trajectory probe("probe");
        probe.timeout([](Context& ctx) { return next_rao(ctx.now(), kRao) - ctx.now(); });
        ra_attempt(probe, n_preambles, kRa, kRa, st);
        probe.rollback(3);
        env.add_generator({.name_prefix = "probe", .trajectory = std::move(probe), .initial_batch = contenders});
        env.run(static_cast<double>(rounds) * kRao);

        // Successful attempts record ok=1 when their RAO's response window closes.
        std::vector<std::uint32_t> successes(rounds, 0);
        const auto ok = env.monitor().find_key("ok");
        for (const auto& a : env.monitor().attributes())
        {
            if (ok && a.key == *ok && a.value == 1.0)
            {
                const auto round = static_cast<std::size_t>(std::floor(a.time / kRao));
                if (round < rounds)
                {
                    ++successes[round];
                }
            }
        }
        return successes;
    }

    MiotResult miot_result(const MonitorStore& store, const MiotConfig& cfg)
    {
        MiotResult r;
        const auto meter = store.find_source("meter");
        if (!meter)
        {
            return r;
        }
        const auto key_p = store.find_key("P");
        const auto key_reading = store.find_key("reading");
        const auto key_ok = store.find_key("ok");
        const auto key_dropped = store.find_key("dropped");

        // Records are in time order, so each device's trace can be integrated on the fly.
        std::vector<PowerSample> last(cfg.n_devices, PowerSample{0.0, cfg.power.off});
        const auto close = [&](const PowerSample& s, SimTime until) {
            if (s.watts != cfg.power.off)
            {
                r.energy_j += s.watts * (until - s.time);
            }
        };
        for (const auto& a : store.attributes())
        {
            if (a.source != *meter || a.index >= cfg.n_devices)
            {
                continue;
            }
            if (key_p && a.key == *key_p)
            {
                close(last[a.index], a.time);
                last[a.index] = {a.time, a.value};
            }
            else if (key_reading && a.key == *key_reading)
            {
                ++r.readings;
            }
            else if (key_ok && a.key == *key_ok)
            {
                ++r.attempts;
                r.collisions += a.value != 1.0;
            }
            else if (key_dropped && a.key == *key_dropped)
            {
                ++r.dropped;
            }
        }
        for (const auto& s : last)
        {
            close(s, std::max(s.time, cfg.horizon_s));
        }
        return r;
    }

    SummaryTable summarize_miot(const MonitorStore& store, const MiotConfig& cfg)
    {
        const auto r = miot_result(store, cfg);
        const std::vector<std::pair<std::string, std::string>> g{{"n_devices", std::to_string(cfg.n_devices)},
                                                                 {"sync_window", format_real(cfg.sync_window_s)}};
        return {{g, "energy_J_per_reading", r.energy_per_reading()},
                {g, "rao_collisions", static_cast<double>(r.collisions)},
                {g, "ra_attempts", static_cast<double>(r.attempts)},
                {g, "readings", static_cast<double>(r.readings)},
                {g, "dropped", static_cast<double>(r.dropped)}};
    }
}
