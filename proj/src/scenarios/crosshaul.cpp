#include "trajsim/scenarios/crosshaul.hpp"

#include "trajsim/rng.hpp"

namespace trajsim::scenarios
{
    XhaulPolicy parse_policy(std::string_view text)
    {
        if (text == "fifo")
        {
            return XhaulPolicy::Fifo;
        }
        if (text == "sp")
        {
            return XhaulPolicy::Sp;
        }
        if (text == "sp_preempt")
        {
            return XhaulPolicy::SpPreempt;
        }
        throw ConfigError("xhaul: unknown policy '" + std::string(text) + "' (expected fifo, sp or sp_preempt)");
    }

    std::string_view policy_name(XhaulPolicy policy)
    {
        switch (policy)
        {
        case XhaulPolicy::Fifo:
            return "fifo";
        case XhaulPolicy::Sp:
            return "sp";
        case XhaulPolicy::SpPreempt:
            return "sp_preempt";
        }
        return "?";
    }

    double XhaulConfig::fh_rate() const
    {
        return total_load * fh_share * line_rate_bps / (fh_frame_bytes * 8.0);
    }

    double XhaulConfig::bh_rate() const
    {
        return total_load * (1.0 - fh_share) * line_rate_bps / (TrimodalPacket::mean_bytes() * 8.0);
    }

    double XhaulConfig::fh_service() const
    {
        return fh_frame_bytes * 8.0 / line_rate_bps;
    }

    const std::vector<std::string>& XhaulConfig::keys()
    {
        static const std::vector<std::string> k{"line_rate_bps", "total_load",     "fh_share",
                                                "n_xpfe",        "policy",         "horizon_s",
                                                "seed",          "fh_frame_bytes", "monitor_resources"};
        return k;
    }

    XhaulConfig XhaulConfig::from(const Config& cfg)
    {
        cfg.require_known(keys(), "xhaul");
        XhaulConfig c;
        c.line_rate_bps = cfg.get_real("line_rate_bps", c.line_rate_bps);
        c.total_load = cfg.get_real("total_load", c.total_load);
        c.fh_share = cfg.get_real("fh_share", c.fh_share);
        const auto n = cfg.get_int("n_xpfe", c.n_xpfe);
        c.policy = parse_policy(cfg.get_string("policy", "fifo"));
        c.horizon_s = cfg.get_real("horizon_s", c.horizon_s);
        c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
        c.fh_frame_bytes = cfg.get_real("fh_frame_bytes", c.fh_frame_bytes);
        c.monitor_resources = cfg.get_bool("monitor_resources", c.monitor_resources);

        if (!(c.total_load > 0.0 && c.total_load < 1.0))
        {
            throw ConfigError("xhaul: total_load must lie in (0, 1)");
        }
        if (!(c.fh_share >= 0.0 && c.fh_share <= 1.0))
        {
            throw ConfigError("xhaul: fh_share must lie in [0, 1]");
        }
        if (n < 1 || n > 1000)
        {
            throw ConfigError("xhaul: n_xpfe must be in 1..1000");
        }
        if (!(c.line_rate_bps > 0.0) || !(c.fh_frame_bytes > 0.0) || !(c.horizon_s > 0.0))
        {
            throw ConfigError("xhaul: line_rate_bps, fh_frame_bytes and horizon_s must be positive");
        }
        c.n_xpfe = static_cast<int>(n);
        return c;
    }

    Config XhaulConfig::describe() const
    {
        Config out;
        out.set("line_rate_bps", format_real(line_rate_bps));
        out.set("total_load", format_real(total_load));
        out.set("fh_share", format_real(fh_share));
        out.set("n_xpfe", std::to_string(n_xpfe));
        out.set("policy", std::string(policy_name(policy)));
        out.set("horizon_s", format_real(horizon_s));
        out.set("seed", std::to_string(seed));
        out.set("fh_frame_bytes", format_real(fh_frame_bytes));
        out.set("monitor_resources", monitor_resources ? "true" : "false");
        return out;
    }

    namespace
    {
        std::string xpfe(int k)
        {
            return "xpfe" + std::to_string(k);
        }
    }

    Environment build_crosshaul(const XhaulConfig& cfg, std::int32_t replication)
    {
        Environment env(cfg.seed, replication);
        const bool preempt = cfg.policy == XhaulPolicy::SpPreempt;
        for (int k = 1; k <= cfg.n_xpfe; ++k)
        {
            env.add_resource({.name = xpfe(k),
                              .capacity = 1,
                              .preemptive = preempt,
                              .preempt_fate = PreemptFate::Drop,
                              .monitor = cfg.monitor_resources});
        }

        const double service = cfg.fh_service();
        Trajectory fh("fh");
        for (int k = 1; k <= cfg.n_xpfe; ++k)
        {
            fh.seize(xpfe(k)).timeout(service).release(xpfe(k));
        }
        if (cfg.fh_rate() > 0.0)
        {
            const double rate = cfg.fh_rate();
            env.add_generator({.name_prefix = "fh",
                               .trajectory = std::move(fh),
                               .interarrival = [rate](Context& ctx) { return sample_exp(ctx.rng(), rate); },
                               .priority = cfg.policy == XhaulPolicy::Fifo ? 0 : 1,
                               .preemptible = false});
        }

        if (cfg.bh_rate() > 0.0)
        {
            const double rate = cfg.bh_rate();
            const double bits_per_s = cfg.line_rate_bps;
            for (int k = 1; k <= cfg.n_xpfe; ++k)
            {
                Trajectory bh("bh" + std::to_string(k));
                bh.seize(xpfe(k))
                    .timeout([bits_per_s](Context& ctx) {
                        return sample_trimodal(ctx.rng()).size * 8.0 / bits_per_s;
                    })
                    .release(xpfe(k));
                env.add_generator({.name_prefix = "bh" + std::to_string(k) + "_",
                                   .trajectory = std::move(bh),
                                   .interarrival = [rate](Context& ctx) { return sample_exp(ctx.rng(), rate); },
                                   .priority = 0,
                                   .preemptible = true});
            }
        }
        return env;
    }

    XhaulDelays crosshaul_delays(const MonitorStore& store, const XhaulConfig& cfg)
    {
        const auto n = static_cast<std::size_t>(cfg.n_xpfe);
        XhaulDelays d;
        d.fh_hop.resize(n);
        d.bh_hop.resize(n);
        d.bh_dropped.assign(n, 0);

        // store resource id -> hop, store source id -> 0 for FH, k for bh<k>_
        std::vector<int> hop_of(store.resource_count(), -1);
        for (std::size_t k = 0; k < n; ++k)
        {
            if (const auto id = store.find_resource(xpfe(static_cast<int>(k + 1))))
            {
                hop_of[*id] = static_cast<int>(k);
            }
        }
        std::vector<int> class_of(store.source_count(), -1);
        if (const auto id = store.find_source("fh"))
        {
            class_of[*id] = 0;
        }
        for (std::size_t k = 0; k < n; ++k)
        {
            if (const auto id = store.find_source("bh" + std::to_string(k + 1) + "_"))
            {
                class_of[*id] = static_cast<int>(k + 1);
            }
        }

        // Ended and ongoing records alike, so a store reloaded from CSV gives the same result.
        for (const auto* records : {&store.ended(), &store.ongoing()})
        {
            for (const auto& r : *records)
            {
                const int cls = class_of[r.source];
                if (cls < 0)
                {
                    continue;
                }
                if (r.is_lifecycle())
                {
                    if (cls == 0 && r.finished)
                    {
                        d.fh_total.push_back(r.end_time - r.start_time - r.activity_time);
                    }
                    else if (cls > 0 && !r.finished && r.end_time < cfg.horizon_s)
                    {
                        // Left before the horizon without finishing: discarded by preemption.
                        ++d.bh_dropped[static_cast<std::size_t>(cls - 1)];
                    }
                    continue;
                }
                if (!r.finished)
                {
                    continue;
                }
                const int hop = hop_of[static_cast<std::size_t>(r.resource)];
                if (hop < 0)
                {
                    continue;
                }
                auto& bucket =
                    cls == 0 ? d.fh_hop[static_cast<std::size_t>(hop)] : d.bh_hop[static_cast<std::size_t>(hop)];
                bucket.push_back(queueing_delay(r));
            }
        }
        return d;
    }

    SummaryTable summarize_crosshaul(const MonitorStore& store, const XhaulConfig& cfg)
    {
        auto d = crosshaul_delays(store, cfg);
        SummaryTable t;
        const auto group = [&](const char* cls, const std::string& hop) {
            return std::vector<std::pair<std::string, std::string>>{{"policy", std::string(policy_name(cfg.policy))},
                                                                    {"n_xpfe", std::to_string(cfg.n_xpfe)},
                                                                    {"class", cls},
                                                                    {"hop", hop}};
        };
        for (int k = 0; k < cfg.n_xpfe; ++k)
        {
            add_distribution(t, group("FH", std::to_string(k + 1)), std::move(d.fh_hop[static_cast<std::size_t>(k)]));
        }
        add_distribution(t, group("FH", "all"), std::move(d.fh_total));
        for (int k = 0; k < cfg.n_xpfe; ++k)
        {
            add_distribution(t, group("BH", std::to_string(k + 1)), std::move(d.bh_hop[static_cast<std::size_t>(k)]));
            t.push_back({group("BH", std::to_string(k + 1)), "dropped",
                         static_cast<double>(d.bh_dropped[static_cast<std::size_t>(k)])});
        }
        return t;
    }
}
