#include "trajsim/scenarios/pon.hpp"

#include "trajsim/rng.hpp"

#include <algorithm>
#include <cmath>

namespace trajsim::scenarios
{
    double PonConfig::mean_burst_bytes() const
    {
        return zero_truncated_poisson_mean(burst_mean_packets) * TrimodalPacket::mean_bytes();
    }

    double PonConfig::burst_rate(double bits_per_s) const
    {
        return bits_per_s / (8.0 * mean_burst_bytes());
    }

    double PonConfig::reservation_s() const
    {
        return rrh_burst_bytes * 8.0 / upstream_rate_bps;
    }

    double PonConfig::nominal_load() const
    {
        double bps = n_onus * onu_rate_bps;
        bps += mode == PonMode::SmallCell ? cell_rate_bps : rrh_burst_bytes * 8.0 / rrh_period_s;
        return bps / upstream_rate_bps;
    }

    const std::vector<std::string>& PonConfig::keys()
    {
        static const std::vector<std::string> k{
            "mode",         "n_onus",          "grant_limit_bytes", "horizon_s",          "seed",
            "upstream_rate_bps", "onu_rate_bps", "cell_rate_bps",   "guard_time_s",       "rrh_burst_bytes",
            "rrh_period_s", "burst_mean_packets", "monitor_packets", "monitor_resources"};
        return k;
    }

    PonConfig PonConfig::from(const Config& cfg)
    {
        cfg.require_known(keys(), "pon");
        PonConfig c;
        const auto mode = cfg.get_string("mode", "smallcell");
        if (mode == "smallcell")
        {
            c.mode = PonMode::SmallCell;
        }
        else if (mode == "rrh")
        {
            c.mode = PonMode::Rrh;
            c.n_onus = 7;
            if (cfg.has("cell_rate_bps"))
            {
                throw ConfigError("pon: cell_rate_bps applies to mode=smallcell only");
            }
        }
        else
        {
            throw ConfigError("pon: unknown mode '" + mode + "' (expected smallcell or rrh)");
        }
        const auto n = cfg.get_int("n_onus", c.n_onus);
        if (n < 1 || n > 4096)
        {
            throw ConfigError("pon: n_onus must be in 1..4096");
        }
        c.n_onus = static_cast<int>(n);
        const double limit = cfg.get_real("grant_limit_bytes", 0.0);
        c.grant_limit_bytes = limit == 0.0 ? kNoLimit : limit;
        c.horizon_s = cfg.get_real("horizon_s", c.horizon_s);
        c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
        c.upstream_rate_bps = cfg.get_real("upstream_rate_bps", c.upstream_rate_bps);
        c.onu_rate_bps = cfg.get_real("onu_rate_bps", c.onu_rate_bps);
        c.cell_rate_bps = cfg.get_real("cell_rate_bps", c.cell_rate_bps);
        c.guard_time_s = cfg.get_real("guard_time_s", c.guard_time_s);
        c.rrh_burst_bytes = cfg.get_real("rrh_burst_bytes", c.rrh_burst_bytes);
        c.rrh_period_s = cfg.get_real("rrh_period_s", c.rrh_period_s);
        c.burst_mean_packets = cfg.get_real("burst_mean_packets", c.burst_mean_packets);
        c.monitor_packets = cfg.get_bool("monitor_packets", c.monitor_packets);
        c.monitor_resources = cfg.get_bool("monitor_resources", c.monitor_resources);

        const double largest = TrimodalPacket::sizes.back();
        if (c.grant_limit_bytes < largest)
        {
            throw ConfigError("pon: grant_limit_bytes must be 0 (no limit) or at least " +
                              std::to_string(static_cast<int>(largest)) + " so every packet fits a window");
        }
        if (!(c.upstream_rate_bps > 0.0) || !(c.horizon_s > 0.0) || !(c.burst_mean_packets > 0.0))
        {
            throw ConfigError("pon: upstream_rate_bps, horizon_s and burst_mean_packets must be positive");
        }
        if (c.onu_rate_bps < 0.0 || c.cell_rate_bps < 0.0 || c.guard_time_s < 0.0)
        {
            throw ConfigError("pon: rates and guard_time_s must be non-negative");
        }
        if (c.mode == PonMode::Rrh)
        {
            if (!(c.rrh_period_s > 0.0) || !(c.rrh_burst_bytes > 0.0))
            {
                throw ConfigError("pon: rrh_period_s and rrh_burst_bytes must be positive");
            }
            const FhReservations r{c.rrh_period_s, c.reservation_s(), c.guard_time_s};
            if (r.usable_gap() * c.upstream_rate_bps / 8.0 < largest)
            {
                throw ConfigError("pon: the gap between FH reservations cannot carry a " +
                                  std::to_string(static_cast<int>(largest)) + " B packet");
            }
        }
        if (c.nominal_load() >= 1.0)
        {
            throw ConfigError("pon: offered load " + format_real(c.nominal_load()) + " is not below 1");
        }
        return c;
    }

    Config PonConfig::describe() const
    {
        Config out;
        out.set("mode", mode == PonMode::SmallCell ? "smallcell" : "rrh");
        out.set("n_onus", std::to_string(n_onus));
        out.set("grant_limit_bytes", std::isinf(grant_limit_bytes) ? "0" : format_real(grant_limit_bytes));
        out.set("horizon_s", format_real(horizon_s));
        out.set("seed", std::to_string(seed));
        out.set("upstream_rate_bps", format_real(upstream_rate_bps));
        out.set("onu_rate_bps", format_real(onu_rate_bps));
        if (mode == PonMode::SmallCell)
        {
            out.set("cell_rate_bps", format_real(cell_rate_bps));
        }
        out.set("guard_time_s", format_real(guard_time_s));
        out.set("rrh_burst_bytes", format_real(rrh_burst_bytes));
        out.set("rrh_period_s", format_real(rrh_period_s));
        out.set("burst_mean_packets", format_real(burst_mean_packets));
        out.set("monitor_packets", monitor_packets ? "true" : "false");
        out.set("monitor_resources", monitor_resources ? "true" : "false");
        return out;
    }

    SimTime FhReservations::earliest_start(SimTime t) const
    {
        const double k = std::floor(t / period);
        if (t < k * period + duration + guard)
        {
            return k * period + duration + guard;
        }
        if (t >= (k + 1.0) * period - guard)
        {
            return (k + 1.0) * period + duration + guard;
        }
        return t;
    }

    SimTime FhReservations::room(SimTime t) const
    {
        const double k = std::floor(t / period) + 1.0;
        return std::max(0.0, k * period - guard - t);
    }

    Window dba_next_window(const DbaState& state, std::size_t onu, double limit, bool exempt, SimTime now)
    {
        const double request = state.pending_request.at(onu);
        return {std::max(now, state.next_window_start), exempt ? request : std::min(request, limit)};
    }

    PlannedWindow plan_window(const Window& window, const std::deque<QueuedPacket>& queue, double bits_per_s,
                              const FhReservations* reservations)
    {
        PlannedWindow p;
        p.start = reservations ? reservations->earliest_start(window.start) : window.start;
        for (int attempt = 0; attempt < 2; ++attempt)
        {
            const SimTime room = reservations ? reservations->room(p.start) : kForever;
            p.packets = 0;
            p.bytes = 0.0;
            p.duration = 0.0;
            for (const auto& pkt : queue)
            {
                const double tx = pkt.bytes * 8.0 / bits_per_s;
                if (p.bytes + pkt.bytes > window.grant_bytes || p.duration + tx > room)
                {
                    break;
                }
                ++p.packets;
                p.bytes += pkt.bytes;
                p.duration += tx;
            }
            const bool blocked_by_gap =
                p.packets == 0 && !queue.empty() && queue.front().bytes <= window.grant_bytes;
            if (!reservations || !blocked_by_gap)
            {
                break;
            }
            // Not even the head packet fits before the next reservation: use the following gap.
            p.start = reservations->earliest_start(p.start + room);
        }
        return p;
    }

    namespace
    {
        Sampler burst_interarrival(double burst_rate, double mean_packets)
        {
            auto remaining = std::make_shared<std::uint64_t>(0);
            return [remaining, burst_rate, mean_packets](Context& ctx) {
                if (*remaining > 0)
                {
                    --*remaining;
                    return 0.0;
                }
                *remaining = sample_burst_length(ctx.rng(), mean_packets) - 1;
                return sample_exp(ctx.rng(), burst_rate);
            };
        }
    }

    PonModel build_pon(const PonConfig& cfg, std::int32_t replication, bool log_windows)
    {
        PonModel m{Environment(cfg.seed, replication), std::make_shared<PonState>()};
        auto& env = m.env;
        auto st = m.state;
        st->log_windows = log_windows;

        env.add_resource({.name = "link", .capacity = 1, .monitor = cfg.monitor_resources});
        for (int k = 1; k <= cfg.n_onus; ++k)
        {
            st->onu_names.push_back("onu" + std::to_string(k));
        }
        const bool with_cell = cfg.mode == PonMode::SmallCell;
        if (with_cell)
        {
            st->onu_names.push_back("cell");
        }
        for (const auto& name : st->onu_names)
        {
            st->onu_resources.push_back(
                &env.add_resource({.name = name, .capacity = 0, .monitor = cfg.monitor_resources}));
        }
        const std::size_t n = st->onu_names.size();
        st->queues.resize(n);
        st->last_report.assign(n, 0.0);
        st->generated_bytes.assign(n, 0.0);
        st->dba.pending_request.assign(n, 0.0);

        const double rate = cfg.upstream_rate_bps;
        for (std::size_t i = 0; i < n; ++i)
        {
            const std::string& name = st->onu_names[i];
            Trajectory pkt(name);
            pkt.set_attribute("bytes",
                              [st, i](Context& ctx) {
                                  const auto size = sample_trimodal(ctx.rng()).size;
                                  st->queues[i].push_back({ctx.now(), size});
                                  st->generated_bytes[i] += size;
                                  return static_cast<double>(size);
                              })
                .seize(name)
                .seize("link")
                .timeout([rate](Context& ctx) { return ctx.attribute("bytes") * 8.0 / rate; })
                .release("link")
                .set_capacity(name, -1.0, CapacityMode::Delta) // the window's token is spent
                .release(name);
            const bool cell = with_cell && i + 1 == n;
            const double bps = cell ? cfg.cell_rate_bps : cfg.onu_rate_bps;
            if (bps <= 0.0)
            {
                continue;
            }
            env.add_generator({.name_prefix = cell ? name : name + "_",
                               .trajectory = std::move(pkt),
                               .interarrival = burst_interarrival(cfg.burst_rate(bps), cfg.burst_mean_packets),
                               .monitor = cfg.monitor_packets});
        }

        std::shared_ptr<const FhReservations> res;
        if (cfg.mode == PonMode::Rrh)
        {
            res = std::make_shared<const FhReservations>(
                FhReservations{cfg.rrh_period_s, cfg.reservation_s(), cfg.guard_time_s});
            Trajectory rrh("rrh");
            rrh.seize("link")
                .timeout([st, d = res->duration](Context&) {
                    ++st->fh_reservations;
                    return d;
                })
                .release("link")
                .timeout(res->period - res->duration)
                .rollback(4);
            env.add_generator({.name_prefix = "rrh", .trajectory = std::move(rrh), .initial_batch = 1, .priority = 1});
        }

        const double limit = cfg.grant_limit_bytes;
        const double guard = cfg.guard_time_s;
        Trajectory olt("olt");
        olt.select(st->onu_names, SelectPolicy::RoundRobin)
            .timeout([st, res, limit, guard, rate, with_cell](Context& ctx) {
                const Resource* sel = ctx.selected();
                const auto it = std::find(st->onu_resources.begin(), st->onu_resources.end(), sel);
                const auto i = static_cast<std::size_t>(it - st->onu_resources.begin());
                auto& q = st->queues[i];

                // Gated report: bytes that had arrived when the ONU's last window ended.
                double request = 0.0;
                for (const auto& pkt : q)
                {
                    if (pkt.arrived > st->last_report[i])
                    {
                        break;
                    }
                    request += pkt.bytes;
                }
                st->dba.pending_request[i] = request;

                const bool exempt = with_cell && i + 1 == st->queues.size();
                const Window w = dba_next_window(st->dba, i, limit, exempt, ctx.now());
                const PlannedWindow p = plan_window(w, q, rate, res.get());
                q.erase(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(p.packets));
                st->last_report[i] = p.start + p.duration;
                st->dba.next_window_start = p.start + p.duration + guard;
                st->current = p;
                if (st->log_windows)
                {
                    st->windows.push_back({p.start, p.start + p.duration, i, p.bytes});
                }
                return p.start - ctx.now();
            })
            .set_capacity_selected([st](Context&) { return static_cast<double>(st->current.packets); })
            .timeout([st](Context&) { return st->current.duration; })
            .rollback(4);
        env.add_generator({.name_prefix = "olt", .trajectory = std::move(olt), .initial_batch = 1, .monitor = false});
        return m;
    }

    PonDelays pon_delays(const MonitorStore& store)
    {
        enum Cls : std::int8_t
        {
            None = -1,
            Onu,
            Cell,
            Fh,
        };
        std::vector<Cls> cls(store.source_count(), None);
        for (std::uint32_t s = 0; s < store.source_count(); ++s)
        {
            const auto& name = store.source_name(s);
            if (name == "cell")
            {
                cls[s] = Cell;
            }
            else if (name == "rrh")
            {
                cls[s] = Fh;
            }
            else if (name.rfind("onu", 0) == 0)
            {
                cls[s] = Onu;
            }
        }
        const auto link = store.find_resource("link");

        PonDelays d;
        for (const auto& r : store.ended())
        {
            if (!r.finished)
            {
                continue;
            }
            const Cls c = cls[r.source];
            if (c == Fh)
            {
                if (link && r.resource == static_cast<std::int32_t>(*link))
                {
                    d.fh.push_back(queueing_delay(r));
                }
            }
            else if (c != None && r.is_lifecycle())
            {
                (c == Onu ? d.onu : d.cell).push_back(r.end_time - r.start_time - r.activity_time);
            }
        }
        return d;
    }

    double pon_offered_load(const PonState& state, const PonConfig& cfg, SimTime horizon)
    {
        double bytes = 0.0;
        for (const double b : state.generated_bytes)
        {
            bytes += b;
        }
        bytes += static_cast<double>(state.fh_reservations) * cfg.rrh_burst_bytes;
        return bytes * 8.0 / (cfg.upstream_rate_bps * horizon);
    }

    std::string limit_label(double limit_bytes)
    {
        return std::isinf(limit_bytes) ? "Inf" : format_real(limit_bytes);
    }

    SummaryTable summarize_pon(const MonitorStore& store, const PonConfig& cfg)
    {
        auto d = pon_delays(store);
        SummaryTable t;
        const std::string mode = cfg.mode == PonMode::SmallCell ? "smallcell" : "rrh";
        const auto group = [&](const char* source) {
            return std::vector<std::pair<std::string, std::string>>{
                {"mode", mode}, {"limit", limit_label(cfg.grant_limit_bytes)}, {"source", source}};
        };
        add_distribution(t, group("onu"), std::move(d.onu));
        add_distribution(t, group("cell"), std::move(d.cell));
        add_distribution(t, group("fh"), std::move(d.fh));

        // Offered load from the monitor: packet sizes plus one burst per FH reservation.
        if (const auto key = store.find_key("bytes"))
        {
            double bytes = 0.0;
            for (const auto& a : store.attributes())
            {
                if (a.key == *key)
                {
                    bytes += a.value;
                }
            }
            if (const auto rrh = store.find_source("rrh"); rrh && cfg.mode == PonMode::Rrh)
            {
                const auto link = store.find_resource("link");
                std::uint64_t started = 0;
                for (const auto* recs : {&store.ended(), &store.ongoing()})
                {
                    for (const auto& r : *recs)
                    {
                        started += r.source == *rrh && link && r.resource == static_cast<std::int32_t>(*link);
                    }
                }
                bytes += static_cast<double>(started) * cfg.rrh_burst_bytes;
            }
            t.push_back({group("all"), "offered_load", bytes * 8.0 / (cfg.upstream_rate_bps * cfg.horizon_s)});
        }
        return t;
    }
}
