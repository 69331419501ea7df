#include "trajsim/scenarios/mm1.hpp"

#include "trajsim/oracles.hpp"

#include <algorithm>
#include <memory>

namespace trajsim::scenarios
{
    const std::vector<std::string>& Mm1Config::keys()
    {
        static const std::vector<std::string> k{"lambda", "mu", "arrivals", "seed"};
        return k;
    }

    Mm1Config Mm1Config::from(const Config& cfg)
    {
        cfg.require_known(keys(), "mm1");
        Mm1Config c;
        c.lambda = cfg.get_real("lambda", c.lambda);
        c.mu = cfg.get_real("mu", c.mu);
        const auto n = cfg.get_int("arrivals", static_cast<std::int64_t>(c.arrivals));
        c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
        if (!(c.lambda > 0.0) || !(c.mu > 0.0))
        {
            throw ConfigError("mm1: lambda and mu must be positive");
        }
        if (n < 1)
        {
            throw ConfigError("mm1: arrivals must be at least 1");
        }
        c.arrivals = static_cast<std::uint64_t>(n);
        return c;
    }

    Config Mm1Config::describe() const
    {
        Config out;
        out.set("lambda", format_real(lambda));
        out.set("mu", format_real(mu));
        out.set("arrivals", std::to_string(arrivals));
        out.set("seed", std::to_string(seed));
        return out;
    }

    Environment build_mm1(const Mm1Config& cfg, std::int32_t replication)
    {
        Environment env(cfg.seed, replication);
        env.add_resource({.name = "server"});

        Trajectory customer("customer");
        const double mu = cfg.mu;
        customer.seize("server").timeout([mu](Context& ctx) { return sample_exp(ctx.rng(), mu); }).release("server");

        auto left = std::make_shared<std::uint64_t>(cfg.arrivals);
        const double lambda = cfg.lambda;
        env.add_generator({.name_prefix = "customer",
                           .trajectory = std::move(customer),
                           .interarrival = [left, lambda](Context& ctx) {
                               if (*left == 0)
                               {
                                   return -1.0;
                               }
                               --*left;
                               return sample_exp(ctx.rng(), lambda);
                           }});
        return env;
    }

    Mm1Result mm1_result(const MonitorStore& store, const Mm1Config& cfg)
    {
        Mm1Result r;
        r.wq_oracle = oracles::mm1_wq(cfg.lambda, cfg.mu);
        const auto server = store.find_resource("server");
        if (!server)
        {
            return r;
        }
        std::vector<double> waits;
        for (const auto& rec : store.ended())
        {
            if (rec.resource == static_cast<std::int32_t>(*server) && rec.finished)
            {
                waits.push_back(queueing_delay(rec));
            }
        }
        // Sorted first so the mean does not depend on record order (CSV reloads sort by end time).
        std::sort(waits.begin(), waits.end());
        r.served = waits.size();
        r.wq_mean = waits.empty() ? 0.0 : mean(waits);
        return r;
    }

    SummaryTable summarize_mm1(const MonitorStore& store, const Mm1Config& cfg)
    {
        const auto r = mm1_result(store, cfg);
        const std::vector<std::pair<std::string, std::string>> g{{"lambda", format_real(cfg.lambda)},
                                                                  {"mu", format_real(cfg.mu)}};
        return {{g, "served", static_cast<double>(r.served)},
                {g, "wq_mean", r.wq_mean},
                {g, "wq_oracle", r.wq_oracle}};
    }
}
