#pragma once

#include "trajsim/config.hpp"
#include "trajsim/environment.hpp"
#include "trajsim/summary.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace trajsim::scenarios
{
    /// The clerk model: Poisson customers, one exponential server.
    struct Mm1Config
    {
        double lambda = 1.0;
        double mu = 2.0;
        std::uint64_t arrivals = 1'000'000;
        std::uint64_t seed = 0;

        static const std::vector<std::string>& keys();
        static Mm1Config from(const Config& cfg);
        Config describe() const;
    };

    /// Resource "server"; generator "customer" stops after cfg.arrivals.
    Environment build_mm1(const Mm1Config& cfg, std::int32_t replication = 0);

    struct Mm1Result
    {
        std::uint64_t served = 0;
        double wq_mean = 0.0;
        double wq_oracle = 0.0;
    };

    Mm1Result mm1_result(const MonitorStore& store, const Mm1Config& cfg);

    SummaryTable summarize_mm1(const MonitorStore& store, const Mm1Config& cfg);
}
