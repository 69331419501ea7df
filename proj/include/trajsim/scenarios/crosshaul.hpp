#pragma once

#include "trajsim/config.hpp"
#include "trajsim/environment.hpp"
#include "trajsim/summary.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace trajsim::scenarios
{
    enum class XhaulPolicy
    {
        Fifo,
        Sp,
        SpPreempt,
    };

    /// Throws ConfigError for anything but fifo, sp, sp_preempt.
    XhaulPolicy parse_policy(std::string_view text);
    std::string_view policy_name(XhaulPolicy policy);

    /// Fronthaul (80 B basic frames) and trimodal backhaul through N tandem switches.
    struct XhaulConfig
    {
        double line_rate_bps = 40e9;
        double total_load = 0.75;
        double fh_share = 0.5;
        int n_xpfe = 1;
        XhaulPolicy policy = XhaulPolicy::Fifo;
        double horizon_s = 0.05;
        std::uint64_t seed = 0;
        double fh_frame_bytes = 80.0;
        bool monitor_resources = false; // per-hop queue records are large at these rates

        double fh_rate() const;      // frames / s
        double bh_rate() const;      // packets / s, per switch
        double fh_service() const;   // s per hop

        static const std::vector<std::string>& keys();
        static XhaulConfig from(const Config& cfg);
        Config describe() const;
    };

    /// Resources xpfe1..xpfeN; generator "fh" crosses all of them in order,
    /// generator "bh<k>_" loads xpfe<k> only.
    Environment build_crosshaul(const XhaulConfig& cfg, std::int32_t replication = 0);

    struct XhaulDelays
    {
        std::vector<std::vector<double>> fh_hop; // [hop][sample], finished visits
        std::vector<double> fh_total;            // finished FH arrivals, all hops
        std::vector<std::vector<double>> bh_hop;
        std::vector<std::uint64_t> bh_dropped;   // preempted and discarded, per hop
    };

    XhaulDelays crosshaul_delays(const MonitorStore& store, const XhaulConfig& cfg);

    /// Rows (policy, n_xpfe, class, hop) with hop "all" for the cumulative FH delay.
    SummaryTable summarize_crosshaul(const MonitorStore& store, const XhaulConfig& cfg);
}
