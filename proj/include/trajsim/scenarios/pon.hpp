#pragma once

#include "trajsim/config.hpp"
#include "trajsim/environment.hpp"
#include "trajsim/summary.hpp"

#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace trajsim::scenarios
{
    enum class PonMode
    {
        SmallCell,
        Rrh,
    };

    inline constexpr double kNoLimit = std::numeric_limits<double>::infinity();

    /// Upstream of a TDM-PON shared by residential ONUs and either a small
    /// cell (one more ONU, exempt from the grant limit) or an RRH holding
    /// periodic reservations.
    struct PonConfig
    {
        double upstream_rate_bps = 1.25e9;
        PonMode mode = PonMode::SmallCell;
        int n_onus = 31;
        double onu_rate_bps = 20e6;
        double cell_rate_bps = 150e6;
        double grant_limit_bytes = kNoLimit;
        double guard_time_s = 1e-6;
        double rrh_burst_bytes = 6000.0;
        double rrh_period_s = 66.67e-6;
        double burst_mean_packets = 20.0;
        double horizon_s = 1.0;
        std::uint64_t seed = 0;
        bool monitor_packets = true;
        bool monitor_resources = false;

        double mean_burst_bytes() const;
        double burst_rate(double bits_per_s) const;
        double reservation_s() const; // rrh_burst at the upstream rate
        /// Nominal offered load of all sources.
        double nominal_load() const;

        static const std::vector<std::string>& keys();
        static PonConfig from(const Config& cfg);
        Config describe() const;
    };

    /// Periodic upstream reservations [k P, k P + D) with a guard on each side.
    struct FhReservations
    {
        double period = 0.0;
        double duration = 0.0;
        double guard = 0.0;

        /// First instant >= t outside every [k P - guard, k P + D + guard).
        SimTime earliest_start(SimTime t) const;
        /// Time from `t` (an allowed start) until the next blocked interval begins.
        SimTime room(SimTime t) const;
        /// Usable time between two reservations.
        SimTime usable_gap() const { return period - duration - 2.0 * guard; }
    };

    struct DbaState
    {
        std::vector<double> pending_request; // bytes reported per ONU
        SimTime next_window_start = 0.0;     // previous window end plus guard
    };

    struct Window
    {
        SimTime start = 0.0;
        double grant_bytes = 0.0;
    };

    /// Round-robin IPACT-like grant: start = max(now, next_window_start);
    /// grant = min(request, limit), or the full request when `exempt`.
    Window dba_next_window(const DbaState& state, std::size_t onu, double limit, bool exempt, SimTime now);

    struct QueuedPacket
    {
        SimTime arrived = 0.0;
        std::uint32_t bytes = 0;
    };

    struct PlannedWindow
    {
        SimTime start = 0.0;
        std::size_t packets = 0;
        double bytes = 0.0;
        SimTime duration = 0.0;
    };

    /// Whole packets from the head of `queue` totalling at most
    /// `window.grant_bytes`. With reservations, the window is moved out of
    /// blocked time and truncated to the gap it starts in.
    PlannedWindow plan_window(const Window& window, const std::deque<QueuedPacket>& queue, double bits_per_s,
                              const FhReservations* reservations);

    struct WindowLog
    {
        SimTime start;
        SimTime end;
        std::size_t onu;
        double bytes;
    };

    /// Shared between the OLT worker and the packet trajectories.
    struct PonState
    {
        std::vector<std::string> onu_names; // round-robin order; the cell, if any, is last
        std::vector<const Resource*> onu_resources;
        std::vector<std::deque<QueuedPacket>> queues;
        std::vector<SimTime> last_report;
        std::vector<double> generated_bytes; // per ONU
        DbaState dba;
        PlannedWindow current;
        std::uint64_t fh_reservations = 0;
        bool log_windows = false;
        std::vector<WindowLog> windows;
    };

    struct PonModel
    {
        Environment env;
        std::shared_ptr<PonState> state;
    };

    /// Resources "link", "onu1".."onuN" and "cell"; generators "onu<k>_",
    /// "cell", "olt" (the DBA worker) and "rrh" (the reservation worker).
    PonModel build_pon(const PonConfig& cfg, std::int32_t replication = 0, bool log_windows = false);

    struct PonDelays
    {
        std::vector<double> onu;
        std::vector<double> cell;
        std::vector<double> fh;
    };

    PonDelays pon_delays(const MonitorStore& store);

    /// Offered bytes (packets plus FH reservations) over capacity x horizon.
    double pon_offered_load(const PonState& state, const PonConfig& cfg, SimTime horizon);

    std::string limit_label(double limit_bytes);

    /// Rows (mode, limit, source) with the delay percentiles.
    SummaryTable summarize_pon(const MonitorStore& store, const PonConfig& cfg);
}
