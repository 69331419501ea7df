#pragma once

#include "trajsim/config.hpp"
#include "trajsim/environment.hpp"
#include "trajsim/summary.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace trajsim::scenarios
{
    /// Watts per device state. `off` only marks the end of a reading cycle
    /// and must differ from every other entry.
    struct PowerTable
    {
        double off = 0.0;
        double sync = 0.0;
        double ra = 0.0;
        double backoff = 0.0;
        double tx = 0.0;
        double inactive = 0.0;
    };

    /// Seconds spent in the fixed-length phases.
    struct PhaseDurations
    {
        double ra = 0.0;       // preamble plus response window
        double tx = 0.0;       // connection request carrying the reading
        double inactive = 0.0; // waiting for the connection release
    };

    struct MiotConfig
    {
        std::uint64_t n_devices = 5000;
        double sync_window_s = 60.0;
        double reading_period_s = 3600.0;
        int W = 20;
        int m = 9;
        int n_preambles = 54;
        double rao_period_s = 0.01;
        double backoff_slot_s = 0.01;
        double horizon_s = 86400.0;
        std::uint64_t seed = 0;
        bool retries_are_total = false;  // m counts all attempts instead of retries after the first
        bool backoff_exclusive = false;  // draw backoff slots from 1..W-1 instead of 0..W
        bool monitor_resources = false;
        PowerTable power;
        PhaseDurations duration;

        /// Attempts allowed per reading.
        int max_attempts() const { return retries_are_total ? m : m + 1; }

        static const std::vector<std::string>& keys();
        /// power.* and duration.* entries are required.
        static MiotConfig from(const Config& cfg);
        Config describe() const;
    };

    /// Earliest RAO boundary k * period at or after t.
    SimTime next_rao(SimTime t, double period);

    /// One random-access opportunity: each of `contenders` picks a preamble
    /// uniformly; singletons succeed. Returns the success flag per contender.
    std::vector<bool> ra_round(std::size_t contenders, std::size_t n_preambles, RngStream& rng);

    struct PowerSample
    {
        SimTime time = 0.0;
        double watts = 0.0;
    };

    /// Integral of a piecewise-constant power trace, skipping segments at
    /// `off_power`. The last segment is closed at `end`.
    double integrate_energy(std::span<const PowerSample> trace, double off_power, SimTime end);

    struct MiotState
    {
        std::vector<std::uint64_t> rejected_at_seize; // per device
        std::vector<int> attempts;                    // in the current reading
    };

    struct MiotModel
    {
        Environment env;
        std::shared_ptr<MiotState> state;
    };

    /// Resources preamble1..preambleN (capacity 1, no queue); generator
    /// "meter" holds the devices, generator "trigger" broadcasts "reading".
    MiotModel build_miot(const MiotConfig& cfg, std::int32_t replication = 0);

    /// K contenders attempting at every RAO through the same seize/collision
    /// logic as the meters. Returns successes per RAO.
    std::vector<std::uint32_t> ra_probe(std::size_t contenders, int n_preambles, std::size_t rounds,
                                        std::uint64_t seed);

    struct MiotResult
    {
        double energy_j = 0.0;
        std::uint64_t readings = 0;
        std::uint64_t dropped = 0;
        std::uint64_t attempts = 0;
        std::uint64_t collisions = 0; // failed attempts

        double energy_per_reading() const { return readings ? energy_j / static_cast<double>(readings) : 0.0; }
    };

    MiotResult miot_result(const MonitorStore& store, const MiotConfig& cfg);

    /// Rows (n_devices, sync_window) with energy per reading and collision counts.
    SummaryTable summarize_miot(const MonitorStore& store, const MiotConfig& cfg);
}
