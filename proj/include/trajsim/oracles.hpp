#pragma once

#include <span>
#include <stdexcept>
#include <vector>

// Closed-form mean waiting times used as ground truth for the simulator.
namespace trajsim::oracles
{
    class UnstableSystem : public std::domain_error
    {
    public:
        using std::domain_error::domain_error;
    };

    struct TrafficClass
    {
        double rate = 0.0;          // arrivals / s
        double mean_service = 0.0;  // E[S], s
        double second_moment = 0.0; // E[S^2], s^2
        int priority = 0;

        double load() const noexcept { return rate * mean_service; }

        static TrafficClass deterministic(double rate, double service, int priority = 0);
        static TrafficClass exponential(double rate, double mean_service, int priority = 0);
    };

    /// M/M/1 mean wait in queue: lambda / (mu (mu - lambda)).
    double mm1_wq(double lambda, double mu);

    /// Pollaczek-Khinchine M/G/1 FIFO mean wait: lambda E[S^2] / (2 (1 - rho)).
    double mg1_wq(const TrafficClass& cls);

    /// M/D/1 mean wait: rho s / (2 (1 - rho)).
    double md1_wq(double lambda, double service);

    /// Non-preemptive head-of-line priority, mean wait per class.
    ///
    /// Returned in descending priority order (highest first); classes with
    /// equal priority are served FIFO among themselves and share one level.
    std::vector<double> hol_priority_wq(std::span<const TrafficClass> classes);

    /// Merges classes into one FIFO class with matching first two moments.
    TrafficClass aggregate(std::span<const TrafficClass> classes);
}
