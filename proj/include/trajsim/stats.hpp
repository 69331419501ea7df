#pragma once

#include <span>
#include <vector>

namespace trajsim
{
    struct BoxplotSummary
    {
        double p5 = 0.0;
        double p25 = 0.0;
        double p50 = 0.0;
        double p75 = 0.0;
        double p95 = 0.0;
    };

    /// Nearest-rank percentile: element ceil(p/100 * n) (1-based) of the sorted data.
    /// Throws std::invalid_argument on empty data or p outside [0, 100].
    double percentile(std::span<const double> data, double p);

    /// Same as percentile() but assumes `sorted` is already in ascending order.
    double percentile_sorted(std::span<const double> sorted, double p);

    BoxplotSummary boxplot(std::span<const double> data);

    double mean(std::span<const double> data);
}
