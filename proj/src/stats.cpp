#include "trajsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace trajsim
{
    double percentile_sorted(std::span<const double> sorted, double p)
    {
        if (sorted.empty())
        {
            throw std::invalid_argument("percentile: empty data");
        }
        if (!(p >= 0.0 && p <= 100.0))
        {
            throw std::invalid_argument("percentile: p must be within [0, 100]");
        }
        const auto n = static_cast<double>(sorted.size());
        auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0));
        rank = std::clamp<std::size_t>(rank, 1, sorted.size());
        return sorted[rank - 1];
    }

    double percentile(std::span<const double> data, double p)
    {
        std::vector<double> sorted(data.begin(), data.end());
        std::sort(sorted.begin(), sorted.end());
        return percentile_sorted(sorted, p);
    }

    BoxplotSummary boxplot(std::span<const double> data)
    {
        std::vector<double> sorted(data.begin(), data.end());
        std::sort(sorted.begin(), sorted.end());
        return {percentile_sorted(sorted, 5), percentile_sorted(sorted, 25), percentile_sorted(sorted, 50),
                percentile_sorted(sorted, 75), percentile_sorted(sorted, 95)};
    }

    double mean(std::span<const double> data)
    {
        if (data.empty())
        {
            throw std::invalid_argument("mean: empty data");
        }
        double sum = 0.0;
        for (const double x : data)
        {
            sum += x;
        }
        return sum / static_cast<double>(data.size());
    }
}
