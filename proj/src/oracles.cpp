#include "trajsim/oracles.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace trajsim::oracles
{
    namespace
    {
        void validate(const TrafficClass& c)
        {
            if (!(c.rate >= 0.0) || !(c.mean_service >= 0.0))
            {
                throw std::invalid_argument("traffic class: negative rate or service time");
            }
            // Small relative slack: E[S]^2 computed in floating point may exceed E[S^2] by an ulp.
            if (c.second_moment < c.mean_service * c.mean_service * (1.0 - 1e-12))
            {
                throw std::invalid_argument("traffic class: E[S^2] < E[S]^2");
            }
        }

        void require_stable(double rho, const char* what)
        {
            if (!(rho < 1.0))
            {
                throw UnstableSystem(std::string(what) + ": load " + std::to_string(rho) + " >= 1");
            }
        }
    }

    TrafficClass TrafficClass::deterministic(double rate, double service, int priority)
    {
        return {rate, service, service * service, priority};
    }

    TrafficClass TrafficClass::exponential(double rate, double mean_service, int priority)
    {
        return {rate, mean_service, 2.0 * mean_service * mean_service, priority};
    }

    double mm1_wq(double lambda, double mu)
    {
        if (!(lambda >= 0.0) || !(mu > 0.0))
        {
            throw std::invalid_argument("mm1_wq: need lambda >= 0 and mu > 0");
        }
        require_stable(lambda / mu, "mm1_wq");
        return lambda / (mu * (mu - lambda));
    }

    double mg1_wq(const TrafficClass& cls)
    {
        validate(cls);
        const double rho = cls.load();
        require_stable(rho, "mg1_wq");
        return cls.rate * cls.second_moment / (2.0 * (1.0 - rho));
    }

    double md1_wq(double lambda, double service)
    {
        if (!(lambda >= 0.0) || !(service >= 0.0))
        {
            throw std::invalid_argument("md1_wq: negative rate or service time");
        }
        const double rho = lambda * service;
        require_stable(rho, "md1_wq");
        return rho * service / (2.0 * (1.0 - rho));
    }

    std::vector<double> hol_priority_wq(std::span<const TrafficClass> classes)
    {
        if (classes.empty())
        {
            throw std::invalid_argument("hol_priority_wq: no classes");
        }
        for (const auto& c : classes)
        {
            validate(c);
        }

        std::vector<std::size_t> order(classes.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return classes[a].priority > classes[b].priority; });

        double residual = 0.0;
        double total = 0.0;
        for (const auto& c : classes)
        {
            residual += 0.5 * c.rate * c.second_moment;
            total += c.load();
        }
        require_stable(total, "hol_priority_wq");

        // sigma_k: cumulative load of all levels with priority >= level k.
        std::vector<double> waits(classes.size());
        double sigma_above = 0.0;
        std::size_t i = 0;
        while (i < order.size())
        {
            std::size_t j = i;
            double level_load = 0.0;
            while (j < order.size() && classes[order[j]].priority == classes[order[i]].priority)
            {
                level_load += classes[order[j]].load();
                ++j;
            }
            const double sigma_here = sigma_above + level_load;
            const double w = residual / ((1.0 - sigma_above) * (1.0 - sigma_here));
            for (std::size_t k = i; k < j; ++k)
            {
                waits[k] = w;
            }
            sigma_above = sigma_here;
            i = j;
        }
        return waits;
    }

    TrafficClass aggregate(std::span<const TrafficClass> classes)
    {
        TrafficClass out;
        double first = 0.0;
        double second = 0.0;
        for (const auto& c : classes)
        {
            validate(c);
            out.rate += c.rate;
            first += c.rate * c.mean_service;
            second += c.rate * c.second_moment;
        }
        if (out.rate > 0.0)
        {
            out.mean_service = first / out.rate;
            out.second_moment = second / out.rate;
        }
        return out;
    }
}
