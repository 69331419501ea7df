#include "trajsim/trajectory.hpp"

#include <stdexcept>

namespace trajsim
{
    namespace
    {
        void require_positive(std::int64_t amount, const char* what)
        {
            if (amount < 1)
            {
                throw std::invalid_argument(std::string(what) + ": amount must be >= 1");
            }
        }
    }

    Trajectory& Trajectory::timeout(Param duration)
    {
        m_activities.emplace_back(activity::Timeout{std::move(duration)});
        return *this;
    }

    Trajectory& Trajectory::seize(std::string resource, std::int64_t amount, SeizePaths paths)
    {
        require_positive(amount, "seize");
        m_activities.emplace_back(activity::Seize{std::move(resource), amount, std::move(paths)});
        return *this;
    }

    Trajectory& Trajectory::release(std::string resource, std::int64_t amount)
    {
        require_positive(amount, "release");
        m_activities.emplace_back(activity::Release{std::move(resource), amount});
        return *this;
    }

    Trajectory& Trajectory::set_capacity(std::string resource, Param value, CapacityMode mode)
    {
        if (resource.empty())
        {
            throw std::invalid_argument("set_capacity: empty resource name (use set_capacity_selected)");
        }
        m_activities.emplace_back(activity::SetCapacity{std::move(resource), std::move(value), mode});
        return *this;
    }

    Trajectory& Trajectory::set_capacity_selected(Param value, CapacityMode mode)
    {
        m_activities.emplace_back(activity::SetCapacity{std::string{}, std::move(value), mode});
        return *this;
    }

    Trajectory& Trajectory::set_attribute(std::string key, Param value)
    {
        m_activities.emplace_back(activity::SetAttribute{std::move(key), std::move(value)});
        return *this;
    }

    Trajectory& Trajectory::set_prioritization(int priority, bool preemptible, bool restart_on_preempt)
    {
        m_activities.emplace_back(activity::SetPrioritization{priority, preemptible, restart_on_preempt});
        return *this;
    }

    Trajectory& Trajectory::rollback(std::size_t steps, std::uint64_t repetitions)
    {
        if (steps == 0)
        {
            throw std::invalid_argument("rollback: steps must be >= 1");
        }
        m_activities.emplace_back(activity::Rollback{steps, repetitions});
        return *this;
    }

    Trajectory& Trajectory::branch(Selector selector, std::vector<Trajectory> paths, std::vector<bool> continue_after)
    {
        if (!selector)
        {
            throw std::invalid_argument("branch: empty selector");
        }
        if (paths.empty())
        {
            throw std::invalid_argument("branch: no sub-trajectories");
        }
        if (continue_after.empty())
        {
            continue_after.assign(paths.size(), true);
        }
        if (continue_after.size() != paths.size())
        {
            throw std::invalid_argument("branch: continue flags do not match sub-trajectories");
        }
        activity::Branch b{std::move(selector), {}, std::move(continue_after)};
        b.paths.reserve(paths.size());
        for (auto& p : paths)
        {
            b.paths.push_back(std::make_shared<const Trajectory>(std::move(p)));
        }
        m_activities.emplace_back(std::move(b));
        return *this;
    }

    Trajectory& Trajectory::select(std::vector<std::string> resources, SelectPolicy policy)
    {
        if (resources.empty())
        {
            throw std::invalid_argument("select: empty resource list");
        }
        m_activities.emplace_back(activity::Select{std::move(resources), policy});
        return *this;
    }

    Trajectory& Trajectory::seize_selected(std::int64_t amount, SeizePaths paths)
    {
        require_positive(amount, "seize_selected");
        m_activities.emplace_back(activity::SeizeSelected{amount, std::move(paths)});
        return *this;
    }

    Trajectory& Trajectory::release_selected(std::int64_t amount)
    {
        require_positive(amount, "release_selected");
        m_activities.emplace_back(activity::ReleaseSelected{amount});
        return *this;
    }

    Trajectory& Trajectory::trap(std::string signal)
    {
        m_activities.emplace_back(activity::Trap{std::move(signal)});
        return *this;
    }

    Trajectory& Trajectory::wait()
    {
        m_activities.emplace_back(activity::WaitSignal{});
        return *this;
    }

    Trajectory& Trajectory::send(std::string signal, Param delay)
    {
        m_activities.emplace_back(activity::Send{std::move(signal), std::move(delay)});
        return *this;
    }

    Trajectory& Trajectory::log(std::string message)
    {
        m_activities.emplace_back(activity::Log{std::move(message)});
        return *this;
    }

    Trajectory& Trajectory::join(const Trajectory& other)
    {
        m_activities.insert(m_activities.end(), other.m_activities.begin(), other.m_activities.end());
        return *this;
    }

    SeizePaths seize_paths(std::optional<Trajectory> on_success, std::optional<Trajectory> on_reject,
                           bool continue_success, bool continue_reject)
    {
        SeizePaths p;
        if (on_success)
        {
            p.on_success = std::make_shared<const Trajectory>(std::move(*on_success));
        }
        if (on_reject)
        {
            p.on_reject = std::make_shared<const Trajectory>(std::move(*on_reject));
        }
        p.continue_success = continue_success;
        p.continue_reject = continue_reject;
        return p;
    }
}
