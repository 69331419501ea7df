#pragma once

#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace trajsim
{
    using SimTime = double;

    class Context;

    /// Produces a real value when an activity executes (durations, attribute values, capacities).
    using Sampler = std::function<double(Context&)>;

    /// Picks a branch: 0 skips the branch activity, k >= 1 enters sub-trajectory k.
    using Selector = std::function<std::size_t(Context&)>;

    /// A constant or a sampler; lets builder calls take either `0.5` or a lambda.
    class Param
    {
    public:
        Param(double constant) // NOLINT(google-explicit-constructor)
            : m_constant(constant)
        {
        }

        template <typename F>
            requires(std::invocable<F&, Context&> && !std::convertible_to<F, double>)
        Param(F fn) // NOLINT(google-explicit-constructor)
            : m_fn(std::move(fn))
        {
        }

        bool is_constant() const noexcept { return !m_fn; }
        double constant() const noexcept { return m_constant; }
        double operator()(Context& ctx) const { return m_fn ? m_fn(ctx) : m_constant; }

    private:
        double m_constant = 0.0;
        Sampler m_fn;
    };

    class Trajectory;
    using TrajectoryPtr = std::shared_ptr<const Trajectory>;

    enum class CapacityMode
    {
        Absolute,
        Delta,
    };

    enum class SelectPolicy
    {
        Random,
        RoundRobin,
    };

    /// Optional follow-up paths of a seize. `continue_*` decides whether the
    /// arrival resumes the parent trajectory after the sub-trajectory ends.
    struct SeizePaths
    {
        TrajectoryPtr on_success;
        TrajectoryPtr on_reject;
        bool continue_success = true;
        bool continue_reject = true;
    };

    inline constexpr std::uint64_t kRepeatForever = std::numeric_limits<std::uint64_t>::max();

    namespace activity
    {
        struct Timeout
        {
            Param duration;
        };
        struct Seize
        {
            std::string resource;
            std::int64_t amount = 1;
            SeizePaths paths;
        };
        struct Release
        {
            std::string resource;
            std::int64_t amount = 1;
        };
        /// Empty resource name targets the arrival's selected resource.
        struct SetCapacity
        {
            std::string resource;
            Param value;
            CapacityMode mode = CapacityMode::Absolute;
        };
        struct SetAttribute
        {
            std::string key;
            Param value;
        };
        struct SetPrioritization
        {
            int priority = 0;
            bool preemptible = true;
            bool restart_on_preempt = true;
        };
        struct Rollback
        {
            std::size_t steps = 1;
            std::uint64_t repetitions = kRepeatForever;
        };
        struct Branch
        {
            Selector selector;
            std::vector<TrajectoryPtr> paths;
            std::vector<bool> continue_after;
        };
        struct Select
        {
            std::vector<std::string> resources;
            SelectPolicy policy = SelectPolicy::Random;
        };
        struct SeizeSelected
        {
            std::int64_t amount = 1;
            SeizePaths paths;
        };
        struct ReleaseSelected
        {
            std::int64_t amount = 1;
        };
        struct Trap
        {
            std::string signal;
        };
        struct WaitSignal
        {
        };
        struct Send
        {
            std::string signal;
            Param delay;
        };
        struct Log
        {
            std::string message;
        };
    }

    using Activity = std::variant<activity::Timeout, activity::Seize, activity::Release, activity::SetCapacity,
                                  activity::SetAttribute, activity::SetPrioritization, activity::Rollback,
                                  activity::Branch, activity::Select, activity::SeizeSelected,
                                  activity::ReleaseSelected, activity::Trap, activity::WaitSignal, activity::Send,
                                  activity::Log>;

    /// Ordered program of activities followed by every arrival attached to it.
    ///
    /// A Trajectory is a plain description; resource and signal names are
    /// resolved when it is attached to an Environment through a generator.
    class Trajectory
    {
    public:
        explicit Trajectory(std::string name = "anonymous") : m_name(std::move(name)) {}

        Trajectory& timeout(Param duration);
        Trajectory& seize(std::string resource, std::int64_t amount = 1, SeizePaths paths = {});
        Trajectory& release(std::string resource, std::int64_t amount = 1);
        Trajectory& set_capacity(std::string resource, Param value, CapacityMode mode = CapacityMode::Absolute);
        Trajectory& set_capacity_selected(Param value, CapacityMode mode = CapacityMode::Absolute);
        Trajectory& set_attribute(std::string key, Param value);
        Trajectory& set_prioritization(int priority, bool preemptible = true, bool restart_on_preempt = true);
        Trajectory& rollback(std::size_t steps, std::uint64_t repetitions = kRepeatForever);
        Trajectory& branch(Selector selector, std::vector<Trajectory> paths, std::vector<bool> continue_after = {});
        Trajectory& select(std::vector<std::string> resources, SelectPolicy policy = SelectPolicy::Random);
        Trajectory& seize_selected(std::int64_t amount = 1, SeizePaths paths = {});
        Trajectory& release_selected(std::int64_t amount = 1);
        Trajectory& trap(std::string signal);
        Trajectory& wait();
        Trajectory& send(std::string signal, Param delay = 0.0);
        Trajectory& log(std::string message);

        /// Appends every activity of `other` in order.
        Trajectory& join(const Trajectory& other);

        const std::string& name() const noexcept { return m_name; }
        const std::vector<Activity>& activities() const noexcept { return m_activities; }
        std::size_t size() const noexcept { return m_activities.size(); }

    private:
        std::string m_name;
        std::vector<Activity> m_activities;
    };

    /// Convenience for SeizePaths construction from values.
    SeizePaths seize_paths(std::optional<Trajectory> on_success, std::optional<Trajectory> on_reject,
                           bool continue_success = true, bool continue_reject = true);
}
