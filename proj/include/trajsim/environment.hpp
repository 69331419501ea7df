#pragma once

#include "trajsim/monitor.hpp"
#include "trajsim/resource.hpp"
#include "trajsim/rng.hpp"
#include "trajsim/trajectory.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace trajsim
{
    /// Invalid model description, detected while building an environment.
    class ConfigError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Violated precondition while the simulation is running.
    class SimulationError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    inline constexpr SimTime kForever = std::numeric_limits<SimTime>::infinity();

    struct ResourceSpec
    {
        std::string name;
        std::int64_t capacity = 1;
        std::optional<std::int64_t> queue_size; // nullopt: unbounded
        bool preemptive = false;
        PreemptFate preempt_fate = PreemptFate::Drop;
        bool monitor = true;
    };

    struct GeneratorSpec
    {
        std::string name_prefix;
        Trajectory trajectory;
        /// Seconds to the next arrival. Negative or infinite halts the generator;
        /// an empty sampler emits nothing beyond the initial batch.
        Sampler interarrival;
        std::uint64_t initial_batch = 0;
        int priority = 0;
        bool preemptible = true;
        bool restart_on_preempt = true;
        bool monitor = true;
    };

    class Environment;

    /// What a sampler or selector sees when it is evaluated.
    ///
    /// Inside a trajectory this is the running arrival; for interarrival
    /// samplers there is no arrival and only now()/rng()/env() are valid.
    class Context
    {
    public:
        Environment& env() const noexcept { return *m_env; }
        SimTime now() const noexcept;
        RngStream& rng() const noexcept { return *m_rng; }

        bool has_arrival() const noexcept { return m_slot != kNone; }
        std::string name() const;
        std::uint64_t index() const;
        int priority() const;

        /// Attribute value, or `fallback` if never set.
        double attribute(std::string_view key, double fallback = 0.0) const;

        /// Resource picked by the last Select, or nullptr.
        const Resource* selected() const;

    private:
        friend class Environment;
        static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

        Context(Environment* env, std::uint32_t slot, RngStream* rng) : m_env(env), m_slot(slot), m_rng(rng) {}

        Environment* m_env;
        std::uint32_t m_slot;
        RngStream* m_rng;
    };

    /// Simulation clock, event queue and the registry of resources,
    /// generators and signals.
    ///
    /// Events are ordered by (time asc, priority desc, insertion asc). Arrival
    /// activities use event priority 0. Resources must be added before the
    /// generators whose trajectories refer to them.
    class Environment
    {
    public:
        using LogSink = std::function<void(SimTime, const std::string& arrival, const std::string& message)>;

        explicit Environment(std::uint64_t seed = 0, std::int32_t replication = 0);
        ~Environment();
        Environment(Environment&&) noexcept;
        Environment& operator=(Environment&&) noexcept;
        Environment(const Environment&) = delete;
        Environment& operator=(const Environment&) = delete;

        Resource& add_resource(ResourceSpec spec);

        /// Throws ConfigError for a duplicate prefix or a trajectory that names
        /// an unknown resource.
        void add_generator(GeneratorSpec spec);

        /// Throws SimulationError when `at` lies before now().
        std::uint64_t schedule(SimTime at, int priority, std::function<void()> action);

        /// Processes every event strictly before `until`.
        void run(SimTime until = kForever);

        /// Broadcasts `signal` after `delay` seconds.
        void send(std::string_view signal, SimTime delay = 0.0);

        SimTime now() const noexcept;
        std::uint64_t seed() const noexcept;
        std::int32_t replication() const noexcept;
        std::uint64_t events_processed() const noexcept;
        std::uint64_t events_pending() const noexcept;

        bool has_resource(std::string_view name) const;
        Resource& resource(std::string_view name);
        const Resource& resource(std::string_view name) const;

        /// Arrivals emitted so far by the generator with this prefix.
        std::uint64_t generated(std::string_view prefix) const;
        std::size_t arrivals_in_system() const noexcept;

        const MonitorStore& monitor() const noexcept;

        /// Independent stream derived from the environment seed and a tag.
        RngStream stream(std::string_view tag) const;

        void set_log_sink(LogSink sink);

    private:
        friend class Context;
        struct Impl;
        std::unique_ptr<Impl> m_impl;
    };
}
