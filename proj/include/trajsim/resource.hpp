#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace trajsim
{
    using SimTime = double;

    /// Opaque reference to an arrival: a slot plus a generation counter so a
    /// recycled slot never aliases an arrival that already left.
    struct ArrivalHandle
    {
        std::uint32_t slot = 0;
        std::uint32_t generation = 0;

        friend bool operator==(const ArrivalHandle&, const ArrivalHandle&) = default;
    };

    enum class PreemptFate
    {
        Drop,
        RequeueHead,
    };

    enum class OutcomeKind
    {
        Granted,
        Enqueued,
        Rejected,
        GrantedByPreemption,
    };

    /// One arrival's share of the servers.
    struct ServiceSlot
    {
        ArrivalHandle arrival;
        std::int64_t amount = 0;
        int priority = 0;
        bool preemptible = true;
        SimTime since = 0.0;
        std::uint64_t order = 0; // grant order, breaks victim ties (latest first)
    };

    struct Waiter
    {
        ArrivalHandle arrival;
        std::int64_t amount = 0;
        int priority = 0;
        bool preemptible = true;
        SimTime since = 0.0;
        bool preempted = false; // came back to the queue after being preempted
    };

    struct Request
    {
        ArrivalHandle arrival;
        std::int64_t amount = 1;
        int priority = 0;
        bool preemptible = true;
        SimTime now = 0.0;
    };

    struct Preemption
    {
        ServiceSlot victim;
        bool requeued = false; // false: the victim lost its service and must be dropped
    };

    struct RequestOutcome
    {
        OutcomeKind kind = OutcomeKind::Rejected;
        std::vector<Preemption> preempted; // non-empty only for GrantedByPreemption
    };

    /// Server pool with dynamic capacity and a priority queue.
    ///
    /// Queue order is (priority desc, arrival order asc). Preemptive pools evict
    /// in-service preemptible holders of strictly lower priority, lowest priority
    /// first and, among equals, the latest granted first. Capacity decreases
    /// never interrupt holders; the deficit is absorbed as they release.
    class Resource
    {
    public:
        Resource(std::string name, std::int64_t capacity, std::optional<std::int64_t> queue_size = std::nullopt,
                 bool preemptive = false, PreemptFate fate = PreemptFate::Drop);

        const std::string& name() const noexcept { return m_name; }

        RequestOutcome request(const Request& req);

        /// Frees `amount` units held by `arrival` and appends newly granted
        /// waiters to `granted`. Throws when releasing more than held.
        void release(ArrivalHandle arrival, std::int64_t amount, SimTime now, std::vector<Waiter>& granted);

        /// Throws on negative capacity. Increases grant waiters immediately.
        void set_capacity(std::int64_t capacity, SimTime now, std::vector<Waiter>& granted);

        /// Removes a waiting request; false if the arrival was not queued here.
        bool cancel(ArrivalHandle arrival);

        std::int64_t held_by(ArrivalHandle arrival) const noexcept;
        bool is_queued(ArrivalHandle arrival) const noexcept;

        std::int64_t capacity() const noexcept { return m_capacity; }
        std::optional<std::int64_t> queue_size() const noexcept { return m_queue_size; }
        bool preemptive() const noexcept { return m_preemptive; }
        PreemptFate preempt_fate() const noexcept { return m_fate; }

        std::int64_t server_count() const noexcept { return m_in_use; }
        std::int64_t queue_count() const noexcept { return m_queued_amount; }
        std::size_t queue_length() const noexcept { return m_queued_entries; }

        std::uint64_t rejected_count() const noexcept { return m_rejected; }
        std::uint64_t preempted_count() const noexcept { return m_preempted; }

        const std::vector<ServiceSlot>& in_service() const noexcept { return m_in_service; }

        /// Visits queued requests in service order.
        void for_each_queued(const std::function<void(const Waiter&)>& fn) const;

    private:
        bool has_queue_room() const noexcept;
        void requeue_front(const ServiceSlot& victim);
        void enqueue_back(Waiter w);
        void grant(ArrivalHandle arrival, std::int64_t amount, int priority, bool preemptible, SimTime now);
        void drain_queue(SimTime now, std::vector<Waiter>& granted);

        std::string m_name;
        std::int64_t m_capacity;
        std::optional<std::int64_t> m_queue_size;
        bool m_preemptive;
        PreemptFate m_fate;

        std::vector<ServiceSlot> m_in_service;
        std::int64_t m_in_use = 0;

        std::map<int, std::deque<Waiter>, std::greater<>> m_queue;
        std::int64_t m_queued_amount = 0;
        std::size_t m_queued_entries = 0;

        std::uint64_t m_grant_order = 0;
        std::uint64_t m_rejected = 0;
        std::uint64_t m_preempted = 0;
    };
}
