#include <doctest.h>

#include "trajsim/resource.hpp"
#include "trajsim/rng.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>

using namespace trajsim;

namespace
{
    ArrivalHandle h(std::uint32_t slot) { return {slot, 0}; }

    Request req(std::uint32_t slot, int priority = 0, std::int64_t amount = 1, bool preemptible = true)
    {
        return {h(slot), amount, priority, preemptible, 0.0};
    }
}

TEST_SUITE("resources")
{
    TEST_CASE("idle server grants")
    {
        Resource r("clerk", 1);
        CHECK(r.request(req(0)).kind == OutcomeKind::Granted);
        CHECK(r.server_count() == 1);
    }

    TEST_CASE("full queue rejects")
    {
        Resource r("p", 1, 0);
        CHECK(r.request(req(0)).kind == OutcomeKind::Granted);
        CHECK(r.request(req(1)).kind == OutcomeKind::Rejected);
        CHECK(r.rejected_count() == 1);
        CHECK(r.queue_length() == 0);
    }

    TEST_CASE("preemptive resource evicts lower priority holder")
    {
        Resource r("xpfe", 1, std::nullopt, true, PreemptFate::Drop);
        REQUIRE(r.request(req(0, 0)).kind == OutcomeKind::Granted);
        const auto out = r.request(req(1, 1));
        CHECK(out.kind == OutcomeKind::GrantedByPreemption);
        REQUIRE(out.preempted.size() == 1);
        CHECK(out.preempted[0].victim.arrival == h(0));
        CHECK_FALSE(out.preempted[0].requeued);
        CHECK(r.held_by(h(1)) == 1);
        CHECK(r.held_by(h(0)) == 0);
        CHECK(r.queue_length() == 0);
    }

    TEST_CASE("non-preemptible holder is not evicted")
    {
        Resource r("xpfe", 1, std::nullopt, true);
        REQUIRE(r.request(req(0, 0, 1, false)).kind == OutcomeKind::Granted);
        CHECK(r.request(req(1, 5)).kind == OutcomeKind::Enqueued);
    }

    TEST_CASE("equal priority does not preempt")
    {
        Resource r("xpfe", 1, std::nullopt, true);
        REQUIRE(r.request(req(0, 1)).kind == OutcomeKind::Granted);
        CHECK(r.request(req(1, 1)).kind == OutcomeKind::Enqueued);
    }

    TEST_CASE("requeued victim goes to the front of its level")
    {
        Resource r("x", 1, std::nullopt, true, PreemptFate::RequeueHead);
        REQUIRE(r.request(req(0, 0)).kind == OutcomeKind::Granted);
        REQUIRE(r.request(req(1, 0)).kind == OutcomeKind::Enqueued);
        const auto out = r.request(req(2, 1));
        REQUIRE(out.preempted.size() == 1);
        CHECK(out.preempted[0].requeued);
        std::vector<Waiter> order;
        r.for_each_queued([&](const Waiter& w) { order.push_back(w); });
        REQUIRE(order.size() == 2);
        CHECK(order[0].arrival == h(0));
        CHECK(order[0].preempted);
        CHECK(order[1].arrival == h(1));
    }

    TEST_CASE("victim tie-break takes the latest grant")
    {
        Resource r("x", 2, std::nullopt, true);
        REQUIRE(r.request(req(0, 0)).kind == OutcomeKind::Granted);
        REQUIRE(r.request(req(1, 0)).kind == OutcomeKind::Granted);
        const auto out = r.request(req(2, 3));
        REQUIRE(out.preempted.size() == 1);
        CHECK(out.preempted[0].victim.arrival == h(1));
    }

    TEST_CASE("lowest priority victim first")
    {
        Resource r("x", 2, std::nullopt, true);
        REQUIRE(r.request(req(0, 0)).kind == OutcomeKind::Granted);
        REQUIRE(r.request(req(1, 1)).kind == OutcomeKind::Granted);
        const auto out = r.request(req(2, 3));
        REQUIRE(out.preempted.size() == 1);
        CHECK(out.preempted[0].victim.arrival == h(0));
    }

    TEST_CASE("release hands the server to the waiter")
    {
        Resource r("clerk", 1);
        r.request(req(0));
        r.request(req(1));
        std::vector<Waiter> granted;
        r.release(h(0), 1, 3.0, granted);
        REQUIRE(granted.size() == 1);
        CHECK(granted[0].arrival == h(1));
        CHECK(r.server_count() == 1);
        CHECK(r.queue_count() == 0);
    }

    TEST_CASE("higher priority waiter is served first")
    {
        Resource r("clerk", 1);
        r.request(req(0));
        r.request(req(1, 0));
        r.request(req(2, 1));
        std::vector<Waiter> granted;
        r.release(h(0), 1, 1.0, granted);
        REQUIRE(granted.size() == 1);
        CHECK(granted[0].arrival == h(2));
    }

    TEST_CASE("release with empty queue frees capacity")
    {
        Resource r("clerk", 1);
        r.request(req(0));
        std::vector<Waiter> granted;
        r.release(h(0), 1, 1.0, granted);
        CHECK(granted.empty());
        CHECK(r.server_count() == 0);
    }

    TEST_CASE("over-release is a hard error")
    {
        Resource r("clerk", 2);
        r.request(req(0));
        std::vector<Waiter> granted;
        CHECK_THROWS_AS(r.release(h(0), 2, 0.0, granted), std::logic_error);
        CHECK_THROWS_AS(r.release(h(9), 1, 0.0, granted), std::logic_error);
    }

    TEST_CASE("capacity increase grants exactly the new room")
    {
        Resource r("onu", 0);
        for (std::uint32_t i = 0; i < 5; ++i)
        {
            REQUIRE(r.request(req(i)).kind == OutcomeKind::Enqueued);
        }
        std::vector<Waiter> granted;
        r.set_capacity(3, 1.0, granted);
        CHECK(granted.size() == 3);
        CHECK(r.server_count() == 3);
        CHECK(r.queue_count() == 2);
    }

    TEST_CASE("capacity decrease does not interrupt holders")
    {
        Resource r("onu", 3);
        r.request(req(0));
        r.request(req(1));
        std::vector<Waiter> granted;
        r.set_capacity(0, 1.0, granted);
        CHECK(r.server_count() == 2);
        CHECK(r.request(req(2)).kind == OutcomeKind::Enqueued);
        r.release(h(0), 1, 2.0, granted);
        r.release(h(1), 1, 2.0, granted);
        CHECK(granted.empty());
        CHECK(r.server_count() == 0);
        r.set_capacity(1, 3.0, granted);
        CHECK(granted.size() == 1);
    }

    TEST_CASE("negative capacity and invalid requests")
    {
        Resource r("x", 1);
        std::vector<Waiter> granted;
        CHECK_THROWS_AS(r.set_capacity(-1, 0.0, granted), std::invalid_argument);
        CHECK_THROWS_AS(r.request(req(0, 0, 0)), std::invalid_argument);
        CHECK_THROWS_AS(Resource("y", -1), std::invalid_argument);
    }

    TEST_CASE("random operation sequences keep the invariants")
    {
        for (const bool preemptive : {false, true})
        {
            for (std::uint64_t seed = 1; seed <= 40; ++seed)
            {
                RngStream s(seed, preemptive ? 2 : 1);
                const std::optional<std::int64_t> qsize =
                    s.uniform_below(2) == 0 ? std::nullopt : std::optional<std::int64_t>(s.uniform_below(4));
                Resource r("r", static_cast<std::int64_t>(s.uniform_below(3)), qsize, preemptive,
                           s.uniform_below(2) == 0 ? PreemptFate::Drop : PreemptFate::RequeueHead);
                std::map<std::uint32_t, int> priority_of;
                std::uint32_t next = 0;
                std::int64_t max_capacity = r.capacity();
                bool deficit = false; // a capacity cut left holders above capacity
                std::vector<Waiter> granted;
                for (int step = 0; step < 400; ++step)
                {
                    const auto op = s.uniform_below(10);
                    if (op < 5)
                    {
                        const int prio = static_cast<int>(s.uniform_below(3));
                        const auto id = next++;
                        priority_of[id] = prio;
                        const auto before = r.in_service();
                        const auto out = r.request(req(id, prio));
                        if (!preemptive)
                        {
                            // A granted request is never evicted without preemption.
                            for (const auto& slot : before)
                            {
                                REQUIRE(r.held_by(slot.arrival) == slot.amount);
                            }
                            REQUIRE(out.preempted.empty());
                        }
                        for (const auto& p : out.preempted)
                        {
                            REQUIRE(p.victim.priority < prio);
                        }
                    }
                    else if (op < 8 && !r.in_service().empty())
                    {
                        const auto& slots = r.in_service();
                        const auto victim = slots[s.uniform_below(slots.size())];
                        granted.clear();
                        r.release(victim.arrival, victim.amount, 0.0, granted);
                    }
                    else
                    {
                        const auto cap = static_cast<std::int64_t>(s.uniform_below(4));
                        max_capacity = std::max(max_capacity, cap);
                        granted.clear();
                        r.set_capacity(cap, 0.0, granted);
                        deficit = deficit || r.server_count() > r.capacity();
                    }

                    REQUIRE(r.server_count() <= max_capacity);
                    if (qsize)
                    {
                        REQUIRE(static_cast<std::int64_t>(r.queue_length()) <= *qsize);
                    }
                    // Work conservation: nobody waits while a unit is free.
                    if (r.queue_length() > 0)
                    {
                        REQUIRE(r.server_count() >= r.capacity());
                    }
                    // Queue order: priority desc.
                    int last = std::numeric_limits<int>::max();
                    r.for_each_queued([&](const Waiter& w) {
                        REQUIRE(w.priority <= last);
                        last = w.priority;
                    });
                    if (preemptive && !deficit && r.queue_length() > 0)
                    {
                        // No waiter outranks every preemptible holder.
                        int lowest_holder = std::numeric_limits<int>::max();
                        for (const auto& slot : r.in_service())
                        {
                            lowest_holder = std::min(lowest_holder, slot.priority);
                        }
                        int top_waiter = std::numeric_limits<int>::min();
                        r.for_each_queued([&](const Waiter& w) { top_waiter = std::max(top_waiter, w.priority); });
                        if (!r.in_service().empty() && r.capacity() > 0)
                        {
                            REQUIRE(top_waiter <= lowest_holder);
                        }
                    }
                }
            }
        }
    }
}
