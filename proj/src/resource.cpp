#include "trajsim/resource.hpp"

#include <algorithm>
#include <stdexcept>

namespace trajsim
{
    Resource::Resource(std::string name, std::int64_t capacity, std::optional<std::int64_t> queue_size,
                       bool preemptive, PreemptFate fate)
        : m_name(std::move(name)), m_capacity(capacity), m_queue_size(queue_size), m_preemptive(preemptive),
          m_fate(fate)
    {
        if (capacity < 0)
        {
            throw std::invalid_argument("resource '" + m_name + "': negative capacity");
        }
        if (queue_size && *queue_size < 0)
        {
            throw std::invalid_argument("resource '" + m_name + "': negative queue size");
        }
    }

    bool Resource::has_queue_room() const noexcept
    {
        return !m_queue_size || static_cast<std::int64_t>(m_queued_entries) < *m_queue_size;
    }

    void Resource::grant(ArrivalHandle arrival, std::int64_t amount, int priority, bool preemptible, SimTime now)
    {
        m_in_use += amount;
        for (auto& slot : m_in_service)
        {
            if (slot.arrival == arrival)
            {
                slot.amount += amount;
                return;
            }
        }
        m_in_service.push_back({arrival, amount, priority, preemptible, now, m_grant_order++});
    }

    void Resource::enqueue_back(Waiter w)
    {
        m_queued_amount += w.amount;
        ++m_queued_entries;
        m_queue[w.priority].push_back(w);
    }

    void Resource::requeue_front(const ServiceSlot& victim)
    {
        m_queued_amount += victim.amount;
        ++m_queued_entries;
        m_queue[victim.priority].push_front(
            {victim.arrival, victim.amount, victim.priority, victim.preemptible, victim.since, true});
    }

    RequestOutcome Resource::request(const Request& req)
    {
        if (req.amount < 1)
        {
            throw std::invalid_argument("resource '" + m_name + "': request amount must be >= 1");
        }

        RequestOutcome out;
        const std::int64_t free = m_capacity - m_in_use;
        if (free >= req.amount)
        {
            grant(req.arrival, req.amount, req.priority, req.preemptible, req.now);
            out.kind = OutcomeKind::Granted;
            return out;
        }

        if (m_preemptive)
        {
            std::vector<std::size_t> eligible;
            // `free` is negative while a capacity decrease is still being absorbed.
            std::int64_t reclaimable = free;
            for (std::size_t i = 0; i < m_in_service.size(); ++i)
            {
                const auto& s = m_in_service[i];
                if (s.preemptible && s.priority < req.priority)
                {
                    eligible.push_back(i);
                    reclaimable += s.amount;
                }
            }
            if (!eligible.empty() && reclaimable >= req.amount)
            {
                std::sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
                    const auto& x = m_in_service[a];
                    const auto& y = m_in_service[b];
                    if (x.priority != y.priority)
                    {
                        return x.priority < y.priority;
                    }
                    return x.order > y.order;
                });

                std::vector<ServiceSlot> victims;
                std::int64_t available = free;
                for (const std::size_t idx : eligible)
                {
                    if (available >= req.amount)
                    {
                        break;
                    }
                    victims.push_back(m_in_service[idx]);
                    available += m_in_service[idx].amount;
                }
                for (const auto& v : victims)
                {
                    const auto it = std::find_if(m_in_service.begin(), m_in_service.end(),
                                                 [&](const ServiceSlot& s) { return s.arrival == v.arrival; });
                    m_in_use -= it->amount;
                    m_in_service.erase(it);
                    ++m_preempted;
                    const bool requeue = m_fate == PreemptFate::RequeueHead && has_queue_room();
                    if (requeue)
                    {
                        requeue_front(v);
                    }
                    out.preempted.push_back({v, requeue});
                }
                grant(req.arrival, req.amount, req.priority, req.preemptible, req.now);
                out.kind = OutcomeKind::GrantedByPreemption;
                return out;
            }
        }

        if (has_queue_room())
        {
            enqueue_back({req.arrival, req.amount, req.priority, req.preemptible, req.now, false});
            out.kind = OutcomeKind::Enqueued;
            return out;
        }

        ++m_rejected;
        out.kind = OutcomeKind::Rejected;
        return out;
    }

    void Resource::drain_queue(SimTime now, std::vector<Waiter>& granted)
    {
        while (!m_queue.empty())
        {
            auto level = m_queue.begin();
            auto& dq = level->second;
            const Waiter head = dq.front();
            if (m_capacity - m_in_use < head.amount)
            {
                break;
            }
            dq.pop_front();
            if (dq.empty())
            {
                m_queue.erase(level);
            }
            m_queued_amount -= head.amount;
            --m_queued_entries;
            grant(head.arrival, head.amount, head.priority, head.preemptible, now);
            granted.push_back(head);
        }
    }

    void Resource::release(ArrivalHandle arrival, std::int64_t amount, SimTime now, std::vector<Waiter>& granted)
    {
        const auto it = std::find_if(m_in_service.begin(), m_in_service.end(),
                                     [&](const ServiceSlot& s) { return s.arrival == arrival; });
        if (it == m_in_service.end() || it->amount < amount)
        {
            throw std::logic_error("resource '" + m_name + "': release of " + std::to_string(amount) +
                                   " exceeds held amount " +
                                   std::to_string(it == m_in_service.end() ? 0 : it->amount));
        }
        it->amount -= amount;
        m_in_use -= amount;
        if (it->amount == 0)
        {
            m_in_service.erase(it);
        }
        drain_queue(now, granted);
    }

    void Resource::set_capacity(std::int64_t capacity, SimTime now, std::vector<Waiter>& granted)
    {
        if (capacity < 0)
        {
            throw std::invalid_argument("resource '" + m_name + "': negative capacity " + std::to_string(capacity));
        }
        m_capacity = capacity;
        drain_queue(now, granted);
    }

    bool Resource::cancel(ArrivalHandle arrival)
    {
        for (auto level = m_queue.begin(); level != m_queue.end(); ++level)
        {
            auto& dq = level->second;
            const auto it =
                std::find_if(dq.begin(), dq.end(), [&](const Waiter& w) { return w.arrival == arrival; });
            if (it != dq.end())
            {
                m_queued_amount -= it->amount;
                --m_queued_entries;
                dq.erase(it);
                if (dq.empty())
                {
                    m_queue.erase(level);
                }
                return true;
            }
        }
        return false;
    }

    std::int64_t Resource::held_by(ArrivalHandle arrival) const noexcept
    {
        for (const auto& s : m_in_service)
        {
            if (s.arrival == arrival)
            {
                return s.amount;
            }
        }
        return 0;
    }

    bool Resource::is_queued(ArrivalHandle arrival) const noexcept
    {
        for (const auto& [prio, dq] : m_queue)
        {
            for (const auto& w : dq)
            {
                if (w.arrival == arrival)
                {
                    return true;
                }
            }
        }
        return false;
    }

    void Resource::for_each_queued(const std::function<void(const Waiter&)>& fn) const
    {
        for (const auto& [prio, dq] : m_queue)
        {
            for (const auto& w : dq)
            {
                fn(w);
            }
        }
    }
}
