#include "trajsim/environment.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>
#include <variant>

namespace trajsim
{
    namespace
    {
        // Activities executed at one instant without blocking before we call it a livelock.
        constexpr std::uint64_t kMaxInstantOps = 50'000'000;

        template <class... Ts>
        struct Overloaded : Ts...
        {
            using Ts::operator()...;
        };
        template <class... Ts>
        Overloaded(Ts...) -> Overloaded<Ts...>;

        enum class EventKind : std::uint8_t
        {
            Resume,
            Emit,
            Deliver,
            Callback,
        };

        struct Event
        {
            SimTime time;
            std::uint64_t seq;
            std::uint64_t token;
            int priority;
            std::uint32_t target;
            EventKind kind;
        };

        struct Later
        {
            bool operator()(const Event& a, const Event& b) const noexcept
            {
                if (a.time != b.time)
                {
                    return a.time > b.time;
                }
                if (a.priority != b.priority)
                {
                    return a.priority < b.priority;
                }
                return a.seq > b.seq;
            }
        };

        struct Program;
        using ProgramPtr = std::shared_ptr<Program>;

        /// Names resolved to indices for one activity.
        struct Step
        {
            std::int32_t resource = -1;
            std::vector<std::int32_t> candidates;
            std::int32_t signal = -1;
            std::uint32_t key = 0;
            ProgramPtr success;
            ProgramPtr reject;
            std::vector<ProgramPtr> paths;
            std::optional<RngStream> select_rng;
            std::size_t rr_next = 0;
        };

        struct Program
        {
            TrajectoryPtr source;
            std::vector<Step> steps;
        };

        struct Frame
        {
            Program* program;
            std::size_t pc;
            bool continue_after;
        };

        struct Visit
        {
            std::int32_t resource;
            SimTime start;
            SimTime activity;
            bool held;
        };

        enum class Wait : std::uint8_t
        {
            None,
            Ready,
            Timeout,
            Queue,
            Signal,
        };

        struct RollbackCount
        {
            const Program* program;
            std::size_t pc;
            std::uint64_t done;
        };

        struct ArrivalState
        {
            std::uint32_t generation = 0;
            bool alive = false;
            std::uint32_t generator = 0;
            std::uint64_t index = 0;
            SimTime start = 0.0;
            SimTime activity = 0.0;
            int priority = 0;
            bool preemptible = true;
            bool restart = true;

            std::vector<Frame> frames;
            std::vector<std::pair<std::uint32_t, double>> attributes;
            std::vector<Visit> visits;
            std::vector<RollbackCount> rollbacks;
            std::vector<std::int32_t> traps;
            std::int32_t selected = -1;

            Wait wait = Wait::None;
            std::uint64_t token = 0;
            SimTime timeout_started = 0.0;
            SimTime timeout_end = 0.0;
            SimTime residual = 0.0;
            Program* pending_program = nullptr;
            bool pending_continue = true;
        };

        struct GeneratorState
        {
            std::string prefix;
            std::uint32_t source = 0;
            ProgramPtr program;
            Sampler interarrival;
            RngStream ia;
            RngStream act;
            std::uint64_t initial_batch = 0;
            int priority = 0;
            bool preemptible = true;
            bool restart = true;
            bool monitor = true;
            std::uint64_t count = 0;
        };

        struct ResourceState
        {
            std::unique_ptr<Resource> resource;
            std::uint32_t store_id = 0;
            bool monitor = true;
        };

        struct SignalState
        {
            std::string name;
            std::vector<ArrivalHandle> subscribers;
        };

        // Event token marking the t=0 batch of a generator.
        constexpr std::uint64_t kBatchToken = 1;
    }

    struct Environment::Impl
    {
        Environment* owner = nullptr;
        std::uint64_t seed = 0;
        std::int32_t replication = 0;

        SimTime now = 0.0;
        std::uint64_t next_seq = 0;
        std::uint64_t next_token = 1;
        std::uint64_t processed = 0;
        std::priority_queue<Event, std::vector<Event>, Later> events;

        std::vector<ResourceState> resources;
        std::unordered_map<std::string, std::int32_t> resource_ids;
        std::vector<GeneratorState> generators;
        std::unordered_map<std::string, std::uint32_t> generator_ids;
        std::vector<SignalState> signals;
        std::unordered_map<std::string, std::int32_t> signal_ids;

        std::vector<ArrivalState> arrivals;
        std::vector<std::uint32_t> free_slots;
        std::size_t alive = 0;

        std::vector<std::function<void()>> callbacks;
        std::vector<std::uint32_t> free_callbacks;

        std::vector<Waiter> granted_scratch;
        MonitorStore store;
        LogSink log_sink;

        // -- build ---------------------------------------------------------

        std::int32_t signal_id(std::string_view name)
        {
            const std::string key(name);
            if (const auto it = signal_ids.find(key); it != signal_ids.end())
            {
                return it->second;
            }
            const auto id = static_cast<std::int32_t>(signals.size());
            signals.push_back({key, {}});
            signal_ids.emplace(key, id);
            return id;
        }

        std::int32_t resolve_resource(const std::string& name, const std::string& where)
        {
            const auto it = resource_ids.find(name);
            if (it == resource_ids.end())
            {
                throw ConfigError(where + ": unknown resource '" + name + "'");
            }
            return it->second;
        }

        ProgramPtr compile(const TrajectoryPtr& traj, const std::string& prefix, std::size_t& select_ordinal)
        {
            auto prog = std::make_shared<Program>();
            prog->source = traj;
            prog->steps.resize(traj->size());
            const auto& acts = traj->activities();
            for (std::size_t i = 0; i < acts.size(); ++i)
            {
                Step& step = prog->steps[i];
                const std::string where =
                    "generator '" + prefix + "', trajectory '" + traj->name() + "', activity " + std::to_string(i);
                const auto sub = [&](const TrajectoryPtr& t) -> ProgramPtr {
                    return t ? compile(t, prefix, select_ordinal) : nullptr;
                };
                std::visit(Overloaded{
                               [&](const activity::Seize& a) {
                                   step.resource = resolve_resource(a.resource, where);
                                   step.success = sub(a.paths.on_success);
                                   step.reject = sub(a.paths.on_reject);
                               },
                               [&](const activity::SeizeSelected& a) {
                                   step.success = sub(a.paths.on_success);
                                   step.reject = sub(a.paths.on_reject);
                               },
                               [&](const activity::Release& a) { step.resource = resolve_resource(a.resource, where); },
                               [&](const activity::SetCapacity& a) {
                                   if (!a.resource.empty())
                                   {
                                       step.resource = resolve_resource(a.resource, where);
                                   }
                               },
                               [&](const activity::SetAttribute& a) { step.key = store.intern_key(a.key); },
                               [&](const activity::Branch& a) {
                                   for (const auto& p : a.paths)
                                   {
                                       step.paths.push_back(sub(p));
                                   }
                               },
                               [&](const activity::Select& a) {
                                   for (const auto& r : a.resources)
                                   {
                                       step.candidates.push_back(resolve_resource(r, where));
                                   }
                                   if (a.policy == SelectPolicy::Random)
                                   {
                                       step.select_rng.emplace(
                                           seed, stream_id_for("select:" + prefix + ":" + std::to_string(select_ordinal)));
                                   }
                                   ++select_ordinal;
                               },
                               [&](const activity::Trap& a) { step.signal = signal_id(a.signal); },
                               [&](const activity::Send& a) { step.signal = signal_id(a.signal); },
                               [](const auto&) {},
                           },
                           acts[i]);
            }
            return prog;
        }

        // -- events --------------------------------------------------------

        void push(SimTime at, int priority, EventKind kind, std::uint32_t target, std::uint64_t token)
        {
            events.push({at, next_seq++, token, priority, target, kind});
        }

        void schedule_resume(std::uint32_t slot, SimTime at)
        {
            auto& a = arrivals[slot];
            a.token = next_token++;
            push(at, 0, EventKind::Resume, slot, a.token);
        }

        ArrivalHandle handle(std::uint32_t slot) const { return {slot, arrivals[slot].generation}; }

        bool is_alive(ArrivalHandle h) const
        {
            return h.slot < arrivals.size() && arrivals[h.slot].alive && arrivals[h.slot].generation == h.generation;
        }

        // -- monitoring ----------------------------------------------------

        void record_resource(std::int32_t rid)
        {
            const auto& rs = resources[static_cast<std::size_t>(rid)];
            if (!rs.monitor)
            {
                return;
            }
            const Resource& r = *rs.resource;
            ResourceRecord rec;
            rec.resource = rs.store_id;
            rec.time = now;
            rec.server = r.server_count();
            rec.queue = r.queue_count();
            rec.capacity = r.capacity();
            rec.queue_size = r.queue_size() ? *r.queue_size() : kUnboundedQueue;
            rec.replication = replication;
            store.add(rec);
        }

        ArrivalRecord arrival_record(const ArrivalState& a, SimTime activity, bool finished,
                                     std::int32_t resource, SimTime start) const
        {
            ArrivalRecord rec;
            rec.source = generators[a.generator].source;
            rec.index = a.index;
            rec.start_time = start;
            rec.end_time = now;
            rec.activity_time = std::min(activity, now - start);
            rec.finished = finished;
            rec.resource = resource < 0 ? kLifecycle : static_cast<std::int32_t>(resources[resource].store_id);
            rec.replication = replication;
            return rec;
        }

        bool monitored(const ArrivalState& a) const { return generators[a.generator].monitor; }

        // -- arrivals ------------------------------------------------------

        std::uint32_t create_arrival(std::uint32_t gen_id)
        {
            std::uint32_t slot;
            if (!free_slots.empty())
            {
                slot = free_slots.back();
                free_slots.pop_back();
            }
            else
            {
                slot = static_cast<std::uint32_t>(arrivals.size());
                arrivals.emplace_back();
            }
            auto& g = generators[gen_id];
            auto& a = arrivals[slot];
            a.alive = true;
            a.generator = gen_id;
            a.index = g.count++;
            a.start = now;
            a.activity = 0.0;
            a.priority = g.priority;
            a.preemptible = g.preemptible;
            a.restart = g.restart;
            a.frames.assign(1, Frame{g.program.get(), 0, true});
            a.attributes.clear();
            a.visits.clear();
            a.rollbacks.clear();
            a.traps.clear();
            a.selected = -1;
            a.wait = Wait::None;
            a.token = 0; // no event carries token 0, so stale resumes of the slot's last owner miss
            a.pending_program = nullptr;
            ++alive;
            return slot;
        }

        Visit* find_visit(ArrivalState& a, std::int32_t rid)
        {
            for (auto& v : a.visits)
            {
                if (v.resource == rid)
                {
                    return &v;
                }
            }
            return nullptr;
        }

        void close_visit(std::uint32_t slot, std::int32_t rid, bool finished)
        {
            auto& a = arrivals[slot];
            const auto it =
                std::find_if(a.visits.begin(), a.visits.end(), [&](const Visit& v) { return v.resource == rid; });
            if (it == a.visits.end())
            {
                return;
            }
            if (monitored(a))
            {
                store.add(arrival_record(a, it->activity, finished, rid, it->start));
            }
            a.visits.erase(it);
        }

        /// Books the time spent in the current timeout up to now.
        void account_timeout(ArrivalState& a)
        {
            const SimTime dt = now - a.timeout_started;
            a.activity += dt;
            for (auto& v : a.visits)
            {
                if (v.held)
                {
                    v.activity += dt;
                }
            }
            a.timeout_started = now;
        }

        void grant_waiters(std::int32_t rid)
        {
            // on_granted only schedules events, so the scratch buffer is not re-entered.
            std::vector<Waiter> granted;
            granted.swap(granted_scratch);
            for (const auto& w : granted)
            {
                on_granted(w, rid);
            }
            granted.clear();
            granted_scratch.swap(granted);
        }

        void on_granted(const Waiter& w, std::int32_t rid)
        {
            if (!is_alive(w.arrival))
            {
                throw SimulationError("resource '" + resources[rid].resource->name() + "' granted a departed arrival");
            }
            const auto slot = w.arrival.slot;
            auto& a = arrivals[slot];
            if (Visit* v = find_visit(a, rid))
            {
                v->held = true;
            }
            if (w.preempted && !a.restart)
            {
                a.wait = Wait::Timeout;
                a.timeout_started = now;
                a.timeout_end = now + a.residual;
                schedule_resume(slot, a.timeout_end);
                return;
            }
            if (!w.preempted && a.pending_program)
            {
                a.frames.push_back({a.pending_program, 0, a.pending_continue});
            }
            a.pending_program = nullptr;
            a.wait = Wait::Ready;
            schedule_resume(slot, now);
        }

        void release_all(std::uint32_t slot, bool finished)
        {
            auto& a = arrivals[slot];
            const ArrivalHandle h = handle(slot);
            while (!a.visits.empty())
            {
                const std::int32_t rid = a.visits.back().resource;
                Resource& r = *resources[rid].resource;
                if (a.visits.back().held)
                {
                    const auto amount = r.held_by(h);
                    close_visit(slot, rid, finished);
                    if (amount > 0)
                    {
                        granted_scratch.clear();
                        r.release(h, amount, now, granted_scratch);
                        record_resource(rid);
                        grant_waiters(rid);
                    }
                }
                else
                {
                    close_visit(slot, rid, false);
                    if (r.cancel(h))
                    {
                        record_resource(rid);
                    }
                }
            }
        }

        void finish(std::uint32_t slot, bool finished)
        {
            auto& a = arrivals[slot];
            if (a.wait == Wait::Timeout)
            {
                account_timeout(a);
            }
            release_all(slot, finished);
            if (monitored(a))
            {
                store.add(arrival_record(a, a.activity, finished, -1, a.start));
            }
            a.alive = false;
            ++a.generation;
            a.wait = Wait::None;
            a.token = 0;
            a.frames.clear();
            --alive;
            free_slots.push_back(slot);
        }

        void preempt(const Preemption& p, std::int32_t rid)
        {
            const auto slot = p.victim.arrival.slot;
            if (!is_alive(p.victim.arrival))
            {
                return;
            }
            auto& v = arrivals[slot];
            if (!p.requeued)
            {
                // The victim no longer holds rid; its visit closes unfinished with the rest.
                finish(slot, false);
                return;
            }
            if (v.wait != Wait::Timeout)
            {
                throw SimulationError("arrival '" + store.arrival_name(generators[v.generator].source, v.index) +
                                      "' preempted from '" + resources[rid].resource->name() +
                                      "' outside a timeout; only timeouts can be requeued");
            }
            account_timeout(v);
            if (Visit* vis = find_visit(v, rid))
            {
                vis->held = false;
            }
            v.residual = v.timeout_end - now;
            if (v.restart)
            {
                v.frames.back().pc -= 1;
            }
            v.token = next_token++; // invalidates the pending timeout resume
            v.wait = Wait::Queue;
        }

        /// Returns true when the arrival may continue with its next activity.
        bool seize(std::uint32_t slot, std::int32_t rid, std::int64_t amount, const Step& step,
                   const SeizePaths& paths)
        {
            Resource& r = *resources[rid].resource;
            auto& a = arrivals[slot];
            Frame& f = a.frames.back();
            const auto out = r.request({handle(slot), amount, a.priority, a.preemptible, now});
            switch (out.kind)
            {
            case OutcomeKind::Granted:
            case OutcomeKind::GrantedByPreemption: {
                if (Visit* v = find_visit(a, rid))
                {
                    v->held = true;
                }
                else
                {
                    a.visits.push_back({rid, now, 0.0, true});
                }
                ++f.pc;
                if (step.success)
                {
                    a.frames.push_back({step.success.get(), 0, paths.continue_success});
                }
                for (const auto& p : out.preempted)
                {
                    preempt(p, rid);
                }
                record_resource(rid);
                return true;
            }
            case OutcomeKind::Enqueued:
                if (!find_visit(a, rid))
                {
                    a.visits.push_back({rid, now, 0.0, false});
                }
                ++f.pc;
                a.wait = Wait::Queue;
                a.pending_program = step.success.get();
                a.pending_continue = paths.continue_success;
                record_resource(rid);
                return false;
            case OutcomeKind::Rejected:
                if (step.reject)
                {
                    ++f.pc;
                    a.frames.push_back({step.reject.get(), 0, paths.continue_reject});
                    return true;
                }
                finish(slot, false);
                return false;
            }
            return false;
        }

        void release(std::uint32_t slot, std::int32_t rid, std::int64_t amount)
        {
            Resource& r = *resources[rid].resource;
            const ArrivalHandle h = handle(slot);
            const auto held = r.held_by(h);
            if (held < amount)
            {
                auto& a = arrivals[slot];
                throw SimulationError("arrival '" + store.arrival_name(generators[a.generator].source, a.index) +
                                      "' releases " + std::to_string(amount) + " of '" + r.name() + "' but holds " +
                                      std::to_string(held));
            }
            granted_scratch.clear();
            r.release(h, amount, now, granted_scratch);
            if (held == amount)
            {
                close_visit(slot, rid, true);
            }
            record_resource(rid);
            grant_waiters(rid);
        }

        void set_capacity(std::int32_t rid, double value, CapacityMode mode)
        {
            Resource& r = *resources[rid].resource;
            const auto v = static_cast<std::int64_t>(std::llround(value));
            const std::int64_t target = mode == CapacityMode::Delta ? r.capacity() + v : v;
            if (target < 0 || !std::isfinite(value))
            {
                throw SimulationError("resource '" + r.name() + "': capacity would become " + std::to_string(target));
            }
            granted_scratch.clear();
            r.set_capacity(target, now, granted_scratch);
            record_resource(rid);
            grant_waiters(rid);
        }

        std::int32_t selected_or_throw(const ArrivalState& a) const
        {
            if (a.selected < 0)
            {
                throw SimulationError("arrival '" + store.arrival_name(generators[a.generator].source, a.index) +
                                      "' uses a selected resource before any select");
            }
            return a.selected;
        }

        Context context(std::uint32_t slot)
        {
            return Context(owner, slot, &generators[arrivals[slot].generator].act);
        }

        /// Runs activities until the arrival blocks or leaves.
        void advance(std::uint32_t slot)
        {
            std::uint64_t ops = 0;
            while (true)
            {
                auto& a = arrivals[slot];
                if (++ops > kMaxInstantOps)
                {
                    throw SimulationError("arrival '" + store.arrival_name(generators[a.generator].source, a.index) +
                                          "' executed too many activities without advancing the clock");
                }
                Frame& f = a.frames.back();
                if (f.pc >= f.program->steps.size())
                {
                    const bool cont = f.continue_after;
                    a.frames.pop_back();
                    if (a.frames.empty() || !cont)
                    {
                        finish(slot, true);
                        return;
                    }
                    continue;
                }
                Program* prog = f.program;
                const std::size_t pc = f.pc;
                if (!execute(slot, prog->source->activities()[pc], prog->steps[pc]))
                {
                    return;
                }
            }
        }

        bool execute(std::uint32_t slot, const Activity& act, Step& step)
        {
            return std::visit(
                Overloaded{
                    [&](const activity::Timeout& t) {
                        auto ctx = context(slot);
                        const double d = t.duration(ctx);
                        auto& a = arrivals[slot];
                        if (!(d >= 0.0) || !std::isfinite(d))
                        {
                            throw SimulationError("arrival '" +
                                                  store.arrival_name(generators[a.generator].source, a.index) +
                                                  "': invalid timeout " + std::to_string(d));
                        }
                        ++a.frames.back().pc;
                        a.wait = Wait::Timeout;
                        a.timeout_started = now;
                        a.timeout_end = now + d;
                        schedule_resume(slot, a.timeout_end);
                        return false;
                    },
                    [&](const activity::Seize& s) { return seize(slot, step.resource, s.amount, step, s.paths); },
                    [&](const activity::SeizeSelected& s) {
                        return seize(slot, selected_or_throw(arrivals[slot]), s.amount, step, s.paths);
                    },
                    [&](const activity::Release& r) {
                        ++arrivals[slot].frames.back().pc;
                        release(slot, step.resource, r.amount);
                        return true;
                    },
                    [&](const activity::ReleaseSelected& r) {
                        ++arrivals[slot].frames.back().pc;
                        release(slot, selected_or_throw(arrivals[slot]), r.amount);
                        return true;
                    },
                    [&](const activity::SetCapacity& s) {
                        auto ctx = context(slot);
                        const double value = s.value(ctx);
                        const auto rid = step.resource >= 0 ? step.resource : selected_or_throw(arrivals[slot]);
                        ++arrivals[slot].frames.back().pc;
                        set_capacity(rid, value, s.mode);
                        return true;
                    },
                    [&](const activity::SetAttribute& s) {
                        auto ctx = context(slot);
                        const double value = s.value(ctx);
                        auto& a = arrivals[slot];
                        const auto it = std::find_if(a.attributes.begin(), a.attributes.end(),
                                                     [&](const auto& kv) { return kv.first == step.key; });
                        if (it != a.attributes.end())
                        {
                            it->second = value;
                        }
                        else
                        {
                            a.attributes.emplace_back(step.key, value);
                        }
                        if (monitored(a))
                        {
                            AttributeRecord rec;
                            rec.time = now;
                            rec.source = generators[a.generator].source;
                            rec.index = a.index;
                            rec.key = step.key;
                            rec.value = value;
                            rec.replication = replication;
                            store.add(rec);
                        }
                        ++a.frames.back().pc;
                        return true;
                    },
                    [&](const activity::SetPrioritization& s) {
                        auto& a = arrivals[slot];
                        a.priority = s.priority;
                        a.preemptible = s.preemptible;
                        a.restart = s.restart_on_preempt;
                        ++a.frames.back().pc;
                        return true;
                    },
                    [&](const activity::Rollback& r) {
                        rollback(slot, r);
                        return true;
                    },
                    [&](const activity::Branch& b) {
                        auto ctx = context(slot);
                        const std::size_t k = b.selector(ctx);
                        auto& a = arrivals[slot];
                        if (k > step.paths.size())
                        {
                            throw SimulationError("branch selector returned " + std::to_string(k) + " with only " +
                                                  std::to_string(step.paths.size()) + " paths");
                        }
                        ++a.frames.back().pc;
                        if (k > 0)
                        {
                            a.frames.push_back({step.paths[k - 1].get(), 0, b.continue_after[k - 1]});
                        }
                        return true;
                    },
                    [&](const activity::Select& s) {
                        auto& a = arrivals[slot];
                        std::size_t pick;
                        if (s.policy == SelectPolicy::Random)
                        {
                            pick = static_cast<std::size_t>(step.select_rng->uniform_below(step.candidates.size()));
                        }
                        else
                        {
                            pick = step.rr_next;
                            step.rr_next = (step.rr_next + 1) % step.candidates.size();
                        }
                        a.selected = step.candidates[pick];
                        ++a.frames.back().pc;
                        return true;
                    },
                    [&](const activity::Trap&) {
                        auto& a = arrivals[slot];
                        if (std::find(a.traps.begin(), a.traps.end(), step.signal) == a.traps.end())
                        {
                            a.traps.push_back(step.signal);
                            signals[step.signal].subscribers.push_back(handle(slot));
                        }
                        ++a.frames.back().pc;
                        return true;
                    },
                    [&](const activity::WaitSignal&) {
                        auto& a = arrivals[slot];
                        ++a.frames.back().pc;
                        a.wait = Wait::Signal;
                        return false;
                    },
                    [&](const activity::Send& s) {
                        auto ctx = context(slot);
                        const double delay = s.delay(ctx);
                        if (!(delay >= 0.0))
                        {
                            throw SimulationError("send '" + s.signal + "': negative delay");
                        }
                        push(now + delay, 0, EventKind::Deliver, static_cast<std::uint32_t>(step.signal), 0);
                        ++arrivals[slot].frames.back().pc;
                        return true;
                    },
                    [&](const activity::Log& l) {
                        auto& a = arrivals[slot];
                        if (log_sink)
                        {
                            log_sink(now, store.arrival_name(generators[a.generator].source, a.index), l.message);
                        }
                        ++a.frames.back().pc;
                        return true;
                    },
                },
                act);
        }

        /// Moves back `steps` activities, leaving sub-trajectories for the
        /// activity that entered them when the count runs past their start.
        void rollback(std::uint32_t slot, const activity::Rollback& r)
        {
            auto& a = arrivals[slot];
            Frame& here = a.frames.back();
            const Program* prog = here.program;
            const std::size_t pc = here.pc;

            if (r.repetitions != kRepeatForever)
            {
                auto it = std::find_if(a.rollbacks.begin(), a.rollbacks.end(),
                                       [&](const RollbackCount& c) { return c.program == prog && c.pc == pc; });
                if (it == a.rollbacks.end())
                {
                    a.rollbacks.push_back({prog, pc, 0});
                    it = a.rollbacks.end() - 1;
                }
                if (it->done >= r.repetitions)
                {
                    a.rollbacks.erase(it);
                    ++here.pc;
                    return;
                }
                ++it->done;
            }

            std::size_t steps = r.steps;
            while (true)
            {
                Frame& f = a.frames.back();
                if (steps <= f.pc)
                {
                    f.pc -= steps;
                    return;
                }
                if (a.frames.size() == 1)
                {
                    throw SimulationError("rollback of " + std::to_string(r.steps) +
                                          " steps leaves the trajectory '" + f.program->source->name() + "'");
                }
                steps -= f.pc + 1;
                a.frames.pop_back();
                // The parent already points past the activity that spawned the sub-trajectory.
                a.frames.back().pc -= 1;
            }
        }

        // -- dispatch ------------------------------------------------------

        void schedule_next(std::uint32_t gen_id)
        {
            auto& g = generators[gen_id];
            if (!g.interarrival)
            {
                return;
            }
            Context ctx(owner, Context::kNone, &g.ia);
            const double d = g.interarrival(ctx);
            if (d < 0.0 || !std::isfinite(d))
            {
                return;
            }
            push(now + d, 0, EventKind::Emit, gen_id, 0);
        }

        void emit(std::uint32_t gen_id, std::uint64_t token)
        {
            const std::uint64_t count = token == kBatchToken ? generators[gen_id].initial_batch : 1;
            schedule_next(gen_id);
            for (std::uint64_t i = 0; i < count; ++i)
            {
                const auto slot = create_arrival(gen_id);
                advance(slot);
            }
        }

        void deliver(std::uint32_t sid)
        {
            auto& subs = signals[sid].subscribers;
            std::size_t keep = 0;
            for (std::size_t i = 0; i < subs.size(); ++i)
            {
                const ArrivalHandle h = subs[i];
                if (!is_alive(h))
                {
                    continue;
                }
                subs[keep++] = h;
                auto& a = arrivals[h.slot];
                if (a.wait == Wait::Signal)
                {
                    a.wait = Wait::Ready;
                    schedule_resume(h.slot, now);
                }
            }
            subs.resize(keep);
        }

        void resume(std::uint32_t slot, std::uint64_t token)
        {
            if (slot >= arrivals.size())
            {
                return;
            }
            auto& a = arrivals[slot];
            if (!a.alive || a.token != token)
            {
                return;
            }
            if (a.wait == Wait::Timeout)
            {
                account_timeout(a);
            }
            a.wait = Wait::None;
            advance(slot);
        }

        bool stale(const Event& e) const
        {
            if (e.kind != EventKind::Resume)
            {
                return false;
            }
            return e.target >= arrivals.size() || !arrivals[e.target].alive || arrivals[e.target].token != e.token;
        }

        void dispatch(const Event& e)
        {
            switch (e.kind)
            {
            case EventKind::Resume:
                resume(e.target, e.token);
                break;
            case EventKind::Emit:
                emit(e.target, e.token);
                break;
            case EventKind::Deliver:
                deliver(e.target);
                break;
            case EventKind::Callback: {
                auto fn = std::move(callbacks[e.target]);
                callbacks[e.target] = nullptr;
                free_callbacks.push_back(e.target);
                fn();
                break;
            }
            }
        }

        void snapshot_ongoing()
        {
            std::vector<ArrivalRecord> out;
            for (const auto& a : arrivals)
            {
                if (!a.alive || !monitored(a))
                {
                    continue;
                }
                const SimTime running = a.wait == Wait::Timeout ? now - a.timeout_started : 0.0;
                out.push_back(arrival_record(a, a.activity + running, false, -1, a.start));
                for (const auto& v : a.visits)
                {
                    out.push_back(arrival_record(a, v.activity + (v.held ? running : 0.0), false, v.resource, v.start));
                }
            }
            store.set_ongoing(std::move(out));
        }
    };

    // -- Context -------------------------------------------------------------

    SimTime Context::now() const noexcept
    {
        return m_env->m_impl->now;
    }

    std::string Context::name() const
    {
        const auto& impl = *m_env->m_impl;
        if (!has_arrival())
        {
            return {};
        }
        const auto& a = impl.arrivals[m_slot];
        return impl.store.arrival_name(impl.generators[a.generator].source, a.index);
    }

    std::uint64_t Context::index() const
    {
        return has_arrival() ? m_env->m_impl->arrivals[m_slot].index : kNoIndex;
    }

    int Context::priority() const
    {
        return has_arrival() ? m_env->m_impl->arrivals[m_slot].priority : 0;
    }

    double Context::attribute(std::string_view key, double fallback) const
    {
        const auto& impl = *m_env->m_impl;
        if (!has_arrival())
        {
            return fallback;
        }
        const auto id = impl.store.find_key(key);
        if (!id)
        {
            return fallback;
        }
        for (const auto& [k, v] : impl.arrivals[m_slot].attributes)
        {
            if (k == *id)
            {
                return v;
            }
        }
        return fallback;
    }

    const Resource* Context::selected() const
    {
        const auto& impl = *m_env->m_impl;
        if (!has_arrival() || impl.arrivals[m_slot].selected < 0)
        {
            return nullptr;
        }
        return impl.resources[static_cast<std::size_t>(impl.arrivals[m_slot].selected)].resource.get();
    }

    // -- Environment ---------------------------------------------------------

    Environment::Environment(std::uint64_t seed, std::int32_t replication) : m_impl(std::make_unique<Impl>())
    {
        m_impl->owner = this;
        m_impl->seed = seed;
        m_impl->replication = replication;
    }

    Environment::~Environment() = default;

    Environment::Environment(Environment&& other) noexcept : m_impl(std::move(other.m_impl))
    {
        if (m_impl)
        {
            m_impl->owner = this;
        }
    }

    Environment& Environment::operator=(Environment&& other) noexcept
    {
        m_impl = std::move(other.m_impl);
        if (m_impl)
        {
            m_impl->owner = this;
        }
        return *this;
    }

    Resource& Environment::add_resource(ResourceSpec spec)
    {
        auto& impl = *m_impl;
        if (spec.name.empty())
        {
            throw ConfigError("resource with empty name");
        }
        if (impl.resource_ids.count(spec.name) != 0)
        {
            throw ConfigError("duplicate resource '" + spec.name + "'");
        }
        std::unique_ptr<Resource> res;
        try
        {
            res = std::make_unique<Resource>(spec.name, spec.capacity, spec.queue_size, spec.preemptive,
                                             spec.preempt_fate);
        }
        catch (const std::invalid_argument& e)
        {
            throw ConfigError(e.what());
        }
        const auto rid = static_cast<std::int32_t>(impl.resources.size());
        impl.resource_ids.emplace(spec.name, rid);
        impl.resources.push_back({std::move(res), impl.store.intern_resource(spec.name), spec.monitor});
        impl.record_resource(rid);
        return *impl.resources.back().resource;
    }

    void Environment::add_generator(GeneratorSpec spec)
    {
        auto& impl = *m_impl;
        if (spec.name_prefix.empty())
        {
            throw ConfigError("generator with empty name prefix");
        }
        if (impl.generator_ids.count(spec.name_prefix) != 0)
        {
            throw ConfigError("duplicate generator '" + spec.name_prefix + "'");
        }
        std::size_t select_ordinal = 0;
        auto traj = std::make_shared<const Trajectory>(std::move(spec.trajectory));
        auto program = impl.compile(traj, spec.name_prefix, select_ordinal);

        const auto gen_id = static_cast<std::uint32_t>(impl.generators.size());
        GeneratorState g{spec.name_prefix,
                         impl.store.intern_source(spec.name_prefix),
                         std::move(program),
                         std::move(spec.interarrival),
                         RngStream(impl.seed, stream_id_for("gen:" + spec.name_prefix + ":ia")),
                         RngStream(impl.seed, stream_id_for("gen:" + spec.name_prefix + ":act")),
                         spec.initial_batch,
                         spec.priority,
                         spec.preemptible,
                         spec.restart_on_preempt,
                         spec.monitor,
                         0};
        impl.generators.push_back(std::move(g));
        impl.generator_ids.emplace(spec.name_prefix, gen_id);

        if (spec.initial_batch > 0)
        {
            impl.push(impl.now, 0, EventKind::Emit, gen_id, kBatchToken);
        }
        else
        {
            impl.schedule_next(gen_id);
        }
    }

    std::uint64_t Environment::schedule(SimTime at, int priority, std::function<void()> action)
    {
        auto& impl = *m_impl;
        if (!(at >= impl.now))
        {
            throw SimulationError("event scheduled at t=" + format_real(at) + " before now=" + format_real(impl.now));
        }
        std::uint32_t idx;
        if (!impl.free_callbacks.empty())
        {
            idx = impl.free_callbacks.back();
            impl.free_callbacks.pop_back();
            impl.callbacks[idx] = std::move(action);
        }
        else
        {
            idx = static_cast<std::uint32_t>(impl.callbacks.size());
            impl.callbacks.push_back(std::move(action));
        }
        const auto seq = impl.next_seq;
        impl.push(at, priority, EventKind::Callback, idx, 0);
        return seq;
    }

    void Environment::run(SimTime until)
    {
        auto& impl = *m_impl;
        while (!impl.events.empty() && impl.events.top().time < until)
        {
            const Event e = impl.events.top();
            impl.events.pop();
            if (impl.stale(e))
            {
                continue;
            }
            impl.now = e.time;
            ++impl.processed;
            impl.dispatch(e);
        }
        if (!impl.events.empty() && std::isfinite(until) && until > impl.now)
        {
            impl.now = until;
        }
        impl.snapshot_ongoing();
    }

    void Environment::send(std::string_view signal, SimTime delay)
    {
        auto& impl = *m_impl;
        if (!(delay >= 0.0))
        {
            throw SimulationError("send '" + std::string(signal) + "': negative delay");
        }
        const auto sid = impl.signal_id(signal);
        impl.push(impl.now + delay, 0, EventKind::Deliver, static_cast<std::uint32_t>(sid), 0);
    }

    SimTime Environment::now() const noexcept
    {
        return m_impl->now;
    }

    std::uint64_t Environment::seed() const noexcept
    {
        return m_impl->seed;
    }

    std::int32_t Environment::replication() const noexcept
    {
        return m_impl->replication;
    }

    std::uint64_t Environment::events_processed() const noexcept
    {
        return m_impl->processed;
    }

    std::uint64_t Environment::events_pending() const noexcept
    {
        return m_impl->events.size();
    }

    bool Environment::has_resource(std::string_view name) const
    {
        return m_impl->resource_ids.count(std::string(name)) != 0;
    }

    Resource& Environment::resource(std::string_view name)
    {
        const auto it = m_impl->resource_ids.find(std::string(name));
        if (it == m_impl->resource_ids.end())
        {
            throw ConfigError("unknown resource '" + std::string(name) + "'");
        }
        return *m_impl->resources[static_cast<std::size_t>(it->second)].resource;
    }

    const Resource& Environment::resource(std::string_view name) const
    {
        return const_cast<Environment*>(this)->resource(name);
    }

    std::uint64_t Environment::generated(std::string_view prefix) const
    {
        const auto it = m_impl->generator_ids.find(std::string(prefix));
        if (it == m_impl->generator_ids.end())
        {
            throw ConfigError("unknown generator '" + std::string(prefix) + "'");
        }
        return m_impl->generators[it->second].count;
    }

    std::size_t Environment::arrivals_in_system() const noexcept
    {
        return m_impl->alive;
    }

    const MonitorStore& Environment::monitor() const noexcept
    {
        return m_impl->store;
    }

    RngStream Environment::stream(std::string_view tag) const
    {
        return RngStream(m_impl->seed, stream_id_for(tag));
    }

    void Environment::set_log_sink(LogSink sink)
    {
        m_impl->log_sink = std::move(sink);
    }
}
