#include "trajsim/runner.hpp"

#include "trajsim/environment.hpp"
#include "trajsim/monitor.hpp"
#include "trajsim/scenarios/crosshaul.hpp"
#include "trajsim/scenarios/miot.hpp"
#include "trajsim/scenarios/mm1.hpp"
#include "trajsim/scenarios/pon.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

namespace trajsim
{
    using namespace scenarios;

    namespace
    {
        // Manifest keys that are not model parameters.
        constexpr std::string_view kRunKeys[] = {"scenario", "case", "events", "wall_time_s"};

        struct Outcome
        {
            MonitorStore store;
            std::uint64_t events = 0;
        };

        Outcome simulate(std::string_view scenario, const Config& resolved)
        {
            Outcome o;
            auto finish = [&o](Environment& env, SimTime until) {
                env.run(until);
                o.events = env.events_processed();
                o.store = env.monitor();
            };
            if (scenario == "mm1")
            {
                auto env = build_mm1(Mm1Config::from(resolved));
                finish(env, kForever);
            }
            else if (scenario == "xhaul")
            {
                const auto cfg = XhaulConfig::from(resolved);
                auto env = build_crosshaul(cfg);
                finish(env, cfg.horizon_s);
            }
            else if (scenario == "pon")
            {
                const auto cfg = PonConfig::from(resolved);
                auto model = build_pon(cfg);
                finish(model.env, cfg.horizon_s);
            }
            else
            {
                const auto cfg = MiotConfig::from(resolved);
                auto model = build_miot(cfg);
                finish(model.env, cfg.horizon_s);
            }
            return o;
        }

        void write_text(const std::filesystem::path& file, const std::string& text)
        {
            std::ofstream out(file, std::ios::binary);
            out << text;
            out.flush();
            if (!out)
            {
                throw CsvError("cannot write " + file.string());
            }
        }
    }

    const std::vector<std::string>& scenario_names()
    {
        static const std::vector<std::string> names{"mm1", "xhaul", "pon", "miot"};
        return names;
    }

    bool is_scenario(std::string_view name)
    {
        const auto& n = scenario_names();
        return std::find(n.begin(), n.end(), name) != n.end();
    }

    Config resolve_case(std::string_view scenario, const Config& settings)
    {
        if (scenario == "mm1")
        {
            return Mm1Config::from(settings).describe();
        }
        if (scenario == "xhaul")
        {
            return XhaulConfig::from(settings).describe();
        }
        if (scenario == "pon")
        {
            return PonConfig::from(settings).describe();
        }
        if (scenario == "miot")
        {
            return MiotConfig::from(settings).describe();
        }
        throw ConfigError("unknown scenario '" + std::string(scenario) + "' (expected mm1, xhaul, pon or miot)");
    }

    SummaryTable summarize_case(std::string_view scenario, const Config& resolved, const MonitorStore& store)
    {
        if (scenario == "mm1")
        {
            return summarize_mm1(store, Mm1Config::from(resolved));
        }
        if (scenario == "xhaul")
        {
            return summarize_crosshaul(store, XhaulConfig::from(resolved));
        }
        if (scenario == "pon")
        {
            return summarize_pon(store, PonConfig::from(resolved));
        }
        if (scenario == "miot")
        {
            return summarize_miot(store, MiotConfig::from(resolved));
        }
        throw ConfigError("unknown scenario '" + std::string(scenario) + "'");
    }

    CaseResult run_case(std::string_view scenario, const Config& settings, std::size_t index,
                        const std::filesystem::path& out)
    {
        const auto resolved = resolve_case(scenario, settings);
        const auto dir = out / ("case-" + std::to_string(index));
        std::filesystem::create_directories(dir);

        const auto t0 = std::chrono::steady_clock::now();
        auto o = simulate(scenario, resolved);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        export_csv(o.store, dir);
        write_summary_csv(summarize_case(scenario, resolved, o.store), dir / "summary.csv");

        auto manifest = resolved;
        manifest.set("scenario", std::string(scenario));
        manifest.set("case", std::to_string(index));
        manifest.set("events", std::to_string(o.events));
        manifest.set("wall_time_s", format_real(wall));
        write_text(dir / "manifest", manifest.to_string());
        return {dir, o.events, wall};
    }

    std::pair<std::string, std::vector<std::string>> parse_grid_axis(std::string_view text)
    {
        const auto eq = text.find('=');
        if (eq == std::string_view::npos || eq == 0 || eq + 1 == text.size())
        {
            throw ConfigError("grid axis '" + std::string(text) + "': expected key=v1,v2,...");
        }
        auto key = std::string(text.substr(0, eq));
        std::replace(key.begin(), key.end(), '-', '_');
        const auto list = text.substr(eq + 1);
        if (list.front() == ',' || list.back() == ',' || list.find(",,") != std::string_view::npos)
        {
            throw ConfigError("grid axis '" + std::string(text) + "': empty value");
        }
        auto values = split_list(list);
        return {std::move(key), std::move(values)};
    }

    std::vector<Config> expand_grid(const Config& base, const Grid& grid)
    {
        std::vector<Config> cases{base};
        for (const auto& [key, values] : grid)
        {
            if (values.empty())
            {
                throw ConfigError("grid axis '" + key + "' has no values");
            }
            std::vector<Config> next;
            next.reserve(cases.size() * values.size());
            for (const auto& c : cases)
            {
                for (const auto& v : values)
                {
                    auto copy = c;
                    copy.set(key, v);
                    next.push_back(std::move(copy));
                }
            }
            cases = std::move(next);
        }
        return cases;
    }

    std::vector<CaseResult> run_sweep(const SweepSpec& spec)
    {
        auto cases = expand_grid(spec.base, spec.grid);
        for (std::size_t i = 0; i < cases.size(); ++i)
        {
            cases[i].set("seed", std::to_string(spec.base_seed + i));
            resolve_case(spec.scenario, cases[i]);
        }

        std::vector<CaseResult> results(cases.size());
        std::atomic<std::size_t> next{0};
        std::mutex error_lock;
        std::exception_ptr error;
        auto worker = [&] {
            for (;;)
            {
                const auto i = next.fetch_add(1);
                if (i >= cases.size())
                {
                    return;
                }
                {
                    std::lock_guard lock(error_lock);
                    if (error)
                    {
                        return;
                    }
                }
                try
                {
                    results[i] = run_case(spec.scenario, cases[i], i, spec.out);
                }
                catch (...)
                {
                    std::lock_guard lock(error_lock);
                    if (!error)
                    {
                        error = std::current_exception();
                    }
                }
            }
        };

        const auto n = std::clamp<std::size_t>(spec.workers, 1, cases.size());
        if (n == 1)
        {
            worker();
        }
        else
        {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < n; ++w)
            {
                pool.emplace_back(worker);
            }
        }
        if (error)
        {
            std::rethrow_exception(error);
        }
        return results;
    }

    std::filesystem::path summarize_directory(const std::filesystem::path& case_dir)
    {
        std::string missing;
        for (const auto* f : {"arrivals.csv", "resources.csv", "attributes.csv", "manifest"})
        {
            if (!std::filesystem::is_regular_file(case_dir / f))
            {
                missing += (missing.empty() ? "" : ", ") + (case_dir / f).string();
            }
        }
        if (!missing.empty())
        {
            throw CsvError("missing files: " + missing);
        }

        const auto manifest = Config::load(case_dir / "manifest");
        const auto scenario = manifest.get_string("scenario", "");
        Config settings;
        for (const auto& [k, v] : manifest.entries())
        {
            if (std::find(std::begin(kRunKeys), std::end(kRunKeys), k) == std::end(kRunKeys))
            {
                settings.set(k, v);
            }
        }
        const auto resolved = resolve_case(scenario, settings);
        const auto store = load_csv(case_dir);
        const auto file = case_dir / "summary.csv";
        write_summary_csv(summarize_case(scenario, resolved, store), file);
        return file;
    }
}
