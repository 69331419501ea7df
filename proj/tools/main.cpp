// trajsim command line: run one case, sweep a grid, rebuild summaries.

#include "trajsim/environment.hpp"
#include "trajsim/monitor.hpp"
#include "trajsim/runner.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace
{
    namespace fs = std::filesystem;
    using trajsim::Config;
    using trajsim::ConfigError;

    constexpr int kUsage = 2;
    constexpr int kFailure = 1;

    // --key value / --key=value pairs left over by CLI11, dashes folded to underscores.
    Config scenario_flags(const std::vector<std::string>& extras)
    {
        Config out;
        for (std::size_t i = 0; i < extras.size(); ++i)
        {
            const auto& arg = extras[i];
            if (arg.rfind("--", 0) != 0 || arg.size() == 2)
            {
                throw ConfigError("unexpected argument '" + arg + "'");
            }
            auto key = arg.substr(2);
            std::string value;
            if (const auto eq = key.find('='); eq != std::string::npos)
            {
                value = key.substr(eq + 1);
                key.resize(eq);
            }
            else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0)
            {
                value = extras[++i];
            }
            else
            {
                throw ConfigError("--" + key + " needs a value");
            }
            std::replace(key.begin(), key.end(), '-', '_');
            out.set(key, value);
        }
        return out;
    }

    Config case_settings(const std::string& config_file, const std::vector<std::string>& extras,
                         std::optional<std::uint64_t> seed)
    {
        Config cfg;
        if (!config_file.empty())
        {
            cfg = Config::load(config_file);
        }
        cfg.merge(scenario_flags(extras));
        if (seed)
        {
            cfg.set("seed", std::to_string(*seed));
        }
        return cfg;
    }

    void require_scenario(const std::string& name)
    {
        if (!trajsim::is_scenario(name))
        {
            throw ConfigError("unknown scenario '" + name + "' (expected mm1, xhaul, pon or miot)");
        }
    }

    void report(const trajsim::CaseResult& r)
    {
        std::printf("%s: %llu events in %.3f s\n", r.directory.string().c_str(),
                    static_cast<unsigned long long>(r.events), r.wall_time_s);
    }

    std::vector<fs::path> case_dirs(const fs::path& dir)
    {
        if (fs::exists(dir / "manifest") || !fs::is_directory(dir))
        {
            return {dir};
        }
        std::vector<fs::path> out;
        for (const auto& e : fs::directory_iterator(dir))
        {
            if (e.is_directory() && e.path().filename().string().rfind("case-", 0) == 0)
            {
                out.push_back(e.path());
            }
        }
        std::sort(out.begin(), out.end());
        if (out.empty())
        {
            out.push_back(dir);
        }
        return out;
    }
}

int main(int argc, char** argv)
{
    CLI::App app{"Trajectory-based discrete-event simulator"};
    app.require_subcommand(1);

    std::string scenario;
    std::string config_file;
    std::string out_dir = "results";
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    std::vector<std::string> grid;
    std::vector<std::string> summarize_dirs;

    auto* run = app.add_subcommand("run", "Run a single case into <out>/case-0");
    auto* sweep = app.add_subcommand("sweep", "Run the cartesian product of --grid axes in parallel");
    for (auto* sub : {run, sweep})
    {
        sub->allow_extras();
        sub->add_option("scenario", scenario, "mm1, xhaul, pon or miot")->required();
        sub->add_option("--config", config_file, "key = value settings file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Seed (sweeps: base seed, case i gets seed + i)");
        sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
        sub->footer("Scenario parameters are passed as --key value, e.g. --n-xpfe 5 --policy sp_preempt.");
    }
    sweep->add_option("--grid", grid, "Axes key=v1,v2,...")->required();
    sweep->add_option("--workers", workers, "Parallel cases")->capture_default_str()->check(CLI::PositiveNumber);

    auto* summarize = app.add_subcommand("summarize", "Rebuild summary.csv from exported monitor files");
    summarize->add_option("directory", summarize_dirs, "Case directories or sweep roots")->required();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::Success& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return kUsage;
    }

    try
    {
        if (*run)
        {
            require_scenario(scenario);
            const auto cfg = case_settings(config_file, run->remaining(), seed);
            report(trajsim::run_case(scenario, cfg, 0, out_dir));
        }
        else if (*sweep)
        {
            require_scenario(scenario);
            trajsim::SweepSpec spec;
            spec.scenario = scenario;
            spec.base = case_settings(config_file, sweep->remaining(), std::nullopt);
            spec.base_seed = seed ? *seed : static_cast<std::uint64_t>(spec.base.get_int("seed", 0));
            for (const auto& axis : grid)
            {
                spec.grid.push_back(trajsim::parse_grid_axis(axis));
            }
            spec.workers = workers;
            spec.out = out_dir;
            for (const auto& r : trajsim::run_sweep(spec))
            {
                report(r);
            }
        }
        else
        {
            for (const auto& root : summarize_dirs)
            {
                for (const auto& dir : case_dirs(root))
                {
                    std::printf("%s\n", trajsim::summarize_directory(dir).string().c_str());
                }
            }
        }
    }
    catch (const ConfigError& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFailure;
    }
    return 0;
}
