#pragma once

#include "trajsim/config.hpp"
#include "trajsim/summary.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trajsim
{
    class MonitorStore;

    /// mm1, xhaul, pon, miot.
    const std::vector<std::string>& scenario_names();
    bool is_scenario(std::string_view name);

    /// Full, validated parameter set of a case: every key that affects the
    /// result. Throws ConfigError for unknown scenarios, keys or bad values.
    Config resolve_case(std::string_view scenario, const Config& settings);

    struct CaseResult
    {
        std::filesystem::path directory;
        std::uint64_t events = 0;
        double wall_time_s = 0.0;
    };

    /// Runs one case into `out / "case-<index>"`: arrivals.csv, resources.csv,
    /// attributes.csv, summary.csv and manifest.
    CaseResult run_case(std::string_view scenario, const Config& settings, std::size_t index,
                        const std::filesystem::path& out);

    /// Summary table of a finished case, from the store it produced.
    SummaryTable summarize_case(std::string_view scenario, const Config& resolved, const MonitorStore& store);

    using Grid = std::vector<std::pair<std::string, std::vector<std::string>>>;

    /// "key=v1,v2,..." into a grid axis.
    std::pair<std::string, std::vector<std::string>> parse_grid_axis(std::string_view text);

    /// Cartesian product of the grid over `base`; the last axis varies fastest.
    std::vector<Config> expand_grid(const Config& base, const Grid& grid);

    struct SweepSpec
    {
        std::string scenario;
        Config base;
        Grid grid;
        std::uint64_t base_seed = 0;
        std::size_t workers = 1;
        std::filesystem::path out;
    };

    /// Case i gets seed base_seed + i. Every case is validated before any runs.
    /// Results are in case order whatever the completion order.
    std::vector<CaseResult> run_sweep(const SweepSpec& spec);

    /// Rebuilds summary.csv of a case directory from its monitor files and
    /// manifest. Throws CsvError listing every missing file.
    std::filesystem::path summarize_directory(const std::filesystem::path& case_dir);
}
