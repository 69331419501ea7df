#pragma once

#include "trajsim/stats.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace trajsim
{
    /// One value of a long-format table: grouping columns, statistic name, value.
    struct SummaryRow
    {
        std::vector<std::pair<std::string, std::string>> group;
        std::string statistic;
        double value = 0.0;
    };

    using SummaryTable = std::vector<SummaryRow>;

    /// Appends p5..p95 rows (and the mean) for `samples`; nothing when empty.
    void add_distribution(SummaryTable& table, const std::vector<std::pair<std::string, std::string>>& group,
                          std::vector<double> samples);

    /// Header is taken from the first row; every row must carry the same group columns.
    void write_summary_csv(const SummaryTable& table, const std::filesystem::path& file);

    /// Value of the first row matching every (column, value) pair and the statistic.
    /// Throws std::out_of_range when absent.
    double lookup(const SummaryTable& table, const std::vector<std::pair<std::string, std::string>>& where,
                  std::string_view statistic);
}
