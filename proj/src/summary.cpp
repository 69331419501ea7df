#include "trajsim/summary.hpp"

#include "trajsim/monitor.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace trajsim
{
    void add_distribution(SummaryTable& table, const std::vector<std::pair<std::string, std::string>>& group,
                          std::vector<double> samples)
    {
        if (samples.empty())
        {
            return;
        }
        std::sort(samples.begin(), samples.end());
        static constexpr std::pair<const char*, double> kLevels[] = {
            {"p5", 5.0}, {"p25", 25.0}, {"p50", 50.0}, {"p75", 75.0}, {"p95", 95.0}};
        for (const auto& [name, p] : kLevels)
        {
            table.push_back({group, name, percentile_sorted(samples, p)});
        }
        table.push_back({group, "mean", mean(samples)});
        table.push_back({group, "count", static_cast<double>(samples.size())});
    }

    void write_summary_csv(const SummaryTable& table, const std::filesystem::path& file)
    {
        std::ofstream out(file, std::ios::binary);
        if (!out)
        {
            throw CsvError("cannot write " + file.string());
        }
        if (!table.empty())
        {
            for (const auto& [column, value] : table.front().group)
            {
                out << column << ',';
            }
        }
        out << "statistic,value\n";
        for (const auto& row : table)
        {
            if (!table.empty() && row.group.size() != table.front().group.size())
            {
                throw CsvError(file.string() + ": summary rows with different grouping columns");
            }
            for (const auto& [column, value] : row.group)
            {
                out << value << ',';
            }
            out << row.statistic << ',' << format_real(row.value) << '\n';
        }
        if (!out.flush())
        {
            throw CsvError("write failed: " + file.string());
        }
    }

    double lookup(const SummaryTable& table, const std::vector<std::pair<std::string, std::string>>& where,
                  std::string_view statistic)
    {
        for (const auto& row : table)
        {
            if (row.statistic != statistic)
            {
                continue;
            }
            const bool match = std::all_of(where.begin(), where.end(), [&](const auto& w) {
                return std::find(row.group.begin(), row.group.end(), w) != row.group.end();
            });
            if (match)
            {
                return row.value;
            }
        }
        throw std::out_of_range("summary has no '" + std::string(statistic) + "' row for the requested group");
    }
}
