#include "trajsim/monitor.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace trajsim
{
    std::uint32_t MonitorStore::intern(std::vector<std::string>& names,
                                       std::unordered_map<std::string, std::uint32_t>& ids, std::string_view name)
    {
        const std::string key(name);
        if (const auto it = ids.find(key); it != ids.end())
        {
            return it->second;
        }
        const auto id = static_cast<std::uint32_t>(names.size());
        names.push_back(key);
        ids.emplace(key, id);
        return id;
    }

    std::uint32_t MonitorStore::intern_source(std::string_view prefix)
    {
        return intern(m_sources, m_source_ids, prefix);
    }

    std::uint32_t MonitorStore::intern_resource(std::string_view name)
    {
        return intern(m_resources, m_resource_ids, name);
    }

    std::uint32_t MonitorStore::intern_key(std::string_view key)
    {
        return intern(m_keys, m_key_ids, key);
    }

    namespace
    {
        std::optional<std::uint32_t> lookup(const std::unordered_map<std::string, std::uint32_t>& ids,
                                            std::string_view name)
        {
            if (const auto it = ids.find(std::string(name)); it != ids.end())
            {
                return it->second;
            }
            return std::nullopt;
        }
    }

    std::optional<std::uint32_t> MonitorStore::find_source(std::string_view prefix) const
    {
        return lookup(m_source_ids, prefix);
    }

    std::optional<std::uint32_t> MonitorStore::find_resource(std::string_view name) const
    {
        return lookup(m_resource_ids, name);
    }

    std::optional<std::uint32_t> MonitorStore::find_key(std::string_view key) const
    {
        return lookup(m_key_ids, key);
    }

    std::string MonitorStore::arrival_name(std::uint32_t source, std::uint64_t index) const
    {
        std::string out = m_sources.at(source);
        if (index != kNoIndex)
        {
            out += std::to_string(index);
        }
        return out;
    }

    std::vector<ArrivalRecord> get_mon_arrivals(const MonitorStore& store, bool per_resource)
    {
        std::vector<ArrivalRecord> out;
        const auto wanted = [&](const ArrivalRecord& r) { return r.is_lifecycle() != per_resource; };
        for (const auto* src : {&store.ended(), &store.ongoing()})
        {
            for (const auto& r : *src)
            {
                if (wanted(r))
                {
                    out.push_back(r);
                }
            }
        }
        // Names are only rendered on end_time ties, which are rare.
        std::stable_sort(out.begin(), out.end(), [&](const ArrivalRecord& a, const ArrivalRecord& b) {
            if (a.end_time != b.end_time)
            {
                return a.end_time < b.end_time;
            }
            if (a.source == b.source && a.index == b.index)
            {
                return false;
            }
            return store.arrival_name(a) < store.arrival_name(b);
        });
        return out;
    }

    const std::vector<ResourceRecord>& get_mon_resources(const MonitorStore& store)
    {
        return store.resources();
    }

    const std::vector<AttributeRecord>& get_mon_attributes(const MonitorStore& store)
    {
        return store.attributes();
    }

    double queueing_delay(const ArrivalRecord& visit, bool include_service)
    {
        if (visit.is_lifecycle())
        {
            throw std::invalid_argument("queueing_delay: lifecycle record given where a per-resource visit is required");
        }
        const double wait = visit.end_time - visit.start_time - visit.activity_time;
        return include_service ? wait + visit.activity_time : wait;
    }

    std::vector<double> queueing_delay(const std::vector<ArrivalRecord>& per_resource, bool include_service)
    {
        std::vector<double> out;
        out.reserve(per_resource.size());
        for (const auto& r : per_resource)
        {
            const double d = queueing_delay(r, include_service);
            if (r.finished)
            {
                out.push_back(d);
            }
        }
        return out;
    }

    std::string format_real(double value)
    {
        if (std::isinf(value))
        {
            return value > 0 ? "Inf" : "-Inf";
        }
        if (std::isnan(value))
        {
            return "NaN";
        }
        std::array<char, 64> buf{};
        const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
        return std::string(buf.data(), res.ptr);
    }

    namespace
    {
        void check_field(std::string_view field, const std::filesystem::path& path)
        {
            if (field.find_first_of(",\"\n\r") != std::string_view::npos)
            {
                throw CsvError(path.string() + ": field '" + std::string(field) +
                               "' contains a separator or quote character");
            }
        }

        std::ofstream open_out(const std::filesystem::path& path)
        {
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out)
            {
                throw CsvError("cannot open '" + path.string() + "' for writing");
            }
            return out;
        }

        void finish_out(std::ofstream& out, const std::filesystem::path& path)
        {
            out.flush();
            if (!out)
            {
                throw CsvError("write failed for '" + path.string() + "'");
            }
        }

        std::vector<std::string_view> split(std::string_view line)
        {
            std::vector<std::string_view> fields;
            std::size_t pos = 0;
            while (true)
            {
                const auto comma = line.find(',', pos);
                if (comma == std::string_view::npos)
                {
                    fields.push_back(line.substr(pos));
                    break;
                }
                fields.push_back(line.substr(pos, comma - pos));
                pos = comma + 1;
            }
            return fields;
        }

        double parse_real(std::string_view s, const std::filesystem::path& path)
        {
            if (s == "Inf")
            {
                return std::numeric_limits<double>::infinity();
            }
            if (s == "-Inf")
            {
                return -std::numeric_limits<double>::infinity();
            }
            if (s == "NaN")
            {
                return std::numeric_limits<double>::quiet_NaN();
            }
            double v = 0.0;
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            {
                throw CsvError(path.string() + ": bad real '" + std::string(s) + "'");
            }
            return v;
        }

        template <typename Int>
        Int parse_int(std::string_view s, const std::filesystem::path& path)
        {
            Int v{};
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            {
                throw CsvError(path.string() + ": bad integer '" + std::string(s) + "'");
            }
            return v;
        }

        bool parse_bool(std::string_view s, const std::filesystem::path& path)
        {
            if (s == "true")
            {
                return true;
            }
            if (s == "false")
            {
                return false;
            }
            throw CsvError(path.string() + ": bad boolean '" + std::string(s) + "'");
        }

        /// Splits "prefix123" into ("prefix", 123); names without a canonical numeric tail keep kNoIndex.
        std::pair<std::string_view, std::uint64_t> split_name(std::string_view name)
        {
            std::size_t digits = 0;
            while (digits < name.size() && digits < 19 &&
                   std::isdigit(static_cast<unsigned char>(name[name.size() - 1 - digits])))
            {
                ++digits;
            }
            if (digits == 0)
            {
                return {name, kNoIndex};
            }
            const auto tail = name.substr(name.size() - digits);
            if (tail.size() > 1 && tail.front() == '0')
            {
                return {name, kNoIndex};
            }
            std::uint64_t index = 0;
            std::from_chars(tail.data(), tail.data() + tail.size(), index);
            return {name.substr(0, name.size() - digits), index};
        }

        template <typename Fn>
        void read_rows(const std::filesystem::path& path, std::string_view header, std::size_t columns, Fn&& fn)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
            {
                throw CsvError("cannot open '" + path.string() + "' for reading");
            }
            std::string line;
            if (!std::getline(in, line) || line != header)
            {
                throw CsvError(path.string() + ": unexpected header");
            }
            while (std::getline(in, line))
            {
                if (line.empty())
                {
                    continue;
                }
                const auto fields = split(line);
                if (fields.size() != columns)
                {
                    throw CsvError(path.string() + ": expected " + std::to_string(columns) + " fields in '" + line +
                                   "'");
                }
                fn(fields);
            }
        }
    }

    void export_csv(const MonitorStore& store, const std::filesystem::path& directory)
    {
        std::filesystem::create_directories(directory);

        {
            const auto path = directory / "arrivals.csv";
            auto out = open_out(path);
            out << kArrivalsHeader << '\n';
            for (const bool per_resource : {false, true})
            {
                for (const auto& r : get_mon_arrivals(store, per_resource))
                {
                    const auto name = store.arrival_name(r);
                    check_field(name, path);
                    out << name << ',' << format_real(r.start_time) << ',' << format_real(r.end_time) << ','
                        << format_real(r.activity_time) << ',' << (r.finished ? "true" : "false") << ',';
                    if (!r.is_lifecycle())
                    {
                        const auto& res = store.resource_name(static_cast<std::uint32_t>(r.resource));
                        check_field(res, path);
                        out << res;
                    }
                    out << ',' << r.replication << '\n';
                }
            }
            finish_out(out, path);
        }

        {
            const auto path = directory / "resources.csv";
            auto out = open_out(path);
            out << kResourcesHeader << '\n';
            for (const auto& r : store.resources())
            {
                const auto& res = store.resource_name(r.resource);
                check_field(res, path);
                out << res << ',' << format_real(r.time) << ',' << r.server << ',' << r.queue << ',' << r.capacity
                    << ',';
                if (r.queue_size == kUnboundedQueue)
                {
                    out << "Inf";
                }
                else
                {
                    out << r.queue_size;
                }
                out << ',' << r.replication << '\n';
            }
            finish_out(out, path);
        }

        {
            const auto path = directory / "attributes.csv";
            auto out = open_out(path);
            out << kAttributesHeader << '\n';
            for (const auto& r : store.attributes())
            {
                const auto name = store.arrival_name(r.source, r.index);
                const auto& key = store.key_name(r.key);
                check_field(name, path);
                check_field(key, path);
                out << format_real(r.time) << ',' << name << ',' << key << ',' << format_real(r.value) << ','
                    << r.replication << '\n';
            }
            finish_out(out, path);
        }
    }

    MonitorStore load_csv(const std::filesystem::path& directory)
    {
        MonitorStore store;
        std::vector<ArrivalRecord> records;

        const auto arrivals = directory / "arrivals.csv";
        read_rows(arrivals, kArrivalsHeader, 7, [&](const std::vector<std::string_view>& f) {
            ArrivalRecord r;
            const auto [prefix, index] = split_name(f[0]);
            r.source = store.intern_source(prefix);
            r.index = index;
            r.start_time = parse_real(f[1], arrivals);
            r.end_time = parse_real(f[2], arrivals);
            r.activity_time = parse_real(f[3], arrivals);
            r.finished = parse_bool(f[4], arrivals);
            r.resource = f[5].empty() ? kLifecycle : static_cast<std::int32_t>(store.intern_resource(f[5]));
            r.replication = parse_int<std::int32_t>(f[6], arrivals);
            store.add(r);
        });

        const auto resources = directory / "resources.csv";
        read_rows(resources, kResourcesHeader, 7, [&](const std::vector<std::string_view>& f) {
            ResourceRecord r;
            r.resource = store.intern_resource(f[0]);
            r.time = parse_real(f[1], resources);
            r.server = parse_int<std::int64_t>(f[2], resources);
            r.queue = parse_int<std::int64_t>(f[3], resources);
            r.capacity = parse_int<std::int64_t>(f[4], resources);
            r.queue_size = f[5] == "Inf" ? kUnboundedQueue : parse_int<std::int64_t>(f[5], resources);
            r.replication = parse_int<std::int32_t>(f[6], resources);
            store.add(r);
        });

        const auto attributes = directory / "attributes.csv";
        read_rows(attributes, kAttributesHeader, 5, [&](const std::vector<std::string_view>& f) {
            AttributeRecord r;
            r.time = parse_real(f[0], attributes);
            const auto [prefix, index] = split_name(f[1]);
            r.source = store.intern_source(prefix);
            r.index = index;
            r.key = store.intern_key(f[2]);
            r.value = parse_real(f[3], attributes);
            r.replication = parse_int<std::int32_t>(f[4], attributes);
            store.add(r);
        });

        return store;
    }
}
