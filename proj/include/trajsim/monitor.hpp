#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace trajsim
{
    using SimTime = double;

    inline constexpr std::uint64_t kNoIndex = std::numeric_limits<std::uint64_t>::max();
    inline constexpr std::int32_t kLifecycle = -1;
    inline constexpr std::int64_t kUnboundedQueue = -1;

    /// Arrival names are `source prefix + index`; sources and resources are interned in the store.
    struct ArrivalRecord
    {
        std::uint64_t index = kNoIndex;
        SimTime start_time = 0.0;
        SimTime end_time = 0.0;
        SimTime activity_time = 0.0;
        std::uint32_t source = 0;
        std::int32_t resource = kLifecycle; // kLifecycle for the whole-life record
        std::int32_t replication = 0;
        bool finished = false;

        bool is_lifecycle() const noexcept { return resource == kLifecycle; }
    };

    struct ResourceRecord
    {
        std::uint32_t resource = 0;
        SimTime time = 0.0;
        std::int64_t server = 0;
        std::int64_t queue = 0;
        std::int64_t capacity = 0;
        std::int64_t queue_size = kUnboundedQueue;
        std::int32_t replication = 0;
    };

    struct AttributeRecord
    {
        SimTime time = 0.0;
        std::uint64_t index = kNoIndex;
        double value = 0.0;
        std::uint32_t source = 0;
        std::uint32_t key = 0;
        std::int32_t replication = 0;
    };

    class CsvError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Append-only record storage for one environment (or a merge of several).
    class MonitorStore
    {
    public:
        std::uint32_t intern_source(std::string_view prefix);
        std::uint32_t intern_resource(std::string_view name);
        std::uint32_t intern_key(std::string_view key);

        std::optional<std::uint32_t> find_source(std::string_view prefix) const;
        std::optional<std::uint32_t> find_resource(std::string_view name) const;
        std::optional<std::uint32_t> find_key(std::string_view key) const;

        const std::string& source_name(std::uint32_t id) const { return m_sources.at(id); }
        const std::string& resource_name(std::uint32_t id) const { return m_resources.at(id); }
        const std::string& key_name(std::uint32_t id) const { return m_keys.at(id); }
        std::size_t source_count() const noexcept { return m_sources.size(); }
        std::size_t resource_count() const noexcept { return m_resources.size(); }

        std::string arrival_name(std::uint32_t source, std::uint64_t index) const;
        std::string arrival_name(const ArrivalRecord& r) const { return arrival_name(r.source, r.index); }

        void add(const ArrivalRecord& r) { m_arrivals.push_back(r); }
        void add(const ResourceRecord& r) { m_resource_records.push_back(r); }
        void add(const AttributeRecord& r) { m_attributes.push_back(r); }

        /// Records of arrivals still in the system, rebuilt at the end of every run.
        void set_ongoing(std::vector<ArrivalRecord> records) { m_ongoing = std::move(records); }

        const std::vector<ArrivalRecord>& ended() const noexcept { return m_arrivals; }
        const std::vector<ArrivalRecord>& ongoing() const noexcept { return m_ongoing; }
        const std::vector<ResourceRecord>& resources() const noexcept { return m_resource_records; }
        const std::vector<AttributeRecord>& attributes() const noexcept { return m_attributes; }

        void reserve_arrivals(std::size_t n) { m_arrivals.reserve(n); }

    private:
        static std::uint32_t intern(std::vector<std::string>& names,
                                    std::unordered_map<std::string, std::uint32_t>& ids, std::string_view name);

        std::vector<std::string> m_sources;
        std::unordered_map<std::string, std::uint32_t> m_source_ids;
        std::vector<std::string> m_resources;
        std::unordered_map<std::string, std::uint32_t> m_resource_ids;
        std::vector<std::string> m_keys;
        std::unordered_map<std::string, std::uint32_t> m_key_ids;

        std::vector<ArrivalRecord> m_arrivals;
        std::vector<ArrivalRecord> m_ongoing;
        std::vector<ResourceRecord> m_resource_records;
        std::vector<AttributeRecord> m_attributes;
    };

    /// Lifecycle view (per_resource=false) or per-resource visit view, ended
    /// and ongoing records together, ordered by end_time then name.
    std::vector<ArrivalRecord> get_mon_arrivals(const MonitorStore& store, bool per_resource);

    const std::vector<ResourceRecord>& get_mon_resources(const MonitorStore& store);
    const std::vector<AttributeRecord>& get_mon_attributes(const MonitorStore& store);

    /// Per-visit waiting time end - start - activity (plus activity when
    /// include_service). Unfinished visits are skipped. Throws
    /// std::invalid_argument when given lifecycle records.
    std::vector<double> queueing_delay(const std::vector<ArrivalRecord>& per_resource, bool include_service = false);

    double queueing_delay(const ArrivalRecord& visit, bool include_service = false);

    /// Shortest decimal that parses back to the same double.
    std::string format_real(double value);

    inline constexpr std::string_view kArrivalsHeader = "name,start_time,end_time,activity_time,finished,resource,replication";
    inline constexpr std::string_view kResourcesHeader = "resource,time,server,queue,capacity,queue_size,replication";
    inline constexpr std::string_view kAttributesHeader = "time,name,key,value,replication";

    /// Writes arrivals.csv, resources.csv and attributes.csv into `directory`
    /// (created if needed). Throws std::filesystem::filesystem_error or
    /// CsvError naming the offending path.
    void export_csv(const MonitorStore& store, const std::filesystem::path& directory);

    /// Reads the three files written by export_csv back into a store.
    MonitorStore load_csv(const std::filesystem::path& directory);
}
