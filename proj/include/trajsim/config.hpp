#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trajsim
{
    /// Flat `key = value` settings.
    ///
    /// One entry per line, `#` starts a comment. Values are integers, reals
    /// (with `Inf`), booleans or comma-separated lists; they are kept as text
    /// and converted when read, so a type error names the key.
    class Config
    {
    public:
        static Config parse(std::string_view text, std::string_view origin = "<string>");
        static Config load(const std::filesystem::path& path);

        void set(std::string key, std::string value);
        /// Entries of `other` override ours.
        void merge(const Config& other);

        bool has(std::string_view key) const;
        const std::map<std::string, std::string, std::less<>>& entries() const noexcept { return m_entries; }

        std::string get_string(std::string_view key, std::string_view fallback) const;
        double get_real(std::string_view key, double fallback) const;
        std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
        bool get_bool(std::string_view key, bool fallback) const;
        std::vector<double> get_reals(std::string_view key, std::vector<double> fallback) const;
        std::vector<std::string> get_list(std::string_view key) const;

        /// Throws ConfigError naming every key not in `allowed`. Keys of the
        /// form `prefix.*` are accepted when `prefix.` is listed.
        void require_known(const std::vector<std::string>& allowed, std::string_view context) const;

        /// key=value lines in key order.
        std::string to_string() const;

    private:
        const std::string* find(std::string_view key) const;

        std::map<std::string, std::string, std::less<>> m_entries;
    };

    double parse_real_value(std::string_view text, std::string_view what);
    std::int64_t parse_int_value(std::string_view text, std::string_view what);
    std::vector<std::string> split_list(std::string_view text);
}
