#include "trajsim/config.hpp"

#include "trajsim/environment.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace trajsim
{
    namespace
    {
        std::string_view trim(std::string_view s)
        {
            const auto first = s.find_first_not_of(" \t\r");
            if (first == std::string_view::npos)
            {
                return {};
            }
            const auto last = s.find_last_not_of(" \t\r");
            return s.substr(first, last - first + 1);
        }
    }

    double parse_real_value(std::string_view text, std::string_view what)
    {
        const auto s = trim(text);
        if (s == "Inf" || s == "inf")
        {
            return std::numeric_limits<double>::infinity();
        }
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
        {
            throw ConfigError(std::string(what) + ": expected a real number, got '" + std::string(s) + "'");
        }
        return v;
    }

    std::int64_t parse_int_value(std::string_view text, std::string_view what)
    {
        const auto s = trim(text);
        std::int64_t v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (!s.empty() && res.ec == std::errc{} && res.ptr == s.data() + s.size())
        {
            return v;
        }
        // Accept integral reals such as 1e6.
        const double d = parse_real_value(s, what);
        if (!std::isfinite(d) || d != std::floor(d) || std::fabs(d) > 9.0e18)
        {
            throw ConfigError(std::string(what) + ": expected an integer, got '" + std::string(s) + "'");
        }
        return static_cast<std::int64_t>(d);
    }

    std::vector<std::string> split_list(std::string_view text)
    {
        std::vector<std::string> out;
        std::size_t pos = 0;
        while (pos <= text.size())
        {
            const auto comma = text.find(',', pos);
            const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
            if (!item.empty())
            {
                out.emplace_back(item);
            }
            if (comma == std::string_view::npos)
            {
                break;
            }
            pos = comma + 1;
        }
        return out;
    }

    Config Config::parse(std::string_view text, std::string_view origin)
    {
        Config cfg;
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos < text.size())
        {
            auto end = text.find('\n', pos);
            if (end == std::string_view::npos)
            {
                end = text.size();
            }
            auto line = text.substr(pos, end - pos);
            pos = end + 1;
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string_view::npos)
            {
                line = line.substr(0, hash);
            }
            line = trim(line);
            if (line.empty())
            {
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
            {
                throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key = value");
            }
            const auto key = trim(line.substr(0, eq));
            const auto value = trim(line.substr(eq + 1));
            if (key.empty())
            {
                throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
            }
            cfg.set(std::string(key), std::string(value));
        }
        return cfg;
    }

    Config Config::load(const std::filesystem::path& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
        {
            throw ConfigError("cannot read config file '" + path.string() + "'");
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse(buf.str(), path.string());
    }

    void Config::set(std::string key, std::string value)
    {
        m_entries[std::move(key)] = std::move(value);
    }

    void Config::merge(const Config& other)
    {
        for (const auto& [k, v] : other.m_entries)
        {
            m_entries[k] = v;
        }
    }

    bool Config::has(std::string_view key) const
    {
        return find(key) != nullptr;
    }

    const std::string* Config::find(std::string_view key) const
    {
        const auto it = m_entries.find(key);
        return it == m_entries.end() ? nullptr : &it->second;
    }

    std::string Config::get_string(std::string_view key, std::string_view fallback) const
    {
        const auto* v = find(key);
        return v ? *v : std::string(fallback);
    }

    double Config::get_real(std::string_view key, double fallback) const
    {
        const auto* v = find(key);
        return v ? parse_real_value(*v, key) : fallback;
    }

    std::int64_t Config::get_int(std::string_view key, std::int64_t fallback) const
    {
        const auto* v = find(key);
        return v ? parse_int_value(*v, key) : fallback;
    }

    bool Config::get_bool(std::string_view key, bool fallback) const
    {
        const auto* v = find(key);
        if (!v)
        {
            return fallback;
        }
        const auto s = trim(*v);
        if (s == "true" || s == "1")
        {
            return true;
        }
        if (s == "false" || s == "0")
        {
            return false;
        }
        throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(s) + "'");
    }

    std::vector<double> Config::get_reals(std::string_view key, std::vector<double> fallback) const
    {
        const auto* v = find(key);
        if (!v)
        {
            return fallback;
        }
        std::vector<double> out;
        for (const auto& item : split_list(*v))
        {
            out.push_back(parse_real_value(item, key));
        }
        return out;
    }

    std::vector<std::string> Config::get_list(std::string_view key) const
    {
        const auto* v = find(key);
        return v ? split_list(*v) : std::vector<std::string>{};
    }

    void Config::require_known(const std::vector<std::string>& allowed, std::string_view context) const
    {
        std::string unknown;
        for (const auto& [key, value] : m_entries)
        {
            bool ok = false;
            for (const auto& a : allowed)
            {
                if (key == a || (!a.empty() && a.back() == '.' && key.rfind(a, 0) == 0))
                {
                    ok = true;
                    break;
                }
            }
            if (!ok)
            {
                unknown += unknown.empty() ? key : ", " + key;
            }
        }
        if (!unknown.empty())
        {
            throw ConfigError(std::string(context) + ": unknown key(s): " + unknown);
        }
    }

    std::string Config::to_string() const
    {
        std::string out;
        for (const auto& [k, v] : m_entries)
        {
            out += k + "=" + v + "\n";
        }
        return out;
    }
}
