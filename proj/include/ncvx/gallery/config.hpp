#ifndef NCVX_GALLERY_CONFIG_HPP
#define NCVX_GALLERY_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <system_error>

namespace ncvx {

/// Invalid or unknown configuration entry. `key()` names the offender.
class ConfigError : public std::invalid_argument
{
public:
    ConfigError(std::string key, const std::string& what)
        : std::invalid_argument(key + ": " + what), key_(std::move(key))
    {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Flat key/value configuration; values kept as text until read.
using ConfigMap = std::map<std::string, std::string>;

/// 17 significant digits; round-trips every double exactly.
inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Typed reads from a ConfigMap that remember which keys were consumed.
class ConfigReader
{
public:
    explicit ConfigReader(const ConfigMap& map) : map_(map) {}

    double real(const std::string& key, double def)
    {
        const std::string* s = find(key);
        if (!s) return def;
        try {
            std::size_t used = 0;
            const double v = std::stod(*s, &used);
            if (used != s->size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(key, "expected a number, got '" + *s + "'");
        }
    }

    std::int64_t integer(const std::string& key, std::int64_t def)
    {
        const std::string* s = find(key);
        if (!s) return def;
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
        if (ec != std::errc{} || ptr != s->data() + s->size())
            throw ConfigError(key, "expected an integer, got '" + *s + "'");
        return v;
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def)
    {
        const std::string* s = find(key);
        if (!s) return def;
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
        if (ec != std::errc{} || ptr != s->data() + s->size())
            throw ConfigError(key, "expected a non-negative integer, got '" + *s + "'");
        return v;
    }

    std::string text(const std::string& key, const std::string& def)
    {
        const std::string* s = find(key);
        return s ? *s : def;
    }

    bool boolean(const std::string& key, bool def)
    {
        const std::string* s = find(key);
        if (!s) return def;
        if (*s == "true" || *s == "1") return true;
        if (*s == "false" || *s == "0") return false;
        throw ConfigError(key, "expected true or false, got '" + *s + "'");
    }

    /// Throws on the first key that no read consumed.
    void reject_unknown() const
    {
        for (const auto& [k, v] : map_)
            if (!used_.contains(k)) throw ConfigError(k, "unknown key");
    }

private:
    const std::string* find(const std::string& key)
    {
        used_.insert(key);
        auto it = map_.find(key);
        return it == map_.end() ? nullptr : &it->second;
    }

    const ConfigMap& map_;
    std::set<std::string> used_;
};

inline void require_config(bool ok, const std::string& key, const std::string& what)
{
    if (!ok) throw ConfigError(key, what);
}

} // namespace ncvx

#endif // NCVX_GALLERY_CONFIG_HPP
