#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace uedsr {

// Flat "key = value" text configuration. '#' starts a comment. Lookups are
// recorded so callers can reject keys nobody asked for.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(std::string_view text, std::string source = "<string>");
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    template <typename T>
    void set(const std::string& key, T value) { values_[key] = format(value); }

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_uint64(const std::string& key) const;
    std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<long long> get_int_list(const std::string& key) const;

    // Keys present in the file that were never looked up.
    std::vector<std::string> unused_keys() const;
    void mark_used(const std::string& key) const { used_.insert(key); }

    const std::map<std::string, std::string>& entries() const noexcept { return values_; }
    const std::string& source() const noexcept { return source_; }

    std::string dump() const;
    void save(const std::filesystem::path& path) const;

    static std::string format(double value);
    static std::string format(long long value) { return std::to_string(value); }
    static std::string format(int value) { return std::to_string(value); }
    static std::string format(std::uint64_t value) { return std::to_string(value); }
    static std::string format(std::int64_t value) { return std::to_string(value); }
    static std::string format(bool value) { return value ? "true" : "false"; }
    static std::string format(const std::string& value) { return value; }
    static std::string format(const char* value) { return value; }

private:
    const std::string& raw(const std::string& key) const;

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
    std::string source_;
};

}  // namespace uedsr
