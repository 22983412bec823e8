#include "uedsr/config_file.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "uedsr/errors.hpp"

namespace uedsr {
namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string source) {
    KeyValueConfig cfg;
    cfg.source_ = std::move(source);
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ValidationError(cfg.source_ + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(std::string_view(body).substr(0, eq));
        if (key.empty()) throw ValidationError(cfg.source_ + ":" + std::to_string(line_no) + ": empty key");
        if (cfg.values_.count(key))
            throw ValidationError(cfg.source_ + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        cfg.values_[key] = trim(std::string_view(body).substr(eq + 1));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path.string());
}

const std::string& KeyValueConfig::raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError(source_ + ": missing key '" + key + "'");
    used_.insert(key);
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key) const { return raw(key); }

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? raw(key) : fallback;
}

double KeyValueConfig::get_double(const std::string& key) const {
    const std::string& text = raw(key);
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || *end != '\0')
        throw ValidationError(source_ + ": key '" + key + "' is not a number: " + text);
    return v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long long KeyValueConfig::get_int(const std::string& key) const {
    const std::string& text = raw(key);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ValidationError(source_ + ": key '" + key + "' is not an integer: " + text);
    return v;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t KeyValueConfig::get_uint64(const std::string& key) const {
    const std::string& text = raw(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ValidationError(source_ + ": key '" + key + "' is not an unsigned integer: " + text);
    return v;
}

std::uint64_t KeyValueConfig::get_uint64(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_uint64(key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& text = raw(key);
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ValidationError(source_ + ": key '" + key + "' is not a boolean: " + text);
}

std::vector<long long> KeyValueConfig::get_int_list(const std::string& key) const {
    std::vector<long long> out;
    std::stringstream in(raw(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size())
            throw ValidationError(source_ + ": key '" + key + "' has a non-integer entry: " + item);
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
        if (!used_.count(k)) out.push_back(k);
    return out;
}

std::string KeyValueConfig::format(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string KeyValueConfig::dump() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IntegrityError(path.string(), "cannot open for writing");
    out << dump();
    if (!out) throw IntegrityError(path.string(), "write failed");
}

}  // namespace uedsr
