#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace bbmlab {

// Sectioned key-value configuration ("[section]" headers, "key = value"
// lines, '#'/';' comments). Keys are flattened to "section.key". Values
// stay strings until typed access.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    // Sorted "key=value" lines; the digest is stable under key reordering
    // because the map iterates in key order.
    std::string canonical() const;
    std::string digest() const;

private:
    std::map<std::string, std::string> values_;
};

// FNV-1a 64 as a lowercase hex string.
std::string fnv1a_hex(const std::string& data);

} // namespace bbmlab
