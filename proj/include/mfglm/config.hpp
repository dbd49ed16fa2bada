#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mfglm {

/// key=value settings with '#' comments, as read from scenario files.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValueConfig load(const std::string& path);

    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    std::optional<std::string> get(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;

    /// Comma-separated list; a scalar value yields a single element.
    std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
    std::vector<long long> get_ints(const std::string& key, std::vector<long long> fallback) const;
    std::vector<std::string> get_strings(const std::string& key, std::vector<std::string> fallback) const;

    /// Throws InvalidArgument naming the offending key and listing the valid ones.
    void require_keys_in(const std::vector<std::string>& valid) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& text, char sep = ',');
std::string trim(const std::string& text);

}  // namespace mfglm
