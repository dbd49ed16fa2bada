#include "mfglm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mfglm/error.hpp"

namespace mfglm {

std::string trim(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, sep)) {
        auto t = trim(item);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
    KeyValueConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument(origin + ":" + std::to_string(lineno) + ": expected key=value");
        }
        auto key = trim(line.substr(0, eq));
        if (key.empty()) throw InvalidArgument(origin + ":" + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

namespace {
template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto* begin = text.data();
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw InvalidArgument("config key '" + key + "': cannot parse '" + text + "'");
    }
    return value;
}
}  // namespace

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    auto v = get(key);
    return v ? parse_number<long long>(key, *v) : fallback;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto v = get(key);
    return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    return v ? parse_number<double>(key, *v) : fallback;
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, std::vector<double> fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(*v)) out.push_back(parse_number<double>(key, item));
    return out;
}

std::vector<long long> KeyValueConfig::get_ints(const std::string& key, std::vector<long long> fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::vector<long long> out;
    for (const auto& item : split_list(*v)) out.push_back(parse_number<long long>(key, item));
    return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key,
                                                     std::vector<std::string> fallback) const {
    auto v = get(key);
    return v ? split_list(*v) : fallback;
}

void KeyValueConfig::require_keys_in(const std::vector<std::string>& valid) const {
    for (const auto& [key, value] : values_) {
        bool ok = false;
        for (const auto& v : valid) ok = ok || v == key;
        if (!ok) {
            std::string msg = "unknown config key '" + key + "'; valid keys:";
            for (const auto& v : valid) msg += " " + v;
            throw InvalidArgument(msg);
        }
    }
}

}  // namespace mfglm
