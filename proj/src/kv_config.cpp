#include "liftgan/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace liftgan {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as a number");
    }
    return value;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
    KeyValueConfig config;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        config.values_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
    }
    return config;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    // Accept integral values written in scientific notation, e.g. t_max=1e6.
    if (v->find_first_of("eE.") != std::string::npos) {
        const double d = parse_number<double>(key, *v);
        const auto i = static_cast<std::int64_t>(d);
        if (static_cast<double>(i) != d) throw ConfigError("config key '" + key + "': not an integer");
        return i;
    }
    return parse_number<std::int64_t>(key, *v);
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    return parse_number<std::uint64_t>(key, *v);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    return parse_number<double>(key, *v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
    if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + *v + "'");
}

void KeyValueConfig::reject_unknown(const std::set<std::string>& known) const {
    for (const auto& [key, value] : values_) {
        if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
}

}  // namespace liftgan
