#include "nowcast/config.hpp"

#include <fstream>
#include <sstream>

#include "nowcast/common.hpp"

namespace nowcast {

namespace {
std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}
}  // namespace

KvConfig KvConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file '" + path + "'");
    KvConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("'" + path + "' line " + std::to_string(lineno) +
                              ": expected key = value");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void KvConfig::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : items_)
        if (k == key) {
            v = value;
            return;
        }
    items_.emplace_back(key, value);
}

const std::string* KvConfig::find(const std::string& key) const {
    for (const auto& [k, v] : items_)
        if (k == key) return &v;
    return nullptr;
}

bool KvConfig::has(const std::string& key) const { return find(key) != nullptr; }

std::string KvConfig::get_str(const std::string& key, const std::string& fallback) const {
    const std::string* v = find(key);
    return v ? *v : fallback;
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        const std::int64_t out = std::stoll(*v, &used);
        if (used != v->size()) throw std::invalid_argument("");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' has non-integer value '" + *v + "'");
    }
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        const double out = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument("");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' has non-numeric value '" + *v + "'");
    }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
    if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
    throw ConfigError("config key '" + key + "' has non-boolean value '" + *v + "'");
}

std::vector<int> KvConfig::get_int_list(const std::string& key,
                                        const std::vector<int>& fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    std::vector<int> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' has non-integer element '" + item + "'");
        }
    }
    return out;
}

std::vector<std::string> KvConfig::get_str_list(const std::string& key) const {
    const std::string* v = find(key);
    std::vector<std::string> out;
    if (!v) return out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void KvConfig::require_known(const std::set<std::string>& known) const {
    std::string unknown;
    for (const auto& [k, v] : items_)
        if (!known.count(k)) unknown += unknown.empty() ? k : ", " + k;
    if (!unknown.empty()) throw ConfigError("unknown config key(s): " + unknown);
}

std::string KvConfig::serialize() const {
    std::string out;
    for (const auto& [k, v] : items_) out += k + " = " + v + "\n";
    return out;
}

void KvConfig::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config to '" + path + "'");
    out << serialize();
}

}  // namespace nowcast
