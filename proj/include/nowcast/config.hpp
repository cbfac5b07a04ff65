#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace nowcast {

// Flat key=value run configuration: '#' comments, later assignments win.
// Unknown keys are rejected against the per-command key set.
class KvConfig {
public:
    static KvConfig from_file(const std::string& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
    std::vector<std::string> get_str_list(const std::string& key) const;

    void require_known(const std::set<std::string>& known) const;

    // fully-resolved "key = value" text, keys in first-set order
    std::string serialize() const;
    void write(const std::string& path) const;

private:
    const std::string* find(const std::string& key) const;
    std::vector<std::pair<std::string, std::string>> items_;
};

}  // namespace nowcast
