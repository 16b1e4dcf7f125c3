#pragma once

#include <map>
#include <string>

namespace qgs {

// Flat key=value run configuration. Human-editable on disk, '#' comments,
// mirrored into every checkpoint for provenance.
class Config {
public:
    static Config load(const std::string& path);
    static Config parse(const std::string& text);

    void save(const std::string& path) const;
    std::string serialize() const;  // sorted "key=value" lines

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    void set(const std::string& key, double value);
    void set(const std::string& key, int64_t value);

    // setters that keep an existing value (used to materialize defaults)
    void set_default(const std::string& key, const std::string& value);
    void set_default(const std::string& key, double value);
    void set_default(const std::string& key, int64_t value);

    std::string get(const std::string& key) const;  // throws if missing
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    int64_t get_int(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace qgs
