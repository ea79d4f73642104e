#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cascade {

// Flat key-value run configuration: one `key = value` per line, '#' comments.
// CLI --set overrides land on top of the file contents.
class Config {
public:
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

// Inventory of a command run: the config snapshot, seed, version tag and
// every file the command produced. Written last, so a complete manifest
// implies a complete run.
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    std::string version;
    std::vector<std::string> outputs;
};

void write_manifest(const RunManifest& manifest, const std::string& out_dir);

} // namespace cascade
