#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "certismooth/types.hpp"

namespace certismooth::config {

// Plain-text key-value configuration: one "section.key = value" per line,
// '#' starts a comment. Every key can be overridden by a --section.key=value
// flag; CERTISMOOTH_SEED overrides run.seed last.
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    long get_long(const std::string& key, long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

struct CliInvocation {
    std::string command;
    Config cfg;
};

// argv: <command> [--config=FILE] [--section.key=value ...]
CliInvocation parse_cli(int argc, const char* const* argv);

}  // namespace certismooth::config
