#include "certismooth/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace certismooth::config {

namespace {

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    Config cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string stripped = trim(line);
        if (stripped.empty()) continue;
        auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: missing '=' at " + path + ":" + std::to_string(lineno));
        }
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config: empty key at " + path + ":" + std::to_string(lineno));
        }
        cfg.kv_[key] = value;
    }
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) { kv_[key] = value; }

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

std::string Config::require_string(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("config: missing required key " + key);
    return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        std::size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key " + key + " is not a number: " + it->second);
    }
}

int Config::get_int(const std::string& key, int fallback) const {
    return static_cast<int>(get_long(key, fallback));
}

long Config::get_long(const std::string& key, long fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        std::size_t pos = 0;
        long v = std::stol(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key " + key + " is not an integer: " + it->second);
    }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("config: key " + key + " is not an unsigned integer: " + it->second);
    }
}

std::vector<double> Config::get_double_list(const std::string& key,
                                            const std::vector<double>& fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string field;
    while (std::getline(ss, field, ',')) {
        field = trim(field);
        if (field.empty()) continue;
        try {
            out.push_back(std::stod(field));
        } catch (const std::exception&) {
            throw ConfigError("config: key " + key + " has a non-numeric entry: " + field);
        }
    }
    if (out.empty()) throw ConfigError("config: key " + key + " is an empty list");
    return out;
}

CliInvocation parse_cli(int argc, const char* const* argv) {
    if (argc < 2) throw ConfigError("usage: certismooth <command> [--config=FILE] "
                                    "[--section.key=value ...]");
    CliInvocation inv;
    inv.command = argv[1];
    // collect flag overrides first so --config content does not clobber them
    std::vector<std::pair<std::string, std::string>> overrides;
    std::string config_path;
    for (int i = 2; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg.rfind("--", 0) != 0) {
            throw ConfigError("config: unexpected positional argument " + arg);
        }
        arg = arg.substr(2);
        auto eq = arg.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: flag --" + arg + " needs =value");
        }
        std::string key = arg.substr(0, eq);
        std::string value = arg.substr(eq + 1);
        if (key == "config") {
            config_path = value;
        } else {
            overrides.emplace_back(key, value);
        }
    }
    if (!config_path.empty()) inv.cfg = Config::from_file(config_path);
    for (const auto& [key, value] : overrides) inv.cfg.set(key, value);
    if (const char* env_seed = std::getenv("CERTISMOOTH_SEED")) {
        inv.cfg.set("run.seed", env_seed);
    }
    return inv;
}

}  // namespace certismooth::config
