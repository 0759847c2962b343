#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace certismooth {

using Vec = std::vector<double>;

// Config/data/training failures map to distinct CLI exit codes (2/3/4).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace certismooth
