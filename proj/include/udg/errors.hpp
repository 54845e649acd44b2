#pragma once

#include <stdexcept>
#include <string>

namespace udg {

// Bad or missing run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable or version-mismatched artifact such as a checkpoint (CLI exit code 3).
class ArtifactError : public std::runtime_error {
public:
    explicit ArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or gradient encountered during training (CLI exit code 4).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace udg
