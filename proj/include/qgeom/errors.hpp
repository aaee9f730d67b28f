#pragma once

#include <stdexcept>
#include <string>

namespace qgeom {

/// Caller supplied inconsistent arguments (dimension mismatch, bad index, ...).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to meet its accuracy contract.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Evaluation requested outside the domain of a schedule.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// sigma_H fell below the degeneracy threshold; Delta h and a_H are undefined.
class DegenerateStateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration document. `path()` is a JSON path such as "$.schedule.family".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path + ": " + message), path_(std::move(path)) {}

    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace qgeom
