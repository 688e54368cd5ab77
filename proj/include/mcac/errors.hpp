#pragma once

#include <stdexcept>
#include <string>

namespace mcac {

// Every module reports failures through one of these. The CLI maps
// ConfigError to exit code 2 and everything else to exit code 3.

class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, const std::string& module = "config")
        : Error(module, what) {}
};

// An action outside 1..N reached the environment.
class ActionError : public Error {
public:
    explicit ActionError(const std::string& what) : Error("channel-env", what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error("tinynet", what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what, const std::string& module = "tinynet")
        : Error(module, what) {}
};

class CheckpointError : public Error {
public:
    explicit CheckpointError(const std::string& what) : Error("checkpoint", what) {}
};

}  // namespace mcac
