#pragma once

#include <stdexcept>
#include <string>

namespace eelsim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain argument.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Joint count, vertebra count or node index that does not fit the chain.
class TopologyError : public Error {
public:
    using Error::Error;
};

/// CAN frame with a bad id, dlc or payload size.
class InvalidFrame : public Error {
public:
    using Error::Error;
};

/// Scenario or command that cannot be parsed. Carries the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& detail)
        : Error(key.empty() ? detail : key + ": " + detail), key_(std::move(key)), detail_(detail) {}

    const std::string& key() const noexcept { return key_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string key_;
    std::string detail_;
};

/// A finite resource (air reserve, battery) ran out.
class ExhaustionError : public Error {
public:
    using Error::Error;
};

}  // namespace eelsim
