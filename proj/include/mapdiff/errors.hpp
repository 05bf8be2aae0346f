#pragma once

#include <stdexcept>
#include <string>

namespace mapdiff {

/// Malformed or truncated on-disk container (MDV1, MDM1, MDCK).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent or out-of-range configuration, detected before any work starts.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values, divergence, or a numeric precondition that does not hold.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mapdiff

namespace mapdiff {

/// A pipeline stage failed; `stage` names it.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    [[nodiscard]] const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

}  // namespace mapdiff
