#pragma once

#include <stdexcept>
#include <string>

namespace recur {

enum class ErrorCode {
    BAD_INPUT,
    EMPTY_INPUT,
    PANEL_TOO_SHORT,
    DEGENERATE_ARM,
    NO_EVENTS,
    NON_CONVERGENCE,
    MONOTONE_LIKELIHOOD,
    ZERO_COUNT_ARM,
    INSUFFICIENT_EVENTS,
    RECRUIT_OVERRUN,
    HR_ONE,
    TOO_FEW_REPLICATES
};

const char* error_name(ErrorCode code);

// Data and validation problems map to exit code 2, numerical failures to 3.
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}  // namespace recur
