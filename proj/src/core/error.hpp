#pragma once

#include <stdexcept>
#include <string>

namespace plotpath {

enum class ErrorCode {
    invalid_argument,
    config,
    provider,
    cassette_miss,
    no_rule,
    parse_failure,
    empty_code,
    transport_unavailable,
    storage_unavailable,
    corrupt_record,
    suite,
    scoring_failure,
    budget_exceeded,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure the engine reports carries one of the codes above. The C API
/// maps them 1:1 onto pp_status values.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace plotpath
