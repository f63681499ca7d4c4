#pragma once
// Error hierarchy shared across modules. Data-level findings (validation
// violations, audit flags) travel as report values, not exceptions; these
// types cover genuine faults.

#include <stdexcept>
#include <string>

namespace htmlcure {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Precondition or range violation on a pure operation.
struct DomainError : Error {
    using Error::Error;
};

// Malformed input file or record; carries item/field context when known.
struct ValidationError : Error {
    ValidationError(std::string item, std::string path, const std::string& what)
        : Error(what), item_id(std::move(item)), field_path(std::move(path)) {}
    std::string item_id;
    std::string field_path;
};

// Model output that does not satisfy its declared schema.
struct ParseError : Error {
    ParseError(std::string at, const std::string& what) : Error(what), path(std::move(at)) {}
    std::string path;
};

// Provider exhausted retries or refused.
struct ProviderError : Error {
    using Error::Error;
};

struct TimeoutError : Error {
    using Error::Error;
};

// Browser backend connection loss or protocol-level failure.
struct TransportError : Error {
    using Error::Error;
};

// Exact-substring patch could not be applied.
struct PatchError : Error {
    enum class Reason { absent, ambiguous };
    PatchError(Reason r, const std::string& what) : Error(what), reason(r) {}
    Reason reason;
};

// Bad run configuration (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

} // namespace htmlcure
