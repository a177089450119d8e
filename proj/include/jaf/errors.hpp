#pragma once

#include <stdexcept>
#include <string>

namespace jaf {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };
struct TooFewPoints : Error { using Error::Error; };
struct NoInformativeSplit : Error { using Error::Error; };
struct EmptyReference : Error { using Error::Error; };
struct ReferenceIsWholeRegion : Error { using Error::Error; };
struct UnknownField : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct EmptyProfile : Error { using Error::Error; };

// Transport or protocol failure talking to an agent (simulated agents never throw this).
struct AgentError : Error { using Error::Error; };

}  // namespace jaf
