#pragma once

#include <stdexcept>
#include <string>

namespace tide {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// dataset / schema
struct ParseError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct TaskMismatch : Error { using Error::Error; };
struct EmptySplit : Error { using Error::Error; };

// prompting
struct UnknownTemplate : Error { using Error::Error; };
struct MissingBinding : Error { using Error::Error; };
struct NoObjectFound : Error { using Error::Error; };
struct SchemaViolation : Error { using Error::Error; };
struct ScoreOutOfRange : Error { using Error::Error; };
struct UnparseableRecord : Error { using Error::Error; };

// gateway
struct BackendUnavailable : Error { using Error::Error; };
struct AuthError : Error { using Error::Error; };
struct ResponseEmpty : Error { using Error::Error; };
struct ScriptExhausted : Error { using Error::Error; };

// engine / metrics
struct NoCandidates : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct MissingLog : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace tide
