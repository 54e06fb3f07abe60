#pragma once

#include <stdexcept>
#include <string>

namespace splitpipe {

// Exit codes used by the CLI. Library code throws the exceptions below;
// the CLI maps them at the top level.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitValidation = 3,
    kExitRuntime = 4,
    kExitTimeout = 5,
};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input text (profile files, CSV, CLI value syntax).
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid input that violates an invariant. Messages name the
// offending field/block.
struct ValidationError : Error {
    using Error::Error;
};

// Wire-protocol violations: bad magic, unknown type, truncation, checksum
// mismatch, unexpected frame.
struct ProtocolError : Error {
    using Error::Error;
};

// I/O failures: connect refused, send/recv errors, subprocess failures.
struct IoError : Error {
    using Error::Error;
};

// A deadline expired while waiting for a result or a connection.
struct TimeoutError : Error {
    using Error::Error;
};

}  // namespace splitpipe
