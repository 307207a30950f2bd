#pragma once

#include <stdexcept>
#include <string>

namespace fpk {

// Error categories, mirrored one-to-one by the C API status codes.
enum class errc {
    ok = 0,
    parse,          // expression or config text failed to parse
    eval_domain,    // log/sqrt of a negative, division by zero, non-finite result
    config,         // bad or unknown config key, malformed value
    precondition,   // operation preconditions not met (e.g. dirac with save time 0)
    invalid,        // bad argument to an API call
    io,             // filesystem trouble
    numeric         // breakdown inside a numeric routine
};

struct Error : std::runtime_error {
    errc code;
    Error(errc c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

struct ParseError : Error {
    std::size_t offset;     // byte offset into the source text
    std::string expected;   // what the parser was looking for
    ParseError(std::size_t off, const std::string& exp, const std::string& msg)
        : Error(errc::parse, msg), offset(off), expected(exp) {}
};

struct EvalError : Error {
    explicit EvalError(const std::string& msg) : Error(errc::eval_domain, msg) {}
};

} // namespace fpk
