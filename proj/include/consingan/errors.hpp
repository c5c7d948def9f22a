#pragma once

#include <stdexcept>
#include <string>

namespace consingan {

// Error taxonomy. Every category maps to one CLI error line and exit code.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    virtual const char* category() const noexcept { return "error"; }
};

struct InvalidArgumentError : Error {
    using Error::Error;
    const char* category() const noexcept override { return "invalid-argument"; }
};

struct IoError : Error {
    using Error::Error;
    const char* category() const noexcept override { return "io"; }
};

// Non-finite losses, failed matrix square roots, and similar numeric blowups.
struct NumericError : Error {
    using Error::Error;
    const char* category() const noexcept override { return "numeric"; }
};

struct CorruptionError : Error {
    using Error::Error;
    const char* category() const noexcept override { return "corruption"; }
};

struct IncompatibilityError : Error {
    using Error::Error;
    const char* category() const noexcept override { return "incompatibility"; }
};

struct InternalError : Error {
    using Error::Error;
    const char* category() const noexcept override { return "internal"; }
};

}  // namespace consingan
