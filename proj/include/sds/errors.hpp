#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sds {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// malformed eDRS text or sentence outside the fragment
struct ParseError : Error {
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " (at position " + std::to_string(position) + ")"), position(position) {}
    explicit ParseError(const std::string& what) : Error(what), position(0) {}
    std::size_t position;
};

// structural problems in a knowledge base
struct KbError : Error {
    using Error::Error;
};

// missing or unreadable input file
struct FileError : Error {
    using Error::Error;
};

struct InferError : Error {
    using Error::Error;
};

// rejection sampling exhausted its attempt budget before reaching the requested count
struct StarvationError : InferError {
    StarvationError(long long attempts, long long accepted, long long requested)
        : InferError("rejection sampling starved: " + std::to_string(accepted) + "/" +
                     std::to_string(requested) + " samples accepted after " +
                     std::to_string(attempts) + " attempts"),
          attempts(attempts),
          accepted(accepted),
          requested(requested) {}
    long long attempts;
    long long accepted;
    long long requested;
};

// exact enumeration refused: knowledge base too large for the enumeration guard
struct EnumerationBoundError : InferError {
    using InferError::InferError;
};

}  // namespace sds
