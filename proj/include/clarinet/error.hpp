#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clarinet {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument or precondition violation on a library entry point.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Malformed SMF input. `offset` is the byte position where parsing failed.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : Error(msg + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Tempo estimation could not produce a value; callers may fall back to the file tempo map.
class EstimationError : public Error {
public:
    using Error::Error;
};

enum class IndexFault {
    Corrupt,   // unreadable or structurally broken index file
    Checksum,  // payload does not match its recorded checksum
    Version,   // written by an unknown format version
    Empty,     // build produced no documents
    Mismatch,  // query configuration incompatible with the index build config
};

class IndexError : public Error {
public:
    IndexError(IndexFault fault, const std::string& msg) : Error(msg), fault_(fault) {}

    IndexFault fault() const noexcept { return fault_; }

private:
    IndexFault fault_;
};

}  // namespace clarinet
