#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lfqa {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `line` is 1-based; 0 when not line-oriented.
class ParseError : public Error {
  public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), m_line(line)
    {}
    std::size_t line() const noexcept { return m_line; }

  private:
    std::size_t m_line;
};

class ConflictError : public Error {
  public:
    using Error::Error;
};

/// A file is missing, unreadable or unwritable.
class IoError : public Error {
  public:
    using Error::Error;
};

class InvalidArgument : public Error {
  public:
    using Error::Error;
};

class DimensionError : public InvalidArgument {
  public:
    using InvalidArgument::InvalidArgument;
};

/// A provider answered, but the payload broke the wire contract.
class ProtocolError : public Error {
  public:
    using Error::Error;
};

/// A provider could not be reached or did not answer in time.
class TransportError : public Error {
  public:
    using Error::Error;
};

}  // namespace lfqa
