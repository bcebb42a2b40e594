#ifndef NFI_ERROR_HPP
#define NFI_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nfi {

/// Broad failure classes. The CLI maps io/format to exit code 1 and
/// contract/degenerate to exit code 2.
enum class ErrorKind { io, format, contract, degenerate };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error{what}, kind_{kind} {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string &what) : Error{ErrorKind::io, what} {}
};

/// Malformed or unsupported input bytes/text.
class FormatError : public Error {
public:
    explicit FormatError(const std::string &what) : Error{ErrorKind::format, what} {}
};

/// Binary decode failure at a known byte offset.
class DecodeError : public FormatError {
public:
    DecodeError(const std::string &description, std::size_t offset)
        : FormatError{description + " at byte offset " + std::to_string(offset)},
          description_{description}, offset_{offset} {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string &description() const noexcept { return description_; }

    /// Same error, prefixed with the file it came from.
    DecodeError in_file(const std::string &path) const { return DecodeError{path + ": " + description_, offset_}; }

private:
    std::string description_;
    std::size_t offset_;
};

/// Caller broke a documented precondition.
class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string &what) : Error{ErrorKind::contract, what} {}
};

/// Input is well-formed but cannot support the requested computation
/// (single-class data, too few flows per class, unknown labels...).
class DegenerateInput : public Error {
public:
    explicit DegenerateInput(const std::string &what) : Error{ErrorKind::degenerate, what} {}
};

int exit_code_for(ErrorKind kind) noexcept;

} // namespace nfi

#endif // NFI_ERROR_HPP
