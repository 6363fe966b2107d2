#pragma once

#include <stdexcept>
#include <string>

namespace evermap {

/// Malformed configuration (too few basis functions, bad step counts, ...).
class InvalidConfiguration : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain on which a quantity is defined.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Input data violating a structural requirement (open loop, non-monotone branch, ...).
class InvalidData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable or syntactically broken file content.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace evermap
