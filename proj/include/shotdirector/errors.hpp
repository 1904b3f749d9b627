#pragma once

#include <stdexcept>
#include <string>

namespace shotdirector {

/// Precondition or invariant violation on caller-supplied values.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Input file parsed but its content is malformed or violates an invariant.
class LoadError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace shotdirector
