#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace evtraffic {

// Argument outside the domain of a cost function (negative or non-finite volume).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// One or more input records violate an invariant. Carries every offender.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// Destination unreachable from origin under the current network.
class NoPathError : public std::runtime_error {
 public:
  NoPathError(std::string origin, std::string dest);
  NoPathError(std::vector<std::pair<std::string, std::string>> pairs);
  const std::vector<std::pair<std::string, std::string>>& pairs() const noexcept { return pairs_; }

 private:
  std::vector<std::pair<std::string, std::string>> pairs_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evtraffic
