#include "evtraffic/error.hpp"

namespace evtraffic {
namespace {

std::string join_violations(const std::vector<std::string>& violations) {
  std::string out = "validation failed";
  for (const auto& v : violations) {
    out += "\n  " + v;
  }
  return out;
}

std::string describe_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::string out = "no path for";
  for (const auto& [o, d] : pairs) {
    out += " " + o + "->" + d;
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

NoPathError::NoPathError(std::string origin, std::string dest)
    : NoPathError(std::vector<std::pair<std::string, std::string>>{{std::move(origin), std::move(dest)}}) {}

NoPathError::NoPathError(std::vector<std::pair<std::string, std::string>> pairs)
    : std::runtime_error(describe_pairs(pairs)), pairs_(std::move(pairs)) {}

}  // namespace evtraffic
