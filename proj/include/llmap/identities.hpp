#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace llmap {

/// One exact algebraic identity checked over many random matrices. Errors are
/// scaled by the magnitude of the quantities compared, floored at 1.
struct IdentityCheck {
  std::string name;
  double max_error = 0.0;
  double tolerance = 1e-9;
  std::size_t trials = 0;
  bool passed() const { return max_error <= tolerance; }
};

struct IdentityConfig {
  std::size_t trials = 100;
  std::size_t min_models = 2, max_models = 20;
  std::size_t min_texts = 2, max_texts = 200;
  double tolerance = 1e-9;
  std::uint64_t seed = 0;
};

/// Height decomposition, centering zero means, idempotence and linearity,
/// error-term absorption, log-likelihood reconstruction and the variance form
/// of the divergence, each on `trials` random K x N matrices.
std::vector<IdentityCheck> check_identities(const IdentityConfig& cfg);

std::string format_identity_checks(const std::vector<IdentityCheck>& checks);

}  // namespace llmap
