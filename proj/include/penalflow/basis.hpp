#pragma once

#include <array>
#include <cmath>

#include "penalflow/errors.hpp"

namespace penalflow {

enum class Family { P1, P2 };

/// Nodal Lagrange basis on the reference triangle. Node ordering is
/// v0, v1, v2 for P1 and v0, v1, v2, e01, e12, e20 for P2.
struct BasisValues {
  int count = 0;
  std::array<double, 6> value{};
  /// Gradients with respect to the reference coordinates (xi, eta), where
  /// l1 = xi and l2 = eta.
  std::array<std::array<double, 2>, 6> ref_grad{};
};

inline constexpr std::array<std::array<double, 2>, 3> kBaryGrad{{{-1.0, -1.0}, {1.0, 0.0}, {0.0, 1.0}}};

/// Evaluates the basis at barycentric coordinates `l` (nonnegative, sum 1).
inline BasisValues eval_basis(Family family, const std::array<double, 3>& l) {
  const double sum = l[0] + l[1] + l[2];
  if (std::abs(sum - 1.0) > 1e-12 || l[0] < -1e-14 || l[1] < -1e-14 || l[2] < -1e-14)
    throw InvalidInput("barycentric coordinates must be nonnegative and sum to 1");

  BasisValues b;
  if (family == Family::P1) {
    b.count = 3;
    for (int i = 0; i < 3; ++i) {
      b.value[static_cast<std::size_t>(i)] = l[static_cast<std::size_t>(i)];
      b.ref_grad[static_cast<std::size_t>(i)] = kBaryGrad[static_cast<std::size_t>(i)];
    }
    return b;
  }
  b.count = 6;
  for (std::size_t i = 0; i < 3; ++i) {
    b.value[i] = l[i] * (2.0 * l[i] - 1.0);
    const double s = 4.0 * l[i] - 1.0;
    b.ref_grad[i] = {s * kBaryGrad[i][0], s * kBaryGrad[i][1]};
  }
  constexpr std::array<std::array<std::size_t, 2>, 3> edges{{{0, 1}, {1, 2}, {2, 0}}};
  for (std::size_t e = 0; e < 3; ++e) {
    const auto [i, j] = edges[e];
    b.value[3 + e] = 4.0 * l[i] * l[j];
    b.ref_grad[3 + e] = {4.0 * (l[j] * kBaryGrad[i][0] + l[i] * kBaryGrad[j][0]),
                         4.0 * (l[j] * kBaryGrad[i][1] + l[i] * kBaryGrad[j][1])};
  }
  return b;
}

}  // namespace penalflow
