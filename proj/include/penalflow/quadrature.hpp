#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "penalflow/errors.hpp"

namespace penalflow {

/// Symmetric Gauss rule on the reference triangle {(0,0),(1,0),(0,1)}.
/// Points are barycentric (l0, l1, l2); weights sum to the reference area 1/2.
struct QuadratureRule {
  int degree = 0;
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

namespace detail {

inline void add_orbit3(QuadratureRule& r, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  r.points.push_back({b, a, a});
  r.points.push_back({a, b, a});
  r.points.push_back({a, a, b});
  for (int i = 0; i < 3; ++i) r.weights.push_back(w);
}

inline void add_orbit6(QuadratureRule& r, double a, double b, double w) {
  const double c = 1.0 - a - b;
  for (const auto& p : {std::array<double, 3>{a, b, c}, std::array<double, 3>{a, c, b},
                        std::array<double, 3>{b, a, c}, std::array<double, 3>{b, c, a},
                        std::array<double, 3>{c, a, b}, std::array<double, 3>{c, b, a}}) {
    r.points.push_back(p);
    r.weights.push_back(w);
  }
}

}  // namespace detail

/// Dunavant rules of degree 1..6 (weights normalised to the unit triangle
/// before scaling by 1/2).
inline QuadratureRule quadrature_rule(int degree) {
  QuadratureRule r;
  r.degree = degree;
  switch (degree) {
    case 1:
      r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      r.weights.push_back(1.0);
      break;
    case 2:
      detail::add_orbit3(r, 1.0 / 6.0, 1.0 / 3.0);
      break;
    case 3:
      r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      r.weights.push_back(-27.0 / 48.0);
      detail::add_orbit3(r, 0.2, 25.0 / 48.0);
      break;
    case 4:
      detail::add_orbit3(r, 0.445948490915965, 0.223381589678011);
      detail::add_orbit3(r, 0.091576213509771, 0.109951743655322);
      break;
    case 5: {
      const double s = std::sqrt(15.0);
      r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      r.weights.push_back(9.0 / 40.0);
      detail::add_orbit3(r, (6.0 - s) / 21.0, (155.0 - s) / 1200.0);
      detail::add_orbit3(r, (6.0 + s) / 21.0, (155.0 + s) / 1200.0);
      break;
    }
    case 6:
      detail::add_orbit3(r, 0.249286745170910, 0.116786275726379);
      detail::add_orbit3(r, 0.063089014491502, 0.050844906370207);
      detail::add_orbit6(r, 0.053145049844817, 0.310352451033784, 0.082851075618374);
      break;
    default:
      throw ConfigError("unsupported quadrature degree " + std::to_string(degree) +
                        " (supported: 1..6)");
  }
  double sum = 0.0;
  for (double w : r.weights) sum += w;
  for (double& w : r.weights) w *= 0.5 / sum;
  return r;
}

}  // namespace penalflow
