#pragma once

// Orientation and in-circle tests with a floating-point filter and an exact
// rational fallback. The filter constants are the standard forward error
// bounds for the double-precision determinant expansions.

#include <cmath>
#include <limits>

#include <boost/multiprecision/cpp_int.hpp>

#include "penalflow/geometry.hpp"

namespace penalflow::predicates {

namespace detail {

using Rational = boost::multiprecision::cpp_rational;

inline constexpr double kEps = std::numeric_limits<double>::epsilon() / 2.0;
inline constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
inline constexpr double kInCircleBound = (10.0 + 96.0 * kEps) * kEps;

inline int sign(const Rational& r) { return r > 0 ? 1 : (r < 0 ? -1 : 0); }

inline int orient_exact(Point a, Point b, Point c) {
  const Rational acx = Rational(a.x) - Rational(c.x);
  const Rational bcx = Rational(b.x) - Rational(c.x);
  const Rational acy = Rational(a.y) - Rational(c.y);
  const Rational bcy = Rational(b.y) - Rational(c.y);
  return sign(acx * bcy - acy * bcx);
}

inline int incircle_exact(Point a, Point b, Point c, Point d) {
  const Rational adx = Rational(a.x) - Rational(d.x);
  const Rational ady = Rational(a.y) - Rational(d.y);
  const Rational bdx = Rational(b.x) - Rational(d.x);
  const Rational bdy = Rational(b.y) - Rational(d.y);
  const Rational cdx = Rational(c.x) - Rational(d.x);
  const Rational cdy = Rational(c.y) - Rational(d.y);
  const Rational alift = adx * adx + ady * ady;
  const Rational blift = bdx * bdx + bdy * bdy;
  const Rational clift = cdx * cdx + cdy * cdy;
  const Rational det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                       clift * (adx * bdy - bdx * ady);
  return sign(det);
}

}  // namespace detail

/// +1 if a, b, c turn counterclockwise, -1 if clockwise, 0 if collinear.
inline int orient(Point a, Point b, Point c) {
  const double left = (a.x - c.x) * (b.y - c.y);
  const double right = (a.y - c.y) * (b.x - c.x);
  const double det = left - right;
  const double bound = detail::kOrientBound * (std::fabs(left) + std::fabs(right));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return detail::orient_exact(a, b, c);
}

/// +1 if d lies strictly inside the circle through the counterclockwise
/// triangle (a, b, c), -1 if strictly outside, 0 if cocircular.
inline int incircle(Point a, Point b, Point c, Point d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;

  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;

  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) +
                     clift * (adxbdy - bdxady);
  const double permanent = (std::fabs(bdxcdy) + std::fabs(cdxbdy)) * alift +
                           (std::fabs(cdxady) + std::fabs(adxcdy)) * blift +
                           (std::fabs(adxbdy) + std::fabs(bdxady)) * clift;
  const double bound = detail::kInCircleBound * permanent;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return detail::incircle_exact(a, b, c, d);
}

}  // namespace penalflow::predicates
