#include "mdelab/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mdelab {

std::string format_sci(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", digits, v);
  return buf;
}

LineFit fit_line(const RVector& x, const RVector& y) {
  const auto n = x.size();
  if (n < 2 || y.size() != n) throw TooFewPoints("fit_line: need >= 2 points");
  const double mx = x.mean(), my = y.mean();
  const RVector dx = x.array() - mx, dy = y.array() - my;
  const double sxx = dx.squaredNorm();
  if (sxx == 0.0) throw TooFewPoints("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = dx.dot(dy) / sxx;
  f.intercept = my - f.slope * mx;
  const double syy = dy.squaredNorm();
  f.r2 = syy == 0.0 ? 1.0 : (f.slope * f.slope * sxx) / syy;
  return f;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw TooFewPoints("quantile: empty sample");
  q = std::clamp(q, 0.0, 1.0);
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const auto lo = static_cast<size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

}  // namespace mdelab
