#include "mdelab/shape.hpp"

#include <algorithm>
#include <cmath>

namespace mdelab {

namespace {

// warm-chained Richardson density evaluation used throughout the scan
class DensityProbe {
 public:
  explicit DensityProbe(const MdeSolver& s, double eta) : s_(s), eta_(eta) {}
  double operator()(double e) {
    s4_ = s_.solve(cd(e, 4.0 * eta_), s4_);
    s2_ = s_.solve(cd(e, 2.0 * eta_), s2_);
    s1_ = s_.solve(cd(e, eta_), s1_);
    return std::max((8.0 * s1_.rho() - 6.0 * s2_.rho() + s4_.rho()) / 3.0, 0.0);
  }

 private:
  const MdeSolver& s_;
  double eta_;
  MdeSolution s4_, s2_, s1_;
};

}  // namespace

double SupportScan::dist_support(double e) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& b : bands) {
    if (e >= b.lo && e <= b.hi) return 0.0;
    d = std::min({d, std::abs(e - b.lo), std::abs(e - b.hi)});
  }
  return d;
}

int SupportScan::band_of(double e) const {
  for (size_t i = 0; i < bands.size(); ++i)
    if (e >= bands[i].lo && e <= bands[i].hi) return static_cast<int>(i);
  return -1;
}

double SupportScan::cdf(double e) const {
  double acc = 0.0;
  for (Eigen::Index i = 0; i + 1 < grid.size(); ++i) {
    if (grid[i + 1] <= e) {
      acc += 0.5 * (rho[i] + rho[i + 1]) * (grid[i + 1] - grid[i]);
    } else if (grid[i] < e) {
      const double t = (e - grid[i]) / (grid[i + 1] - grid[i]);
      const double rmid = rho[i] + t * (rho[i + 1] - rho[i]);
      acc += 0.5 * (rho[i] + rmid) * (e - grid[i]);
      break;
    } else {
      break;
    }
  }
  return acc;
}

double SupportScan::quantile_location(int k, int n) const {
  const double target = (k - 0.5) / n * total_mass;
  if (k < 1 || k > n) throw SchemaError("quantile: index out of range");
  double lo = grid[0], hi = grid[grid.size() - 1];
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SupportScan scan_support(const MdeSolver& solver, ScanOptions opt) {
  if (opt.coarse < 8) throw SchemaError("scan: grid too coarse");
  SupportScan sc;
  sc.eta = opt.eta;
  DensityProbe probe(solver, opt.eta);

  // coarse pass
  RVector e = RVector::LinSpaced(opt.coarse, opt.e_min, opt.e_max);
  RVector r(opt.coarse);
  for (int i = 0; i < opt.coarse; ++i) r[i] = probe(e[i]);

  // support blocks on the coarse grid
  struct Block {
    int first, last;
  };
  std::vector<Block> blocks;
  for (int i = 0; i < opt.coarse; ++i) {
    if (r[i] <= opt.rho_floor) continue;
    if (!blocks.empty() && blocks.back().last == i - 1)
      blocks.back().last = i;
    else
      blocks.push_back({i, i});
  }
  if (blocks.empty()) throw GapCollapse("scan: no support found in the window");

  // refine each edge by bisection on the extrapolated density
  auto bisect_edge = [&](double inside, double outside) {
    for (int it = 0; it < 40 && std::abs(inside - outside) > 1e-12; ++it) {
      const double mid = 0.5 * (inside + outside);
      (probe(mid) > opt.rho_floor ? inside : outside) = mid;
    }
    return 0.5 * (inside + outside);
  };

  std::vector<double> grid, rho;
  for (const auto& b : blocks) {
    Band band;
    band.lo = b.first == 0 ? e[0] : bisect_edge(e[b.first], e[b.first - 1]);
    band.hi = b.last == opt.coarse - 1
                  ? e[opt.coarse - 1]
                  : bisect_edge(e[b.last], e[b.last + 1]);

    // graded band grid: denser toward both edges (quadratic clustering)
    const int m = std::max(24, 2 * opt.edge_points);
    std::vector<double> xs;
    xs.reserve(2 * m);
    for (int k = 0; k <= m; ++k) {
      const double u = double(k) / m;  // cluster via u^2 from both ends
      xs.push_back(band.lo + (band.hi - band.lo) * 0.5 * u * u);
      xs.push_back(band.hi - (band.hi - band.lo) * 0.5 * u * u);
    }
    std::sort(xs.begin(), xs.end());
    double mass = 0.0, prev_e = 0.0, prev_r = 0.0;
    for (size_t k = 0; k < xs.size(); ++k) {
      const double rr = probe(xs[k]);
      if (k) mass += 0.5 * (prev_r + rr) * (xs[k] - prev_e);
      grid.push_back(xs[k]);
      rho.push_back(rr);
      prev_e = xs[k], prev_r = rr;
    }
    band.mass = mass;
    sc.bands.push_back(band);
  }
  for (size_t i = 0; i + 1 < sc.bands.size(); ++i)
    sc.gaps.push_back(sc.bands[i + 1].lo - sc.bands[i].hi);

  sc.grid = Eigen::Map<const RVector>(grid.data(), grid.size());
  sc.rho = Eigen::Map<const RVector>(rho.data(), rho.size());
  for (const auto& b : sc.bands) sc.total_mass += b.mass;
  return sc;
}

SingularityInfo classify_singularity(const MdeSolver& solver,
                                     const SupportScan& scan, double e0,
                                     double window, int points) {
  if (points < 6) throw TooFewPoints("classify: need more fit points");
  DensityProbe probe(solver, scan.eta);
  SingularityInfo info;
  info.location = e0;
  const double rho0 = probe(e0);

  const double probe_off = std::max(window * 0.5, 1e-8);
  const bool left_in = probe(e0 - probe_off) > 10 * scan.eta;
  const bool right_in = probe(e0 + probe_off) > 10 * scan.eta;

  // local minimum with positive density: nearly-cusp shape, no exponent fit
  if (rho0 > std::pow(scan.eta, 0.25)) {
    info.kind = SingularityKind::SmallMinimum;
    info.gap = rho0;
    info.exponent = 0.0;
    info.r2 = 1.0;
    return info;
  }

  // one-sided growth fit rho(e0 +- x) ~ c x^p on the populated side(s)
  auto fit_side = [&](double sign) {
    RVector lx(points), ly(points);
    for (int k = 0; k < points; ++k) {
      const double x =
          window * std::pow(double(k + 1) / points, 2.0);  // graded toward e0
      lx[k] = std::log(x);
      ly[k] = std::log(std::max(probe(e0 + sign * x), 1e-300));
    }
    return fit_line(lx, ly);
  };

  if (left_in && right_in) {
    info.kind = SingularityKind::Cusp;
    const LineFit l = fit_side(-1.0), r = fit_side(+1.0);
    info.exponent = 0.5 * (l.slope + r.slope);
    info.prefactor = std::exp(0.5 * (l.intercept + r.intercept));
    info.r2 = std::min(l.r2, r.r2);
    return info;
  }
  if (!left_in && !right_in)
    throw GapCollapse("classify: no density on either side of e0");

  const double side = right_in ? +1.0 : -1.0;
  const LineFit f = fit_side(side);
  info.exponent = f.slope;
  info.prefactor = std::exp(f.intercept);
  info.r2 = f.r2;
  // adjoining gap length decides edge bookkeeping
  double gap = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < scan.gaps.size(); ++i) {
    const double glo = scan.bands[i].hi, ghi = scan.bands[i + 1].lo;
    if (e0 >= glo - 1e-9 && e0 <= ghi + 1e-9) gap = ghi - glo;
  }
  if (std::isfinite(gap)) {
    info.gap = gap;
    info.kind = gap < 0.05 ? SingularityKind::SmallGap
                           : SingularityKind::SquareRootEdge;
  } else {
    info.kind = SingularityKind::SquareRootEdge;
    info.gap = std::numeric_limits<double>::infinity();  // outer edge
  }
  return info;
}

double critical_coupling_search(const std::function<double(double)>& gap_of,
                                double d_lo, double d_hi, double tol) {
  double g_lo = gap_of(d_lo), g_hi = gap_of(d_hi);
  const bool open_hi = g_hi > 0.0;
  if ((g_lo > 0.0) == open_hi)
    throw GapCollapse("critical search: bracket does not straddle the merge");
  while (d_hi - d_lo > tol) {
    const double mid = 0.5 * (d_lo + d_hi);
    const bool open = gap_of(mid) > 0.0;
    (open == open_hi ? d_hi : d_lo) = mid;
  }
  return 0.5 * (d_lo + d_hi);
}

double fluctuation_scale(const MdeSolver& solver, const SupportScan& scan,
                         double e0, int n_eff) {
  if (n_eff < 2) throw SchemaError("fluctuation scale: n too small");
  if (scan.band_of(e0) < 0) {
    // gap energy: scaling form at the nearby edges
    double delta = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < scan.gaps.size(); ++i) {
      if (e0 > scan.bands[i].hi && e0 < scan.bands[i + 1].lo)
        delta = scan.gaps[i];
    }
    if (!std::isfinite(delta))
      throw SchemaError("fluctuation scale: energy outside the scanned window");
    delta = std::min(delta, 1.0);
    const double n34 = std::pow(double(n_eff), -0.75);
    if (delta <= n34) return n34;
    return std::pow(double(n_eff), -2.0 / 3.0) * std::pow(delta, 1.0 / 9.0);
  }

  DensityProbe probe(solver, scan.eta);
  const double target = 1.0 / n_eff;
  // mass(h) = int_{-h}^{h} rho(e0 + x) dx via 16-node Gauss-Legendre
  static const double gl_x[8] = {0.0950125098376374, 0.2816035507792589,
                                 0.4580167776572274, 0.6178762444026438,
                                 0.7554044083550030, 0.8656312023878318,
                                 0.9445750230732326, 0.9894009349916499};
  static const double gl_w[8] = {0.1894506104550685, 0.1826034150449236,
                                 0.1691565193950025, 0.1495959888165767,
                                 0.1246289712555339, 0.0951585116824928,
                                 0.0622535239386479, 0.0271524594117541};
  auto mass = [&](double h) {
    double acc = 0.0;
    for (int k = 0; k < 8; ++k) {
      acc += gl_w[k] * (probe(e0 + h * gl_x[k]) + probe(e0 - h * gl_x[k]));
    }
    return acc * h;
  };
  const double rho0 = std::max(probe(e0), 1e-12);
  double lo = 0.0, hi = std::max(1.0 / (n_eff * rho0), 4.0 * scan.eta);
  while (mass(hi) < target) {
    hi *= 2.0;
    if (hi > scan.grid[scan.grid.size() - 1] - scan.grid[0])
      throw GapCollapse("fluctuation scale: not enough mass in the window");
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace mdelab
