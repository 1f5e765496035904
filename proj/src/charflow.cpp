#include "mdelab/charflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mdelab/sampler.hpp"

namespace mdelab {

namespace {

// warm-started trace evaluation of <M_t(z)> across nearby (t, z) pairs
class FlowEvaluator {
 public:
  FlowEvaluator(const FlowFamily& fam, MdeOptions opt)
      : fam_(fam), opt_(opt) {}

  cd trace(double t, cd z) {
    const double tc = std::clamp(t, 0.0, fam_.horizon);
    MdeSolver solver(fam_.at(tc), opt_);
    MdeSolution sol =
        warm_.empty() ? solver.solve(z) : solver.solve(z, warm_);
    warm_ = sol;
    return sol.trace_mean();
  }

 private:
  const FlowFamily& fam_;
  MdeOptions opt_;
  MdeSolution warm_;
};

}  // namespace

Model FlowFamily::at(double t) const {
  if (t < -1e-12 || t > horizon + 1e-12)
    throw SchemaError("flow: time outside [0, T]");
  t = std::clamp(t, 0.0, horizon);
  Model m = terminal;
  const double scale = std::exp(0.5 * (horizon - t));
  switch (m.a.kind) {
    case Baseline::Kind::Zero:
      break;
    case Baseline::Kind::TwoLevel:
      m.a.level *= scale;
      break;
    case Baseline::Kind::Diagonal:
      m.a.diag *= scale;
      break;
    case Baseline::Kind::Dense:
      m.a.dense *= scale;
      break;
  }
  m.s_mix = std::exp(horizon - t);
  return m;
}

double FlowFamily::max_horizon() const {
  const double inf = std::numeric_limits<double>::infinity();
  if (std::holds_alternative<WignerScalar>(terminal.s)) return inf;
  // class-relative fullness: the backward blend G + e^{T-t}(S - G) stays a
  // covariance for e^T <= 1/(1 - c)
  const double c =
      fullness_of(terminal) / (terminal.real() ? 2.0 : 1.0);
  if (c >= 1.0) return inf;
  return -std::log1p(-c);
}

FlowTrajectory integrate_characteristic(const FlowFamily& fam, cd z0,
                                        double t0, double t1,
                                        FlowOptions opt) {
  FlowEvaluator eval(fam, opt.mde);
  FlowTrajectory traj;
  auto record = [&](double t, cd z) {
    const cd m = eval.trace(t, z);
    traj.points.push_back({t, z, m, m.imag() / M_PI});
  };
  record(t0, z0);
  if (t0 == t1) return traj;

  auto rhs = [&](double t, cd z) -> cd { return -0.5 * z - eval.trace(t, z); };
  auto rk4 = [&](double t, cd z, double h, bool* ok) -> cd {
    const cd k1 = rhs(t, z);
    cd zs = z + 0.5 * h * k1;
    if (zs.imag() < opt.eta_min) { *ok = false; return z; }
    const cd k2 = rhs(t + 0.5 * h, zs);
    zs = z + 0.5 * h * k2;
    if (zs.imag() < opt.eta_min) { *ok = false; return z; }
    const cd k3 = rhs(t + 0.5 * h, zs);
    zs = z + h * k3;
    if (zs.imag() < opt.eta_min) { *ok = false; return z; }
    const cd k4 = rhs(t + h, zs);
    *ok = true;
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };

  const double span = t1 - t0;
  const double h_min = 1e-7 * std::abs(span);
  const double h_base = span / std::max(1, opt.steps);
  double h = h_base;
  double t = t0;
  cd z = z0;
  const double dir = span > 0 ? 1.0 : -1.0;
  while (dir * (t1 - t) > 1e-14 * std::abs(span)) {
    if (dir * h > dir * (t1 - t)) h = t1 - t;
    bool ok1 = false, ok2 = false, ok3 = false;
    const cd z_full = rk4(t, z, h, &ok1);
    cd z_two = z;
    if (ok1) {
      z_two = rk4(t, z, 0.5 * h, &ok2);
      if (ok2) z_two = rk4(t + 0.5 * h, z_two, 0.5 * h, &ok3);
    }
    const bool ok = ok1 && ok2 && ok3 && z_two.imag() >= opt.eta_min;
    if (ok && std::abs(z_full - z_two) <= 15.0 * opt.tol) {
      t += h;
      z = z_two;
      record(t, z);
      // recover the base resolution after halvings, never coarser
      if (std::abs(z_full - z_two) < opt.tol && std::abs(2.0 * h) <= std::abs(h_base))
        h *= 2.0;
    } else {
      h *= 0.5;
      if (std::abs(h) < h_min) {
        traj.exited = true;
        break;
      }
    }
  }
  return traj;
}

ConservationReport conservation_residuals(const FlowFamily& fam,
                                          const FlowTrajectory& traj) {
  (void)fam;
  ConservationReport rep;
  const auto& pts = traj.points;
  if (pts.size() < 2) return rep;
  const FlowPoint& ref = pts.front();
  const double x_ref = ref.z.imag() / ref.rho + M_PI;
  for (const auto& p : pts) {
    const double x = p.z.imag() / p.rho + M_PI;
    const double res = std::abs(x - std::exp(ref.t - p.t) * x_ref) / x_ref;
    rep.res_level = std::max(rep.res_level, res);
  }
  // non-uniform central differences of eta*rho against -pi rho^2
  for (std::size_t k = 1; k + 1 < pts.size(); ++k) {
    if (pts[k].rho <= 1e-3) continue;
    const double h0 = pts[k].t - pts[k - 1].t;
    const double h1 = pts[k + 1].t - pts[k].t;
    auto y = [&](std::size_t i) { return pts[i].z.imag() * pts[i].rho; };
    const double dy = -h1 / (h0 * (h0 + h1)) * y(k - 1) +
                      (h1 - h0) / (h0 * h1) * y(k) +
                      h0 / (h1 * (h0 + h1)) * y(k + 1);
    const double target = -M_PI * pts[k].rho * pts[k].rho;
    rep.res_mass =
        std::max(rep.res_mass, std::abs(dy - target) / std::abs(target));
  }
  return rep;
}

Matrix transport_solution(const Matrix& m_terminal, double horizon, double t) {
  return std::exp(-0.5 * (horizon - t)) * m_terminal;
}

cd transport_trace(cd m_terminal, double horizon, double t) {
  return std::exp(-0.5 * (horizon - t)) * m_terminal;
}

GapTrack evolve_gap(const FlowFamily& fam, double edge_lo, double edge_hi,
                    int steps, FlowOptions opt) {
  if (edge_hi <= edge_lo) throw SchemaError("gap endpoints out of order");
  const double eta_floor = 1e-8;
  FlowEvaluator lo_eval(fam, opt.mde), hi_eval(fam, opt.mde);
  auto rhs = [&](FlowEvaluator& ev, double t, double e) {
    return -0.5 * e - ev.trace(t, cd(e, eta_floor)).real();
  };
  GapTrack track;
  const double h = -fam.horizon / std::max(1, steps);  // backward
  double t = fam.horizon, lo = edge_lo, hi = edge_hi;
  auto push = [&]() {
    track.t.push_back(t);
    track.lo.push_back(lo);
    track.hi.push_back(hi);
    track.delta.push_back(hi - lo);
    if (hi - lo <= 1e-9) throw GapCollapse("gap closed along the flow");
  };
  push();
  for (int k = 0; k < steps; ++k) {
    auto step = [&](FlowEvaluator& ev, double e) {
      const double k1 = rhs(ev, t, e);
      const double k2 = rhs(ev, t + 0.5 * h, e + 0.5 * h * k1);
      const double k3 = rhs(ev, t + 0.5 * h, e + 0.5 * h * k2);
      const double k4 = rhs(ev, t + h, e + h * k3);
      return e + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    };
    lo = step(lo_eval, lo);
    hi = step(hi_eval, hi);
    t += h;
    if (k == steps - 1) t = 0.0;
    push();
  }
  return track;
}

std::vector<double> flow_time_grid(int n, double horizon, FlowParams p) {
  if (n < 2 || horizon <= 0.0) throw SchemaError("flow grid: bad parameters");
  const double ln = std::log(double(n));
  int cap = static_cast<int>(
      std::ceil(((1.0 - p.eps) * ln + std::log(horizon)) / (p.delta * ln)));
  cap = std::max(cap, 1);
  std::vector<double> t;
  t.reserve(cap + 1);
  t.push_back(0.0);
  for (int k = 1; k < cap; ++k)
    t.push_back(horizon * (1.0 - std::pow(double(n), -k * p.delta)));
  t.push_back(horizon);
  return t;
}

double front_function(double t, double horizon, int n, double gap_delta,
                      FlowParams p) {
  if (gap_delta <= 0.0) throw GapCollapse("front function: no gap");
  const double eta_f =
      std::pow(double(n), -2.0 / 3.0) * std::pow(gap_delta, 1.0 / 9.0);
  const double a =
      (std::pow(double(n), -1.0 + p.eps) + p.r_front * (horizon - t)) /
      (2.0 * std::pow(gap_delta, 1.0 / 6.0));
  const double b = std::pow(double(n), p.eps) * std::sqrt(eta_f);
  const double root = std::max(a, b);
  const double f = root * root;
  if (f > 0.25 * gap_delta)
    throw GapCollapse("front function exceeds a quarter of the gap");
  return f;
}

DomainCheck domain_above(const FlowFamily& fam, cd z, double t, FlowParams p) {
  MdeSolver solver(fam.at(t), MdeOptions{});
  const MdeSolution sol = solver.solve(z);
  const double rho = std::max(sol.trace_mean().imag() / M_PI, 0.0);
  const double eta = z.imag(), e = z.real();
  const int n = fam.terminal.n;
  DomainCheck c;
  c.margins.push_back(rho * n * eta / std::pow(double(n), p.eps) - 1.0);
  c.margins.push_back((p.c_l + p.c_upper * (fam.horizon - t)) /
                          std::max(std::abs(e), eta) -
                      1.0);
  const double floor =
      p.c_lower * (std::pow(double(n), -1.0 + p.eps) + fam.horizon - t);
  c.margins.push_back(rho > 0.0
                          ? eta / rho / floor - 1.0
                          : std::numeric_limits<double>::infinity());
  c.margin = *std::min_element(c.margins.begin(), c.margins.end());
  c.member = c.margin >= 0.0;
  return c;
}

DomainCheck domain_sub(const FlowFamily& fam, cd z, double t, double edge_lo,
                       double edge_hi, FlowParams p) {
  const int n = fam.terminal.n;
  const double f =
      front_function(t, fam.horizon, n, edge_hi - edge_lo, p);
  MdeSolver solver(fam.at(t), MdeOptions{});
  const MdeSolution sol = solver.solve(z);
  const double rho = std::max(sol.trace_mean().imag() / M_PI, 0.0);
  const double eta = z.imag(), e = z.real();
  const double kappa = std::min(std::abs(e - edge_lo), std::abs(e - edge_hi));
  DomainCheck c;
  c.margins.push_back(kappa / f - 1.0);
  c.margins.push_back(rho * n * eta * std::pow(double(n), 0.5 * p.zeta) - 1.0);
  c.margins.push_back(
      rho > 0.0 ? std::pow(double(n), p.eps) / (rho * n * eta) - 1.0
                : std::numeric_limits<double>::infinity());
  c.margin = *std::min_element(c.margins.begin(), c.margins.end());
  c.member = c.margin >= 0.0;
  return c;
}

FlowDomain classify_domain(const FlowFamily& fam, cd z, double t,
                           const SupportScan& terminal_scan, FlowParams p) {
  if (domain_above(fam, z, t, p).member) return FlowDomain::Above;
  // nearest terminal gap to Re z, evolved back to time t
  const auto& bands = terminal_scan.bands;
  double best = std::numeric_limits<double>::infinity();
  double lo = 0.0, hi = 0.0;
  for (std::size_t b = 0; b + 1 < bands.size(); ++b) {
    const double glo = bands[b].hi, ghi = bands[b + 1].lo;
    if (ghi <= glo) continue;
    const double mid = 0.5 * (glo + ghi);
    if (std::abs(z.real() - mid) < best) {
      best = std::abs(z.real() - mid);
      lo = glo;
      hi = ghi;
    }
  }
  if (!std::isfinite(best)) return FlowDomain::Outside;
  try {
    const GapTrack track = evolve_gap(fam, lo, hi, 32);
    // linear interpolation of the endpoints at time t (track runs T -> 0)
    double elo = lo, ehi = hi;
    for (std::size_t k = 0; k + 1 < track.t.size(); ++k) {
      if ((track.t[k] - t) * (track.t[k + 1] - t) <= 0.0) {
        const double w =
            (t - track.t[k]) / (track.t[k + 1] - track.t[k]);
        elo = track.lo[k] + w * (track.lo[k + 1] - track.lo[k]);
        ehi = track.hi[k] + w * (track.hi[k + 1] - track.hi[k]);
        break;
      }
    }
    if (domain_sub(fam, z, t, elo, ehi, p).member) return FlowDomain::Sub;
  } catch (const GapCollapse&) {
    return FlowDomain::Outside;
  }
  return FlowDomain::Outside;
}

}  // namespace mdelab
