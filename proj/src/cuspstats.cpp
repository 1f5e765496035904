#include "mdelab/cuspstats.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mdelab/sampler.hpp"
#include "mdelab/spectral.hpp"

namespace mdelab {

namespace {

// log-spaced magnitudes of the fit offsets, both signs, innermost first
std::vector<double> fit_offsets() {
  std::vector<double> xs;
  const int per_side = 12;
  for (int i = 0; i < per_side; ++i) {
    const double mag =
        1e-4 * std::pow(1e-2 / 1e-4, double(i) / double(per_side - 1));
    xs.push_back(mag);
    xs.push_back(-mag);
  }
  return xs;
}

}  // namespace

CuspPoint locate_cusp(const MdeSolver& solver, const SupportScan& scan,
                      double approx, double window) {
  if (!(window > 0.0))
    throw SchemaError("locate_cusp: window must be positive");
  if (scan.dist_support(approx) > window)
    throw SchemaError("locate_cusp: approx location far from the support");

  // pin the density minimum by golden-section search; at a cusp the density
  // is strictly unimodal on both sides so the bracket contracts cleanly
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  const auto rho_at = [&](double e) { return solver.scdos(e, 1e-7); };
  double lo = approx - window, hi = approx + window;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = rho_at(x1), f2 = rho_at(x2);
  while (hi - lo > 1e-10 * (1.0 + std::abs(approx))) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = rho_at(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = rho_at(x2);
    }
  }

  CuspPoint cp;
  cp.location = 0.5 * (lo + hi);

  // cube-root fit of the density over |x| in [1e-4, 1e-2] on both sides
  const std::vector<double> xs = fit_offsets();
  std::vector<double> lx, lr;
  for (double x : xs) {
    const double r = solver.scdos(cp.location + x, 1e-8);
    if (r <= 0.0) continue;  // density vanished: excluded from the log fit
    lx.push_back(std::log(std::abs(x)));
    lr.push_back(std::log(r));
  }
  if (lx.size() < xs.size() - 2)
    throw PoorFit("locate_cusp: density vanishes inside the fit range");
  const LineFit fit =
      fit_line(Eigen::Map<const RVector>(lx.data(), lx.size()),
               Eigen::Map<const RVector>(lr.data(), lr.size()));
  cp.fit_r2 = fit.r2;
  if (fit.r2 < 0.95)
    throw PoorFit("locate_cusp: density is not a clean power law here");
  if (std::abs(fit.slope - 1.0 / 3.0) > 0.08)
    throw PoorFit("locate_cusp: growth exponent is not cube-root");

  // coefficient with the exponent pinned to exactly 1/3
  double acc = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i)
    acc += lr[i] - lx[i] / 3.0;
  cp.coeff = std::exp(acc / double(lx.size()));
  cp.gamma_hat = std::pow(2.0 * std::numbers::pi * cp.coeff / std::sqrt(3.0),
                          0.75);
  return cp;
}

CuspHistogram empirical_cusp_statistics(const Model& m, const CuspPoint& cusp,
                                        int trials, double window, double bin,
                                        uint64_t seed) {
  if (m.real())
    throw SchemaError("cusp statistics: complex Hermitian class required");
  if (trials < 1)
    throw SchemaError("cusp statistics: trials must be positive");
  if (!(bin > 0.0))
    throw SchemaError("cusp statistics: bin width must be positive");
  if (!(window >= bin))
    throw SchemaError("cusp statistics: window narrower than one bin");
  if (!(window <= 5.0))
    throw SchemaError("cusp statistics: window capped at 5");
  if (!(cusp.gamma_hat > 0.0))
    throw SchemaError("cusp statistics: invalid rescale coefficient");

  const int n = m.n;
  const double scale = cusp.gamma_hat * std::pow(double(n), 0.75);
  const double phys = window / scale;  // window half-width on the real axis
  const int nb = int(std::lround(2.0 * window / bin));

  CuspHistogram h;
  h.trials = trials;
  h.bin = bin;
  h.window = window;
  h.centers.resize(nb);
  for (int i = 0; i < nb; ++i) h.centers[i] = -window + (i + 0.5) * bin;

  std::vector<long long> counts(nb, 0);
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng = make_rng(seed, uint64_t(t));
    const Matrix hm = sample_matrix(m, rng);
    const RVector lam =
        eig_window(hm, cusp.location - phys, cusp.location + phys);
    for (int i = 0; i < lam.size(); ++i) {
      const double u = (lam[i] - cusp.location) * scale;
      const int idx = int(std::floor((u + window) / bin));
      if (idx < 0 || idx >= nb) continue;
      ++counts[idx];
      ++h.total_in_window;
    }
  }
  if (h.total_in_window < 500)
    throw TooFewPoints("cusp statistics: fewer than 500 rescaled samples");

  // bin convention: density[i] = counts / (trials * bin), so the histogram
  // estimates the one-point intensity K(u, u) directly (k = 1 calibration)
  h.density = RVector::Zero(nb);
  for (int i = 0; i < nb; ++i)
    h.density[i] = double(counts[i]) / (double(trials) * bin);
  return h;
}

double sup_distance(const CuspHistogram& h, const PearceyKernel& k,
                    double x_max) {
  if (h.centers.size() == 0)
    throw SchemaError("sup_distance: empty histogram");
  double worst = 0.0;
  for (int i = 0; i < h.centers.size(); ++i) {
    if (std::abs(h.centers[i]) > x_max) continue;
    worst = std::max(worst, std::abs(h.density[i] - k.diagonal(h.centers[i])));
  }
  return worst;
}

}  // namespace mdelab
