#include "mdelab/rigidity.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mdelab/sampler.hpp"

namespace mdelab {

namespace {

Spectrum sample_values(const Model& m, std::mt19937_64& rng) {
  const Matrix h = sample_matrix(m, rng);
  return m.real() ? eig_values(RMatrix(h.real())) : eig_values(h);
}

}  // namespace

RigidityReport rigidity_check(const Model& m, const MdeSolver& solver,
                              const SupportScan& scan, int trials,
                              const std::vector<int>& ks, uint64_t seed) {
  const int n = m.n;
  if (trials < 1) throw SchemaError("rigidity_check: trials must be positive");
  if (ks.empty()) throw SchemaError("rigidity_check: no eigenvalue indices");
  for (int k : ks)
    if (k < 1 || k > n)
      throw SchemaError("rigidity_check: eigenvalue index out of range");

  RigidityReport rep;
  rep.trials = trials;
  rep.ks = ks;
  std::vector<double> etaf(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double g = scan.quantile_location(ks[i], n);
    rep.gamma.push_back(g);
    etaf[i] = fluctuation_scale(solver, scan, g, n);
  }

  std::vector<double> units;
  units.reserve(ks.size() * std::size_t(trials));
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng = make_rng(seed, uint64_t(t));
    const Spectrum sp = sample_values(m, rng);
    for (std::size_t i = 0; i < ks.size(); ++i)
      units.push_back(std::abs(sp.values(ks[i] - 1) - rep.gamma[i]) / etaf[i]);
  }
  double sum = 0.0;
  for (double u : units) {
    rep.worst_units = std::max(rep.worst_units, u);
    sum += u;
  }
  rep.mean_units = sum / double(units.size());
  rep.p99_units = quantile(units, 0.99);
  return rep;
}

BandMassReport band_mass_check(const Model& m, const SupportScan& scan,
                               int trials, uint64_t seed) {
  if (trials < 1) throw SchemaError("band_mass_check: trials must be positive");
  if (scan.bands.empty()) throw SchemaError("band_mass_check: no bands");
  const int n = m.n;
  const int nb = int(scan.bands.size());

  BandMassReport rep;
  rep.trials = trials;
  rep.expected.resize(nb);
  rep.max_dev.assign(nb, 0.0);
  for (int b = 0; b < nb; ++b) rep.expected[b] = double(n) * scan.bands[b].mass;

  // attribute strays to the nearest band: split windows mid-gap
  std::vector<double> cut(nb + 1);
  cut[0] = -std::numeric_limits<double>::infinity();
  cut[nb] = std::numeric_limits<double>::infinity();
  for (int b = 1; b < nb; ++b)
    cut[b] = 0.5 * (scan.bands[b - 1].hi + scan.bands[b].lo);

  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng = make_rng(seed, uint64_t(t));
    const Spectrum sp = sample_values(m, rng);
    bool exact = true;
    for (int b = 0; b < nb; ++b) {
      const int count = sp.count_below(cut[b + 1]) -
                        (b == 0 ? 0 : sp.count_below(cut[b]));
      const double dev = std::abs(double(count) - rep.expected[b]);
      rep.max_dev[b] = std::max(rep.max_dev[b], dev);
      if (dev >= 0.5) exact = false;
    }
    if (exact) ++rep.exact_trials;
  }
  return rep;
}

GapExclusionReport gap_exclusion_check(const Model& m, double gap_lo,
                                       double gap_hi, double margin_units,
                                       const MdeSolver& solver,
                                       const SupportScan& scan, int trials,
                                       uint64_t seed) {
  if (!(gap_lo < gap_hi))
    throw SchemaError("gap_exclusion_check: empty gap interval");
  if (trials < 1)
    throw SchemaError("gap_exclusion_check: trials must be positive");
  const int n = m.n;
  const double center = 0.5 * (gap_lo + gap_hi);

  GapExclusionReport rep;
  rep.gap_lo = gap_lo;
  rep.gap_hi = gap_hi;
  rep.trials = trials;
  rep.margin = margin_units * fluctuation_scale(solver, scan, center, n);
  if (2.0 * rep.margin >= gap_hi - gap_lo)
    throw GapCollapse("gap_exclusion_check: margin swallows the whole gap");
  rep.closest_approach = std::numeric_limits<double>::infinity();

  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng = make_rng(seed, uint64_t(t));
    const Spectrum sp = sample_values(m, rng);
    bool clean = true;
    for (int i = 0; i < n; ++i) {
      const double lam = sp.values(i);
      rep.closest_approach =
          std::min(rep.closest_approach, std::abs(lam - center));
      if (lam >= gap_lo + rep.margin && lam <= gap_hi - rep.margin) {
        ++rep.intrusions;
        clean = false;
      }
    }
    if (clean) ++rep.clean_trials;
  }
  return rep;
}

DelocalizationReport delocalization_check(const Model& m, int trials,
                                          double log_power, uint64_t seed,
                                          int extra_probes, double win_lo,
                                          double win_hi) {
  if (trials < 1)
    throw SchemaError("delocalization_check: trials must be positive");
  if (extra_probes < 0)
    throw SchemaError("delocalization_check: negative probe count");
  if (!(win_lo < win_hi))
    throw SchemaError("delocalization_check: empty eigenvalue window");
  const int n = m.n;

  Matrix probes(n, std::max(extra_probes, 1));
  std::mt19937_64 prng = make_rng(seed, 0xde10);
  std::normal_distribution<double> nd;
  for (int j = 0; j < probes.cols(); ++j) {
    Vector v(n);
    for (int i = 0; i < n; ++i)
      v(i) = cd(nd(prng), m.real() ? 0.0 : nd(prng));
    probes.col(j) = v / v.norm();
  }

  DelocalizationReport rep;
  rep.trials = trials;
  rep.log_power = log_power;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng = make_rng(seed, 1000 + uint64_t(t));
    const Matrix h = sample_matrix(m, rng);
    const Spectrum sp = m.real() ? eig_full(RMatrix(h.real())) : eig_full(h);
    const int k_lo = sp.count_below(win_lo);
    const int k_hi = sp.count_below(win_hi);
    if (k_hi <= k_lo) {  // no eigenvalue inside the window this trial
      rep.per_trial.push_back(0.0);
      continue;
    }
    const int nk = k_hi - k_lo;
    // coordinate probes: sup-norm over the windowed eigenvector entries
    double worst_t =
        sp.real ? sp.rvectors.middleCols(k_lo, nk).cwiseAbs().maxCoeff()
                : sp.vectors.middleCols(k_lo, nk).cwiseAbs().maxCoeff();
    worst_t *= worst_t;
    if (extra_probes > 0) {
      const ResolventProbe pr = make_probe(sp, probes);
      worst_t =
          std::max(worst_t, pr.proj.middleRows(k_lo, nk).cwiseAbs2().maxCoeff());
    }
    worst_t *= double(n);
    rep.per_trial.push_back(worst_t);
    rep.worst = std::max(rep.worst, worst_t);
  }
  rep.worst_ratio = rep.worst / std::pow(std::log(double(n)), log_power);
  return rep;
}

}  // namespace mdelab
