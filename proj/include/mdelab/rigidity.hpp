#pragma once

#include "mdelab/shape.hpp"
#include "mdelab/spectral.hpp"

namespace mdelab {

// eigenvalue rigidity: |lambda_k - gamma_k| against the local fluctuation
// scale at gamma_k, reported in units of eta_f(gamma_k)
struct RigidityReport {
  double worst_units = 0.0;    // max over checked k and trials
  double mean_units = 0.0;
  double p99_units = 0.0;      // 99th percentile over checked k and trials
  int trials = 0;
  std::vector<int> ks;         // 1-based eigenvalue indices
  std::vector<double> gamma;   // classical locations used
};
RigidityReport rigidity_check(const Model& m, const MdeSolver& solver,
                              const SupportScan& scan, int trials,
                              const std::vector<int>& ks, uint64_t seed);

// per-band eigenvalue counts versus n * band mass
struct BandMassReport {
  std::vector<double> expected;  // n * mass per band
  std::vector<double> max_dev;   // max |count - expected| over trials
  int exact_trials = 0;          // trials with every band count exact
  int trials = 0;
};
BandMassReport band_mass_check(const Model& m, const SupportScan& scan,
                               int trials, uint64_t seed);

// no eigenvalues in the bulk of a spectral gap: margin in units of the
// edge fluctuation scale; counts intrusions deeper than `margin_units`
struct GapExclusionReport {
  double gap_lo = 0.0, gap_hi = 0.0;
  double margin = 0.0;            // absolute margin = margin_units * eta_f
  double closest_approach = 0.0;  // min over trials of dist(lambda, gap center)
  int intrusions = 0;             // eigenvalues beyond the allowed margin
  int clean_trials = 0;           // trials with zero intrusions
  int trials = 0;
};
GapExclusionReport gap_exclusion_check(const Model& m, double gap_lo,
                                       double gap_hi, double margin_units,
                                       const MdeSolver& solver,
                                       const SupportScan& scan, int trials,
                                       uint64_t seed);

// eigenvector delocalization against a probe set (all coordinate directions
// plus `extra_probes` random unit vectors); overlaps in the squared
// convention n |<x, u_k>|^2, so coordinate probes give n ||u_k||_inf^2.
// Only eigenvectors whose eigenvalue lies in [win_lo, win_hi] are scored.
struct DelocalizationReport {
  double worst = 0.0;       // max over trials/vectors/probes of n |<x,u>|^2
  double log_power = 3.0;   // comparison exponent
  double worst_ratio = 0.0; // worst / log^C n
  std::vector<double> per_trial;  // per-trial max of n |<x,u>|^2
  int trials = 0;
};
DelocalizationReport delocalization_check(const Model& m, int trials,
                                          double log_power, uint64_t seed,
                                          int extra_probes = 10,
                                          double win_lo = -1e300,
                                          double win_hi = 1e300);

}  // namespace mdelab
