#pragma once

#include <functional>

#include "mdelab/mde.hpp"
#include "mdelab/spectral.hpp"

namespace mdelab {

// Empirical local-law error study. For a model family indexed by size n,
// at fixed energy E the averaged and isotropic resolvent errors
//   err_avg(eta) = |<G - M>|,  err_iso(eta) = max_probe |<x,(G - M)y>|
// are collected over trials and etas; normalized versions divide by the
// predicted fluctuation sizes 1/(n eta) and sqrt(rho/(n eta)) <z>-corrected.

struct LocalLawPoint {
  double eta = 0.0;
  double avg = 0.0;       // quantile over trials of err_avg
  double iso = 0.0;
  double avg_norm = 0.0;  // err / predicted
  double iso_norm = 0.0;
};

struct LocalLawRun {
  int n = 0;
  double energy = 0.0;
  std::vector<LocalLawPoint> points;
  LineFit avg_fit;  // log err vs log eta
  LineFit iso_fit;
};

struct LocalLawOptions {
  double energy = 0.0;
  double eta_min_pow = 0.9;  // eta from n^{-pow_min}
  double eta_max = 0.5;
  int etas = 12;
  int trials = 6;
  int probes = 4;
  double quant = 0.9;  // per-eta aggregation quantile over trials
  uint64_t seed = 1;
};

LocalLawRun local_law_run(const Model& m, LocalLawOptions opt);

struct ScalingStudy {
  std::vector<LocalLawRun> runs;  // one per size
  LineFit avg_size_fit;  // log normalized err at eta ~ n^{-0.5} vs log n
  LineFit iso_size_fit;
};
ScalingStudy scaling_study(const std::function<Model(int)>& family,
                           const std::vector<int>& sizes, LocalLawOptions opt);

// Single-z normalized metrics from one eigendecomposition (with vectors):
//   avg: |<(G - M) B>| <z> n dist / ||B||_hs   (pass dist = eta in support)
//   iso: |<x, (G - M) y>| <z> sqrt(n eta / rho) for unit x, y
// Both are invariant under B -> cB and (x, y) -> (ux, vy), |u| = |v| = 1.
double avg_law_metric(const Spectrum& sp, const MdeSolution& sol,
                      const Matrix& b, cd z, double dist);
double iso_law_metric(const Spectrum& sp, const MdeSolution& sol,
                      const Vector& x, const Vector& y, cd z);

// Ward identity check on a sampled resolvent: sum_j |G_ij|^2 = Im G_ii / eta
double ward_residual(const Matrix& h, cd z);

}  // namespace mdelab
