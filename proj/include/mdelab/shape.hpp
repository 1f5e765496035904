#pragma once

#include <vector>

#include "mdelab/mde.hpp"

namespace mdelab {

struct Band {
  double lo = 0.0;
  double hi = 0.0;
  double mass = 0.0;  // integral of rho over the band
};

// density profile of the self-consistent measure on a refined grid
struct SupportScan {
  std::vector<Band> bands;
  std::vector<double> gaps;  // widths between consecutive bands
  RVector grid;  // energies (sorted)
  RVector rho;   // density at grid points
  double eta = 1e-6;
  double total_mass = 0.0;

  // distance from a real energy to the support (0 inside)
  double dist_support(double e) const;
  // cumulative mass up to e (trapezoid on the refined grid)
  double cdf(double e) const;
  // k-th classical location: cdf(gamma_k) = (k - 1/2)/n
  double quantile_location(int k, int n) const;
  // index of the band containing e, or -1
  int band_of(double e) const;
};

struct ScanOptions {
  double e_min = -3.0, e_max = 3.0;
  int coarse = 481;        // uniform pre-pass resolution
  double eta = 1e-6;
  double rho_floor = 1e-7; // support detection threshold on rho
  int refine_rounds = 3;   // bisection rounds on band edges
  int edge_points = 25;    // extra graded points near each edge
};
SupportScan scan_support(const MdeSolver& solver, ScanOptions opt = {});

enum class SingularityKind { SquareRootEdge, Cusp, SmallGap, SmallMinimum };

struct SingularityInfo {
  SingularityKind kind = SingularityKind::SquareRootEdge;
  double location = 0.0;   // edge / cusp / minimum position
  double exponent = 0.0;   // fitted growth exponent of rho
  double prefactor = 0.0;  // fitted coefficient on the fitted side
  double r2 = 0.0;         // fit quality
  double gap = 0.0;        // gap length (SmallGap), min density (SmallMinimum)
};

// classify the local shape at a band edge or interior minimum near e0
SingularityInfo classify_singularity(const MdeSolver& solver,
                                     const SupportScan& scan, double e0,
                                     double window = 0.05, int points = 40);

// locate the parameter value where two bands of family(model_of(d)) merge;
// crit(d) = gap(d) with gap 0 past merging; bisection on d
double critical_coupling_search(const std::function<double(double)>& gap_of,
                                double d_lo, double d_hi, double tol = 1e-6);

// local fluctuation scale eta_f(e0): inside the support solves
// int_{-eta_f}^{eta_f} rho(e0 + x) dx = 1/n; outside a gap of length delta,
// uses the gap formula n^{-3/4} (resp. n^{-2/3} delta^{1/9} scaling form)
double fluctuation_scale(const MdeSolver& solver, const SupportScan& scan,
                         double e0, int n_eff);

}  // namespace mdelab
