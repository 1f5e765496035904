#pragma once

#include "mdelab/model.hpp"

namespace mdelab {

// Cumulant bookkeeping for decaying-correlation ensembles. Entry labels are
// pairs alpha = (a, b); kappa denotes cumulants of the rescaled entries
// sqrt(n) w_alpha, so kappa_2 is order one and kappa_3 = n^{3/2} cum_3.

// operator norm of the |kappa_2| matrix acting on R^{n^2} (power iteration;
// matrix-free for filter models, dense for small four-tensor models)
double kappa2_norm(const Model& m, int iters = 60);

// third cumulant kappa(alpha1, alpha2, alpha3) for real-class filter models
double kappa3_filter(const FilterKernel& f, int n, int a1, int b1, int a2,
                     int b2, int a3, int b3);

// trilinear tree-shaped test sum
//   n^{-3/2} sum |kappa(a1 b1, a2 b2, a3 b3)| |X_{b1 a2}| |Y_{b2 a3}| |Z_{b3 a1}|
// evaluated exactly by restricting to tuples within the correlation range;
// the target bound divides by ||X||_op ||Y||_op ||Z||_hs
double tree_sum(const Model& m, const Matrix& x, const Matrix& y,
                const Matrix& z);
double tree_sum_bruteforce(const Model& m, const Matrix& x, const Matrix& y,
                           const Matrix& z);  // full triple loop, n <= 24

struct TreeBoundReport {
  double worst_ratio = 0.0;   // max over probes of tree_sum / (opnorms * hs)
  double kappa2 = 0.0;
  int probes = 0;
};
TreeBoundReport tree_bound_report(const Model& m, int probes,
                                  std::mt19937_64& rng);

}  // namespace mdelab
