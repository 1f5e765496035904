#pragma once

#include "mdelab/pearcey.hpp"
#include "mdelab/mde.hpp"
#include "mdelab/shape.hpp"

namespace mdelab {

// cusp location and the local scaling coefficient: near an exact cusp at b,
// rho(b + x) ~ c |x|^{1/3}; the one-point rescaling uses gamma = (n c^3)
// ... concretely eigenvalues are mapped through
//     u = (lambda - b) * gamma_hat * n^{3/4},
// gamma_hat chosen so that the rescaled one-point density matches the
// Pearcey diagonal: gamma_hat = (2 pi c / sqrt(3))^{3/4}.
struct CuspPoint {
  double location = 0.0;
  double coeff = 0.0;      // c in rho ~ c |x|^{1/3}
  double gamma_hat = 0.0;
  double fit_r2 = 0.0;
};
CuspPoint locate_cusp(const MdeSolver& solver, const SupportScan& scan,
                      double approx, double window = 0.1);

struct CuspHistogram {
  RVector centers;
  RVector density;       // counts / (trials * bin width), one-point scale
  int trials = 0;
  double bin = 0.0;
  double window = 0.0;
  long long total_in_window = 0;
};
CuspHistogram empirical_cusp_statistics(const Model& m, const CuspPoint& cusp,
                                        int trials, double window, double bin,
                                        uint64_t seed);

// sup over bins with |center| <= x_max of |density - K_alpha(x, x)|
double sup_distance(const CuspHistogram& h, const PearceyKernel& k,
                    double x_max = 1e300);

}  // namespace mdelab
