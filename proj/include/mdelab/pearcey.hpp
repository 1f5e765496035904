#pragma once

#include "mdelab/common.hpp"

namespace mdelab {

// Extended Pearcey kernel via double contour integrals,
//   K_a(x, y) = (2 pi i)^{-2} int int exp(-w^4/4 + a w^2/2 - y w
//                                        + z^4/4 - a z^2/2 + x z) / (w - z).
// The z contour is an X of four rays in the directions e^{+-i pi/4},
// e^{+-3i pi/4} (traversed from the upper-right/lower-left toward the
// center and outward to the lower-right/upper-left); the w contour is a
// vertical line traversed upward. The X formally crosses any vertical line
// through its center, so the two wedges of the X are split apart: the left
// wedge apex sits at -2 d, the right wedge apex at +2 d, and the w line at
// Re w = d threads between them. This keeps the integrand absolutely
// convergent and w - z bounded away from zero; the value is independent of
// d and of the apex offsets (no pole is crossed while moving them).
struct PearceyOptions {
  double alpha = 0.0;
  double offset = 0.35;    // d
  double ray = 7.0;        // truncation length along each ray
  int nodes = 96;          // Gauss-Legendre nodes per ray segment
};

struct PearceyMoments;

class PearceyKernel {
 public:
  explicit PearceyKernel(PearceyOptions opt = {});

  double alpha() const { return opt_.alpha; }
  cd eval(double x, double y) const;
  double diagonal(double x) const;   // K(x, x), real up to quadrature noise
  // difference against a doubled-node evaluation (self-convergence)
  double refine_error(double x, double y) const;

  // Fredholm-style finite sections: k-point correlation determinant
  RMatrix matrix(const RVector& xs) const;
  double kpoint(const RVector& xs) const;

 private:
  struct Node { cd pos; cd w; };        // position and weight * direction
  void build(int nodes);
  std::vector<Node> zn_, wn_;           // z and w contour nodes
  std::vector<Node> zn2_, wn2_;         // doubled-resolution nodes
  cd eval_with(const std::vector<Node>& zn, const std::vector<Node>& wn,
               double x, double y) const;
  PearceyOptions opt_;

  friend PearceyMoments pearcey_moments(double, double, double,
                                        PearceyOptions);
};

// independent one-dimensional reduction used for cross-checking: with
// A_k(x) = (2 pi i)^{-1} int_z z^k e^{z^4/4 - a z^2/2 + x z},
// B_k(y) = (2 pi i)^{-1} int_w w^k e^{-w^4/4 + a w^2/2 - y w},
// the kernel satisfies
//   (x - y) K = A_2 B_0 + A_1 B_1 + A_0 B_2 - a A_0 B_0,
//   K(x, x)   = A_2 B_1 + A_1 B_2 - x A_0 B_0
// (the diagonal uses the moment recursion B_3 = a B_1 - y B_0)
struct PearceyMoments {
  cd a[4];
  cd b[4];
};
PearceyMoments pearcey_moments(double alpha, double x, double y,
                               PearceyOptions opt = {});
cd pearcey_offdiag_reduction(double alpha, double x, double y,
                             PearceyOptions opt = {});
double pearcey_diag_reduction(double alpha, double x, PearceyOptions opt = {});

// large-|x| diagonal asymptote at alpha = 0: sqrt(3)/(2 pi) |x|^{1/3}
double pearcey_diag_asymptote(double x);

}  // namespace mdelab
