#pragma once

#include <memory>
#include <optional>
#include <variant>

#include "mdelab/common.hpp"

namespace mdelab {

enum class SymmetryClass { RealSymmetric, ComplexHermitian };

enum class NoiseLaw { Gaussian, Rademacher, ShiftedMixture };

// ---- baseline (expectation) matrix A ---------------------------------------

struct Baseline {
  enum class Kind { Zero, TwoLevel, Diagonal, Dense } kind = Kind::Zero;
  double level = 0.0;  // TwoLevel: diag(+d on first half, -d on second half)
  RVector diag;        // Diagonal
  Matrix dense;        // Dense Hermitian

  static Baseline zero() { return {}; }
  static Baseline two_level(double d) {
    Baseline b;
    b.kind = Kind::TwoLevel;
    b.level = d;
    return b;
  }
  static Baseline diagonal(RVector v) {
    Baseline b;
    b.kind = Kind::Diagonal;
    b.diag = std::move(v);
    return b;
  }
  static Baseline dense_hermitian(Matrix m);

  bool is_diagonal() const { return kind != Kind::Dense; }
  RVector diagonal_values(int n) const;  // defined for non-dense kinds
  Matrix materialize(int n) const;
  double op_norm_bound(int n) const;
};

// ---- self-energy operator X -> S[X] = E[(H-EH) X (H-EH)] --------------------
//
// Variants, by how the second-order correlation structure is represented:
//   WignerScalar    S[X] = <X> I            (+ X^t/N in the real class)
//   VarianceProfile S[X] = diag(P diag(X))  (+ (P o X^t)/N in the real class)
//   FilterKernel    translation-invariant moving average on the index torus
//   DenseFourTensor explicit covariance in an orthonormal Hermitian basis
// The dense variant is capped at small N (the tensor is N^2 x N^2).

struct WignerScalar {};

struct VarianceProfile {
  RMatrix profile;  // symmetric, nonnegative; row means ~ 1
};

// 2-D real convolution kernel on the index torus; support is the L1 diamond
// of radius `radius`, scaled so far-from-diagonal entries have variance 1/N.
struct FilterKernel {
  int radius = 1;
  RMatrix taps;  // (2*radius+1) x (2*radius+1), taps(i,j) = phi(i-radius, j-radius)
  NoiseLaw noise = NoiseLaw::Gaussian;
};

struct DenseFourTensor {
  // covariance of W in an orthonormal (w.r.t. tr[XY]) basis of the real
  // vector space of Hermitian/symmetric matrices; PSD, size dim x dim where
  // dim = N^2 (complex class) or N(N+1)/2 (real class)
  std::shared_ptr<const RMatrix> cov;
};

using SelfEnergy =
    std::variant<WignerScalar, VarianceProfile, FilterKernel, DenseFourTensor>;

// ---- the full model ---------------------------------------------------------

struct Model {
  SymmetryClass cls = SymmetryClass::ComplexHermitian;
  int n = 0;
  Baseline a;
  SelfEnergy s = WignerScalar{};
  // effective self-energy is s_mix * S + (1 - s_mix) * S_gauss; the
  // characteristic flow moves this weight, plain models keep 1
  double s_mix = 1.0;

  bool real() const { return cls == SymmetryClass::RealSymmetric; }
};

Model wigner_model(SymmetryClass cls, int n);
Model two_level_model(SymmetryClass cls, int n, double d);
// smooth one-parameter variance profile p(i,j) = 1 + amp*cos(pi (x_i+x_j)),
// x_i = (i+1/2)/n; row sums stay ~n
Model variance_profile_model(SymmetryClass cls, int n, double amp);
Model filter_model(SymmetryClass cls, int n, NoiseLaw noise);
// polynomial-decay correlation built as the square of a decaying root kernel
// on pair labels; dense representation, so n is capped
Model metric_decay_model(SymmetryClass cls, int n, double s_exp);
Model dense_tensor_model(SymmetryClass cls, int n, std::shared_ptr<const RMatrix> cov);

// default filter diamond radius: cardinality of the support ~ ceil(N^{1/4})
int default_filter_radius(int n);
FilterKernel make_filter_kernel(int n, NoiseLaw noise);

// orthonormal Hermitian basis element index helpers for DenseFourTensor
struct HermBasis {
  int n;
  SymmetryClass cls;
  int dim() const {
    return cls == SymmetryClass::ComplexHermitian ? n * n : n * (n + 1) / 2;
  }
  // m-th basis matrix; orthonormal under the unnormalized trace inner product
  Matrix element(int m) const;
  RVector coords(const Matrix& x) const;   // x Hermitian -> real coordinates
  Matrix assemble(const RVector& c) const;  // inverse of coords
};

// pair-label distance min{|a1-a2|+|b1-b2|, |a1-b2|+|b1-a2|} with each
// coordinate difference taken on the torus Z_n
int label_distance(int n, int a1, int b1, int a2, int b2);

}  // namespace mdelab
