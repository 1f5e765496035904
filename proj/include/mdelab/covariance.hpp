#pragma once

#include <memory>

#include "mdelab/model.hpp"

namespace mdelab {

// Dense covariance of the noise part W in the orthonormal Hermitian basis:
// Cov_mn = E <W, B_m> <W, B_n>. Small n only (dim = n^2 resp. n(n+1)/2).
// One object serves sampling (W = sum_k sqrt(lam_k) g_k C_k), the
// self-energy S[X] = sum_k lam_k C_k X C_k, the flat-direction test
// (fullness = n * lam_min) and interpolated covariances for the flows.
class CovarianceTensor {
 public:
  CovarianceTensor(HermBasis basis, RMatrix cov);

  static CovarianceTensor of_model(const Model& m);       // exact second moments
  static CovarianceTensor gauss_reference(int n, SymmetryClass cls);

  int n() const { return basis_.n; }
  int dim() const { return basis_.dim(); }
  const RMatrix& cov() const { return cov_; }
  const HermBasis& basis() const { return basis_; }

  Matrix sample(std::mt19937_64& rng) const;              // Gaussian with this cov
  Matrix apply(const Matrix& x) const;                    // Sigma[X] (= S[X])
  double fullness() const;                                // n * lam_min
  double quad_form(const Matrix& x) const;                // <coords, Cov coords>

  // this + w * (other - this); requires identical basis
  CovarianceTensor blend(const CovarianceTensor& other, double w) const;
  bool psd(double tol = -1e-9) const;

 private:
  void ensure_eig() const;
  HermBasis basis_;
  RMatrix cov_;
  mutable RVector lam_;       // eigenvalues (ascending), lazy
  mutable RMatrix vec_;       // eigenvectors
  mutable bool eig_done_ = false;
};

}  // namespace mdelab
