#pragma once

#include "mdelab/model.hpp"

namespace mdelab {

// Dense action Y = S_mix[X] where S_mix = mix * S + (1 - mix) * S_gauss and
// S_gauss is the class Gaussian reference <X>I (+ X^t/N real class). mix = 1
// gives the model's own self-energy; the flow evaluates mixes in [1, e^T].
// The two-argument form uses the model's own s_mix.
Matrix apply_self_energy(const Model& m, const Matrix& x, double mix);
inline Matrix apply_self_energy(const Model& m, const Matrix& x) {
  return apply_self_energy(m, x, m.s_mix);
}

// Gaussian reference alone
Matrix apply_gauss_reference(SymmetryClass cls, const Matrix& x);

// ---- structured closures ----------------------------------------------------
//
// diagonal closure: A diagonal and S maps diagonal matrices to diagonal
// matrices (wigner-scalar, variance-profile). State is the diagonal of M.
bool diagonal_closed(const Model& m);
Vector apply_self_energy_diag(const Model& m, const Vector& mdiag, double mix);
inline Vector apply_self_energy_diag(const Model& m, const Vector& mdiag) {
  return apply_self_energy_diag(m, mdiag, m.s_mix);
}

// circulant closure: A = 0 and S translation-invariant (filter; also
// wigner-scalar trivially). State is the Fourier symbol of M (real-symmetric
// circulants in the real class, so the symbol is even).
bool circulant_closed(const Model& m);

// cached Fourier representation of the filter action on circulants:
// shat = K * xhat + D .* xhat  (D = 0 in the complex class)
struct CirculantEnergy {
  int n = 0;
  SymmetryClass cls = SymmetryClass::ComplexHermitian;
  RMatrix k;   // n x n symbol-coupling kernel
  RVector d;   // diagonal (real-class transpose part)
  bool wigner = false;  // wigner-scalar fast path
  Vector apply(const Vector& symbol, double mix = 1.0) const;
};
CirculantEnergy circulant_energy(const Model& m);

// entrywise second moments N*E[w_i{k} w_l{j}] needed for the dense action and
// the cumulant checks; filter models only (wigner/profile have closed forms)
double filter_pair_moment(const FilterKernel& f, SymmetryClass cls, int n,
                          int i, int k, int l, int j);

// normalization gain g with g^2 = 1/(N sum phi^2)
double filter_gain(const FilterKernel& f, int n);

// autocorrelation C1(u,v) = sum_w phi(w) phi(w+u) (support radius 2r)
RMatrix filter_autocorr(const FilterKernel& f);

// dense-four-tensor: eigen-decomposed covariance C = sum_k lam_k v_k v_k^T,
// S[X] = sum_k lam_k C_k X C_k with C_k = assemble(v_k); cached per model
struct TensorEnergy {
  HermBasis basis;
  RVector lam;
  std::vector<Matrix> factors;  // C_k for lam_k > tol
  Matrix smat;                  // action on vec(X), built for small n
  Matrix apply(const Matrix& x) const;
};
TensorEnergy tensor_energy(const Model& m);

}  // namespace mdelab
