#pragma once

#include "mdelab/common.hpp"

namespace mdelab {

// Thin LAPACK wrapper. Divide-and-conquer drivers when vectors are needed,
// two-stage / no-vector drivers otherwise. Matrices are overwritten copies.
struct Spectrum {
  RVector values;     // ascending
  Matrix vectors;     // columns; empty when not requested
  RMatrix rvectors;   // real-class storage (avoids complex copies)
  bool real = false;

  int n() const { return static_cast<int>(values.size()); }
  bool has_vectors() const { return vectors.size() > 0 || rvectors.size() > 0; }

  // <G(z)> = n^{-1} sum_k 1/(lambda_k - z)
  cd resolvent_trace(cd z) const;
  // counting function #{lambda_k <= e}
  int count_below(double e) const;
};

Spectrum eig_values(const Matrix& h);          // complex Hermitian, values only
Spectrum eig_full(const Matrix& h);            // + vectors
Spectrum eig_values(const RMatrix& h);         // real symmetric
Spectrum eig_full(const RMatrix& h);

// resolvent quadratic forms through precomputed eigenvector projections:
// P = U^adj X (columns are probe vectors); <x_i, G(z) x_j> for unit probes
struct ResolventProbe {
  RVector values;
  Matrix proj;  // U^adj X
  cd bilinear(int i, int j, cd z) const;
};
ResolventProbe make_probe(const Spectrum& s, const Matrix& probes);

// max_i |<u_i, x>|^2 over eigenvectors whose eigenvalue lies in [lo, hi]
double window_overlap_max(const Spectrum& s, const Vector& x, double lo,
                          double hi);

// All eigenvalues of a complex Hermitian matrix inside [lo, hi], ascending.
// Shift-invert Lanczos at the window midpoint on a single LDL^adj
// factorization with full reorthogonalization; terminates once every Ritz
// value reaching into the (slack-widened) window has converged, both spectral
// sides carry a converged value beyond the window, and the window set has
// been stable for several further iterations. A window certified empty (the
// eigenvalue nearest the midpoint converged beyond the slack radius) returns
// immediately. Falls back to the dense solver for small matrices.
// Deterministic: fixed internal start vector. Intended for windows holding
// at most a few dozen eigenvalues, either interior to the spectrum or
// disjoint from it; wide windows or windows straddling a spectral edge
// exhaust max_vecs and throw NonConvergence (use eig_values instead).
RVector eig_window(const Matrix& h, double lo, double hi, double tol = 1e-9,
                   int max_vecs = 240);

}  // namespace mdelab
