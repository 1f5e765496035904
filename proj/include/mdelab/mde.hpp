#pragma once

#include <memory>

#include "mdelab/model.hpp"
#include "mdelab/selfenergy.hpp"

namespace mdelab {

struct MdeOptions {
  double tol = 1e-12;        // fixed-point increment target (hs scale)
  int max_iter = 4000;       // per eta stage
  double eta_factor = 0.8;   // geometric continuation ladder
  int anderson_depth = 5;    // history window for the accelerated iteration
  double omega_min = 0.05;   // damping floor
  bool throw_on_fail = true;
};

enum class MdeRep { Scalar, Diagonal, Circulant, Dense };

// Solution of -1/M = z - A + S[M] at a single spectral parameter. The state
// lives in the smallest closed representation the model admits.
struct MdeSolution {
  cd z{0.0, 0.0};
  MdeRep rep = MdeRep::Scalar;
  Vector state;        // scalar: size 1; diagonal: diag(M); circulant: symbol
  Matrix dense;        // dense rep only
  int iterations = 0;
  double residual = 0.0;  // || I + (z - A + S[M]) M ||_hs at return

  cd trace_mean() const;       // <M>
  double rho() const;          // Im<M> / pi
  double im_min() const;       // min eigenvalue of Im M
  Vector diag(int n) const;    // diagonal of M (any rep)
  Matrix materialize(int n) const;
  bool empty() const { return state.size() == 0 && dense.size() == 0; }
};

// Solver with a fixed model; solves share structure caches and warm starts.
class MdeSolver {
 public:
  explicit MdeSolver(Model model, MdeOptions opt = {});

  const Model& model() const { return model_; }
  const MdeOptions& options() const { return opt_; }
  MdeRep rep() const { return rep_; }

  // cold solve: continuation from eta_start = max(10, 2||A||) down to Im z
  MdeSolution solve(cd z) const;
  // warm solve from a nearby solution (same representation)
  MdeSolution solve(cd z, const MdeSolution& warm) const;

  // self-consistent density at E via Richardson extrapolation in eta
  double scdos(double e, double eta = 1e-6) const;
  // <M(E + i eta)>
  cd stieltjes(cd z) const;

  double residual_of(const MdeSolution& sol) const;

  // spread parameter sigma(z) (odd third moment of the shape measure) and
  // the cusp stability scale beta = rho^2 + rho|sigma| + eta/rho
  double sigma(const MdeSolution& sol) const;
  double beta(const MdeSolution& sol) const;

 private:
  Vector fixed_point_map(const Vector& x, cd z, double mix) const;
  MdeSolution solve_at(cd z, Vector x0, double mix, int* iters) const;

  Model model_;
  MdeOptions opt_;
  MdeRep rep_;
  Vector adiag_;                      // diagonal rep: diag(A)
  std::shared_ptr<CirculantEnergy> circ_;
  std::shared_ptr<TensorEnergy> tensor_;
  std::shared_ptr<Matrix> adense_;
  double eta_start_ = 10.0;
};

// operator norms of the inverse stability operator B[X] = X - M S[X] M
struct StabilityNorms {
  double inv_hs = 0.0;   // ||B^{-1}||_{hs->hs}
  double inv_op = 0.0;   // lower estimate of ||B^{-1}||_{||.||->||.||}
  int dim = 0;           // vectorized dimension used
  bool iterative = false;
};
StabilityNorms stability_norms(const MdeSolver& solver, const MdeSolution& sol,
                               int dense_cap = 40, int probes = 8,
                               uint64_t seed = 17);

}  // namespace mdelab
