#include "mdelab/mde.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <deque>

namespace mdelab {

// ---- solution accessors -------------------------------------------------------

cd MdeSolution::trace_mean() const {
  switch (rep) {
    case MdeRep::Scalar:
      return state[0];
    case MdeRep::Diagonal:
    case MdeRep::Circulant:  // diagonal of a circulant is the symbol mean
      return state.mean();
    case MdeRep::Dense:
      return ntrace(dense);
  }
  return 0.0;
}

double MdeSolution::rho() const { return trace_mean().imag() / M_PI; }

double MdeSolution::im_min() const {
  switch (rep) {
    case MdeRep::Scalar:
      return state[0].imag();
    case MdeRep::Diagonal:
    case MdeRep::Circulant:
      return state.imag().minCoeff();
    case MdeRep::Dense: {
      const Matrix im = (dense - dense.adjoint()) / cd(0.0, 2.0);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(im, Eigen::EigenvaluesOnly);
      return eig.eigenvalues().minCoeff();
    }
  }
  return 0.0;
}

Vector MdeSolution::diag(int n) const {
  switch (rep) {
    case MdeRep::Scalar:
      return Vector::Constant(n, state[0]);
    case MdeRep::Diagonal:
      return state;
    case MdeRep::Circulant:
      return Vector::Constant(n, state.mean());
    case MdeRep::Dense:
      return dense.diagonal();
  }
  return {};
}

Matrix MdeSolution::materialize(int n) const {
  switch (rep) {
    case MdeRep::Scalar:
      return state[0] * Matrix::Identity(n, n);
    case MdeRep::Diagonal:
      return state.asDiagonal();
    case MdeRep::Circulant: {
      Vector col(n);
      for (int d = 0; d < n; ++d) {
        cd acc = 0.0;
        for (int p = 0; p < n; ++p)
          acc += state[p] * std::exp(cd(0.0, -2.0 * M_PI * double(p) * d / n));
        col[d] = acc / double(n);
      }
      Matrix m(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = col[(i - j + n) % n];
      return m;
    }
    case MdeRep::Dense:
      return dense;
  }
  return {};
}

// ---- solver -------------------------------------------------------------------

MdeSolver::MdeSolver(Model model, MdeOptions opt)
    : model_(std::move(model)), opt_(opt) {
  if (model_.n <= 0) throw SchemaError("mde: model size must be positive");
  if (std::holds_alternative<WignerScalar>(model_.s) &&
      model_.a.kind == Baseline::Kind::Zero) {
    rep_ = MdeRep::Scalar;
  } else if (diagonal_closed(model_)) {
    rep_ = MdeRep::Diagonal;
    adiag_ = model_.a.diagonal_values(model_.n).cast<cd>();
  } else if (circulant_closed(model_)) {
    rep_ = MdeRep::Circulant;
    circ_ = std::make_shared<CirculantEnergy>(circulant_energy(model_));
  } else {
    rep_ = MdeRep::Dense;
    if (model_.n > 128)
      throw SchemaError("mde: dense representation capped at n = 128");
    adense_ = std::make_shared<Matrix>(model_.a.materialize(model_.n));
    if (std::holds_alternative<DenseFourTensor>(model_.s))
      tensor_ = std::make_shared<TensorEnergy>(tensor_energy(model_));
  }
  eta_start_ = std::max(10.0, 2.0 * model_.a.op_norm_bound(model_.n) + 4.0);
}

Vector MdeSolver::fixed_point_map(const Vector& x, cd z, double mix) const {
  const int n = model_.n;
  switch (rep_) {
    case MdeRep::Scalar: {
      const cd s = x[0] * (model_.real() ? 1.0 + 1.0 / n : 1.0);
      Vector g(1);
      g[0] = -1.0 / (z + s);
      return g;
    }
    case MdeRep::Diagonal: {
      const Vector s = apply_self_energy_diag(model_, x, mix);
      Vector g(n);
      for (int i = 0; i < n; ++i) g[i] = -1.0 / (z - adiag_[i] + s[i]);
      return g;
    }
    case MdeRep::Circulant: {
      const Vector s = circ_->apply(x, mix);
      Vector g(n);
      for (int p = 0; p < n; ++p) g[p] = -1.0 / (z + s[p]);
      return g;
    }
    case MdeRep::Dense: {
      const Eigen::Map<const Matrix> m(x.data(), n, n);
      Matrix s = tensor_ ? tensor_->apply(m) : apply_self_energy(model_, m, mix);
      if (tensor_ && mix != 1.0)
        s = mix * s + (1.0 - mix) * apply_gauss_reference(model_.cls, m);
      Matrix b = std::move(s);  // b = z - A + S[M]
      b.diagonal().array() += z;
      b -= *adense_;
      Matrix g = -b.partialPivLu().inverse();
      return Eigen::Map<const Vector>(g.data(), n * n);
    }
  }
  return {};
}

namespace {

inline double state_hs(const Vector& v, MdeRep rep, int n) {
  return rep == MdeRep::Dense ? v.norm() / std::sqrt(double(n))
                              : v.norm() / std::sqrt(double(v.size()));
}

// upper-half-plane membership of the state (necessary condition in the dense
// case, where only the diagonal of Im M is inspected)
inline bool herglotz_ok(const Vector& v, MdeRep rep, int n) {
  if (rep != MdeRep::Dense) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (!(v[i].imag() > 0.0)) return false;
    return true;
  }
  for (int i = 0; i < n; ++i)
    if (!(v[i * (n + 1)].imag() > 0.0)) return false;
  return true;
}

}  // namespace

MdeSolution MdeSolver::solve_at(cd z, Vector x, double mix, int* iters) const {
  const int n = model_.n;
  const int depth = std::max(1, opt_.anderson_depth);
  std::deque<Vector> xs, fs;
  double omega = 1.0;
  double best_err = std::numeric_limits<double>::infinity();

  Vector g = fixed_point_map(x, z, mix);
  for (int k = 0; k < opt_.max_iter; ++k) {
    const Vector f = g - x;
    const double err = state_hs(f, rep_, n);
    if (iters) ++*iters;
    if (err <= opt_.tol) {
      x = g;
      break;
    }

    xs.push_back(x), fs.push_back(f);
    if (static_cast<int>(xs.size()) > depth) xs.pop_front(), fs.pop_front();
    best_err = std::min(best_err, err);

    Vector cand;
    const int h = static_cast<int>(xs.size());
    if (h >= 2) {
      // Anderson extrapolation over the residual history
      Matrix df(f.size(), h - 1), dx(f.size(), h - 1);
      for (int j = 0; j + 1 < h; ++j) {
        df.col(j) = fs[j + 1] - fs[j];
        dx.col(j) = xs[j + 1] - xs[j];
      }
      const Vector gamma = df.colPivHouseholderQr().solve(f);
      cand = x + f - (dx + df) * gamma;
      if (!cand.allFinite() || !herglotz_ok(cand, rep_, n)) cand.resize(0);
    }
    if (cand.size() == 0 || err > 4.0 * best_err) {
      // guarded damped step (stays in the half-plane for omega <= 1)
      cand = x + omega * f;
      if (!herglotz_ok(cand, rep_, n)) {
        omega = std::max(opt_.omega_min, 0.5 * omega);
        cand = x + omega * f;
      }
      if (err > 4.0 * best_err) {
        xs.clear(), fs.clear();
        omega = std::max(opt_.omega_min, 0.5 * omega);
      }
    } else {
      omega = std::min(1.0, 1.25 * omega);
    }
    x = std::move(cand);
    g = fixed_point_map(x, z, mix);

    if (k + 1 == opt_.max_iter) {
      const double final_err = state_hs(g - x, rep_, n);
      if (final_err > opt_.tol * 100 && opt_.throw_on_fail)
        throw NonConvergence("mde: fixed point stalled at increment " +
                             format_sci(final_err, 3) + " for z = " +
                             format_sci(z.real(), 3) + " + " +
                             format_sci(z.imag(), 3) + "i");
      x = g;
    }
  }

  MdeSolution sol;
  sol.z = z;
  sol.rep = rep_;
  if (rep_ == MdeRep::Dense) {
    sol.dense = Eigen::Map<const Matrix>(x.data(), n, n);
    sol.state.resize(0);
  } else {
    sol.state = std::move(x);
  }
  sol.residual = residual_of(sol);
  return sol;
}

MdeSolution MdeSolver::solve(cd z) const {
  if (!(z.imag() > 0.0)) throw SchemaError("mde: spectral parameter needs Im z > 0");
  const int n = model_.n;
  const double mix = model_.s_mix;
  // Herglotz initialization at the top of the continuation ladder
  const cd z0(z.real(), std::max(z.imag(), eta_start_));
  Vector x;
  if (rep_ == MdeRep::Dense) {
    Matrix m0 = (-1.0 / z0) * Matrix::Identity(n, n);
    x = Eigen::Map<const Vector>(m0.data(), n * n);
  } else {
    x = Vector::Constant(rep_ == MdeRep::Scalar ? 1 : n, -1.0 / z0);
  }
  int iters = 0;
  double eta = z0.imag();
  MdeSolution sol;
  for (;;) {
    sol = solve_at(cd(z.real(), eta), std::move(x), mix, &iters);
    if (eta == z.imag()) break;
    eta = std::max(z.imag(), eta * opt_.eta_factor);
    if (rep_ == MdeRep::Dense)
      x = Eigen::Map<const Vector>(sol.dense.data(), n * n);
    else
      x = std::move(sol.state);
  }
  sol.iterations = iters;
  return sol;
}

MdeSolution MdeSolver::solve(cd z, const MdeSolution& warm) const {
  if (warm.empty() || warm.rep != rep_) return solve(z);
  if (!(z.imag() > 0.0)) throw SchemaError("mde: spectral parameter needs Im z > 0");
  Vector x = rep_ == MdeRep::Dense
                 ? Vector(Eigen::Map<const Vector>(warm.dense.data(),
                                                   model_.n * model_.n))
                 : warm.state;
  int iters = 0;
  try {
    MdeSolution sol = solve_at(z, std::move(x), model_.s_mix, &iters);
    sol.iterations = iters;
    return sol;
  } catch (const NonConvergence&) {
    return solve(z);  // warm start led astray; restart the ladder
  }
}

double MdeSolver::residual_of(const MdeSolution& sol) const {
  const int n = model_.n;
  const double mix = model_.s_mix;
  const cd z = sol.z;
  switch (sol.rep) {
    case MdeRep::Scalar: {
      const cd m = sol.state[0];
      const cd s = m * (model_.real() ? 1.0 + 1.0 / n : 1.0);
      return std::abs(1.0 + (z + s) * m);
    }
    case MdeRep::Diagonal: {
      const Vector s = apply_self_energy_diag(model_, sol.state, mix);
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        acc += std::norm(1.0 + (z - adiag_[i] + s[i]) * sol.state[i]);
      return std::sqrt(acc / n);
    }
    case MdeRep::Circulant: {
      const Vector s = circ_->apply(sol.state, mix);
      double acc = 0.0;
      for (int p = 0; p < n; ++p)
        acc += std::norm(1.0 + (z + s[p]) * sol.state[p]);
      return std::sqrt(acc / n);
    }
    case MdeRep::Dense: {
      Matrix b = apply_self_energy(model_, sol.dense, mix);
      b.diagonal().array() += z;
      b -= *adense_;
      return hsnorm(Matrix(Matrix::Identity(n, n) + b * sol.dense));
    }
  }
  return 0.0;
}

double MdeSolver::scdos(double e, double eta) const {
  // Richardson extrapolation against the harmonic continuation in eta:
  // rho(E + i eta) = rho(E) + c1 eta + c2 eta^2 + O(eta^3)
  MdeSolution s4 = solve(cd(e, 4.0 * eta));
  MdeSolution s2 = solve(cd(e, 2.0 * eta), s4);
  MdeSolution s1 = solve(cd(e, eta), s2);
  const double r = (8.0 * s1.rho() - 6.0 * s2.rho() + s4.rho()) / 3.0;
  return std::max(r, 0.0);
}

cd MdeSolver::stieltjes(cd z) const { return solve(z).trace_mean(); }

double MdeSolver::sigma(const MdeSolution& sol) const {
  const double rho = sol.rho();
  if (rho <= 0.0) return 0.0;
  const int n = model_.n;
  RVector d;
  switch (sol.rep) {
    case MdeRep::Scalar:
      d = RVector::Constant(1, sol.state[0].real() / sol.state[0].imag());
      break;
    case MdeRep::Diagonal:
    case MdeRep::Circulant: {
      d.resize(sol.state.size());
      for (Eigen::Index i = 0; i < sol.state.size(); ++i)
        d[i] = sol.state[i].real() / sol.state[i].imag();
      break;
    }
    case MdeRep::Dense: {
      const Matrix im = (sol.dense - sol.dense.adjoint()) / cd(0.0, 2.0);
      const Matrix re = (sol.dense + sol.dense.adjoint()) / 2.0;
      Eigen::SelfAdjointEigenSolver<Matrix> ieig(im);
      if (ieig.eigenvalues().minCoeff() <= 0.0)
        throw PositivityLoss("sigma: Im M not positive definite");
      const RVector isq = ieig.eigenvalues().cwiseSqrt().cwiseInverse();
      const Matrix t =
          ieig.eigenvectors() * isq.asDiagonal() * ieig.eigenvectors().adjoint();
      Eigen::SelfAdjointEigenSolver<Matrix> qeig(Matrix(t * re * t),
                                                 Eigen::EigenvaluesOnly);
      d = qeig.eigenvalues();
      break;
    }
  }
  double acc = 0.0;
  for (Eigen::Index j = 0; j < d.size(); ++j)
    acc += sgn(d[j]) / std::pow(1.0 + d[j] * d[j], 1.5);
  const double mean = d.size() == 1 ? acc : acc / double(n);
  return mean / (rho * rho * rho);
}

double MdeSolver::beta(const MdeSolution& sol) const {
  const double rho = sol.rho();
  if (rho <= 0.0) return 0.0;
  return rho * rho + rho * std::abs(sigma(sol)) + std::abs(sol.z.imag()) / rho;
}

}  // namespace mdelab
