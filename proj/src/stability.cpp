#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "mdelab/mde.hpp"

namespace mdelab {

namespace {

// largest singular value of a general complex matrix via power iteration
double opnorm_est(const Matrix& a, int iters = 40) {
  Vector v = Vector::Random(a.cols());
  v /= v.norm();
  double s = 0.0;
  for (int k = 0; k < iters; ++k) {
    Vector w = a.adjoint() * (a * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    s = std::sqrt(nw);
    v = w / nw;
  }
  return s;
}

// smallest singular value (and right singular vector) via inverse power
// iteration on B^{-1} B^{-adj} using one LU factorization
double smin_via_lu(const Matrix& b, Vector* vec_out = nullptr) {
  Eigen::PartialPivLU<Matrix> lu(b);
  Vector v = Vector::Random(b.rows());
  v /= v.norm();
  double lam = 0.0;
  for (int k = 0; k < 80; ++k) {
    Vector w = lu.adjoint().solve(v);
    Vector u = lu.solve(w);
    const double nu = u.norm();
    if (!std::isfinite(nu) || nu == 0.0) break;
    const double lam_new = nu;  // estimates 1/smin^2
    v = u / nu;
    if (k > 6 && std::abs(lam_new - lam) < 1e-12 * lam_new) {
      lam = lam_new;
      break;
    }
    lam = lam_new;
  }
  if (vec_out) *vec_out = v;
  return lam > 0.0 ? 1.0 / std::sqrt(lam) : 0.0;
}

// dense vectorized stability matrix  B = I - (M^T kron M) Smat
Matrix dense_stability_matrix(const Model& model, const Matrix& m) {
  const int n = model.n;
  Matrix smat(n * n, n * n);
  Matrix basis = Matrix::Zero(n, n);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k) {
      basis(k, l) = 1.0;
      const Matrix img = apply_self_energy(model, basis, model.s_mix);
      basis(k, l) = 0.0;
      smat.col(k + l * n) = Eigen::Map<const Vector>(img.data(), n * n);
    }
  Matrix kron(n * n, n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      kron.block(i * n, j * n, n, n) = m.transpose()(i, j) * m;
  Matrix b = -kron * smat;
  b.diagonal().array() += 1.0;
  return b;
}

double matrix_opnorm(const Matrix& x) {
  if (x.rows() <= 64) return Eigen::JacobiSVD<Matrix>(x).singularValues()(0);
  return opnorm_est(x);
}

}  // namespace

StabilityNorms stability_norms(const MdeSolver& solver, const MdeSolution& sol,
                               int dense_cap, int probes, uint64_t seed) {
  const Model& model = solver.model();
  const int n = model.n;
  auto rng = make_rng(seed, 0xb10cULL);
  std::normal_distribution<double> gauss(0.0, 1.0);

  StabilityNorms out;

  const bool structured =
      sol.rep == MdeRep::Scalar || sol.rep == MdeRep::Diagonal ||
      (sol.rep == MdeRep::Circulant && !model.real());
  if (structured) {
    // the self-energy only sees the matching "diagonal" subspace; off the
    // subspace B acts as the identity (complex class) or by tiny 2x2 blocks
    // (real class), so the n x n coupled block determines the norms
    Vector m = sol.rep == MdeRep::Circulant ? sol.state : sol.diag(n);
    RMatrix coupling;  // S action on the subspace coordinates
    if (sol.rep == MdeRep::Circulant) {
      const CirculantEnergy ce = circulant_energy(model);
      coupling = ce.wigner ? RMatrix::Constant(n, n, 1.0 / n) : ce.k;
      if (model.s_mix != 1.0)
        coupling = model.s_mix * coupling +
                   (1.0 - model.s_mix) * RMatrix::Constant(n, n, 1.0 / n);
    } else {
      coupling = RMatrix::Constant(n, n, 1.0 / n);
      if (const auto* vp = std::get_if<VarianceProfile>(&model.s))
        coupling = vp->profile / double(n);
      if (model.real()) coupling.diagonal().array() += 1.0 / n;
      if (model.s_mix != 1.0) {
        RMatrix ref = RMatrix::Constant(n, n, 1.0 / n);
        if (model.real()) ref.diagonal().array() += 1.0 / n;
        coupling = model.s_mix * coupling + (1.0 - model.s_mix) * ref;
      }
    }
    Matrix bc = -((m.array() * m.array()).matrix().asDiagonal() *
                  coupling.cast<cd>());
    bc.diagonal().array() += 1.0;
    Vector vmin;
    double smin = smin_via_lu(bc, &vmin);
    double block_min = 1.0;
    if (model.real() && sol.rep != MdeRep::Circulant) {
      // off-diagonal 2x2 blocks [[1, -c],[-c, 1]], c = m_i m_j p_ij / n;
      // complex symmetric, singular values |1 -+ c|
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          double p = 1.0;
          if (const auto* vp = std::get_if<VarianceProfile>(&model.s))
            p = vp->profile(i, j);
          const cd c = m[i] * m[j] * p / double(n);
          block_min = std::min(
              {block_min, std::abs(1.0 - c), std::abs(1.0 + c)});
        }
    }
    smin = std::min(smin, block_min);
    out.inv_hs = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
    out.dim = n;
    // operator-norm probe: B^{-1}[X] = X + corrections on the subspace
    Eigen::PartialPivLU<Matrix> lu(bc);
    double worst = 1.0;
    for (int t = 0; t < probes + 1; ++t) {
      Vector xd(n);
      if (t == 0)
        xd = vmin;  // direction achieving the hs blowup
      else
        for (int i = 0; i < n; ++i) xd[i] = cd(gauss(rng), gauss(rng));
      const Vector yd = lu.solve(xd);
      // X supported on the subspace: ||X||_op = max |coord| in both reps
      const double nx = xd.cwiseAbs().maxCoeff();
      const double ny = yd.cwiseAbs().maxCoeff();
      if (nx > 0.0) worst = std::max(worst, ny / nx);
    }
    out.inv_op = worst;
    return out;
  }

  if (n <= dense_cap) {
    const Matrix m = sol.materialize(n);
    const Matrix b = dense_stability_matrix(model, m);
    Vector vmin;
    const double smin = smin_via_lu(b, &vmin);
    out.inv_hs = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
    out.dim = n * n;
    Eigen::PartialPivLU<Matrix> lu(b);
    double worst = 0.0;
    for (int t = 0; t < probes + 1; ++t) {
      Matrix x(n, n);
      if (t == 0) {
        x = Eigen::Map<const Matrix>(vmin.data(), n, n);
      } else {
        for (int j = 0; j < n; ++j)
          for (int i = 0; i <= j; ++i) {
            x(i, j) = cd(gauss(rng), gauss(rng));
            x(j, i) = std::conj(x(i, j));
          }
      }
      const Vector yv = lu.solve(Eigen::Map<const Vector>(x.data(), n * n));
      const Matrix y = Eigen::Map<const Matrix>(yv.data(), n, n);
      worst = std::max(worst, matrix_opnorm(y) / matrix_opnorm(x));
    }
    out.inv_op = worst;
    return out;
  }

  if (n > 96)
    throw SchemaError("stability: no path for this model class at this size");

  // matrix-free path: Lanczos on B^adj B for the smallest singular value
  out.iterative = true;
  out.dim = n * n;
  const Matrix m = sol.materialize(n);
  auto apply_b = [&](const Vector& v) -> Vector {
    const Eigen::Map<const Matrix> x(v.data(), n, n);
    const Matrix y = Matrix(x) - m * apply_self_energy(model, x, model.s_mix) * m;
    return Eigen::Map<const Vector>(y.data(), n * n);
  };
  auto apply_badj = [&](const Vector& v) -> Vector {
    const Eigen::Map<const Matrix> x(v.data(), n, n);
    const Matrix madj = m.adjoint();
    const Matrix y =
        Matrix(x) - apply_self_energy(model, madj * x * madj, model.s_mix);
    return Eigen::Map<const Vector>(y.data(), n * n);
  };

  const int steps = std::min(240, n * n);
  std::vector<Vector> basis;
  basis.reserve(steps);
  RVector alpha(steps), beta(steps);
  Vector q = Vector::NullaryExpr(n * n, [&](Eigen::Index) {
    return cd(gauss(rng), gauss(rng));
  });
  q /= q.norm();
  Vector prev = Vector::Zero(n * n);
  double beta_prev = 0.0;
  int used = 0;
  for (int k = 0; k < steps; ++k) {
    basis.push_back(q);
    Vector w = apply_badj(apply_b(q));
    alpha[k] = q.dot(w).real();
    w -= alpha[k] * q + beta_prev * prev;
    for (const auto& b : basis) w -= b.dot(w) * b;  // full reorthogonalization
    const double nb = w.norm();
    used = k + 1;
    if (nb < 1e-13) break;
    beta[k] = nb;
    prev = q;
    q = w / nb;
    beta_prev = nb;
  }
  RMatrix tri = RMatrix::Zero(used, used);
  for (int k = 0; k < used; ++k) {
    tri(k, k) = alpha[k];
    if (k + 1 < used) tri(k, k + 1) = tri(k + 1, k) = beta[k];
  }
  Eigen::SelfAdjointEigenSolver<RMatrix> te(tri);
  const double lam_min = std::max(te.eigenvalues().minCoeff(), 0.0);
  const double smin = std::sqrt(lam_min);
  out.inv_hs = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();

  // op-norm probes through bicgstab solves of B y = x
  auto bicg = [&](const Vector& rhs) -> Vector {
    Vector xk = Vector::Zero(rhs.size());
    Vector r = rhs, rhat = rhs;
    cd rho(1, 0), alpha_c(1, 0), omega(1, 0);
    Vector v = Vector::Zero(rhs.size()), p = Vector::Zero(rhs.size());
    const double target = 1e-10 * rhs.norm();
    for (int it = 0; it < 600; ++it) {
      const cd rho_new = rhat.dot(r);
      if (std::abs(rho_new) < 1e-300) break;
      const cd beta_c = (rho_new / rho) * (alpha_c / omega);
      rho = rho_new;
      p = r + beta_c * (p - omega * v);
      v = apply_b(p);
      alpha_c = rho / rhat.dot(v);
      const Vector s = r - alpha_c * v;
      const Vector t = apply_b(s);
      omega = t.dot(s) / t.dot(t);
      xk += alpha_c * p + omega * s;
      r = s - omega * t;
      if (r.norm() < target) break;
    }
    return xk;
  };
  double worst = 0.0;
  for (int t = 0; t < probes; ++t) {
    Matrix x(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i) {
        x(i, j) = cd(gauss(rng), gauss(rng));
        x(j, i) = std::conj(x(i, j));
      }
    const Vector yv = bicg(Eigen::Map<const Vector>(x.data(), n * n));
    const Matrix y = Eigen::Map<const Matrix>(yv.data(), n, n);
    worst = std::max(worst, matrix_opnorm(y) / matrix_opnorm(x));
  }
  out.inv_op = worst;
  return out;
}

}  // namespace mdelab
