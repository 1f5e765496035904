#include "mdelab/locallaw.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "mdelab/sampler.hpp"

namespace mdelab {

namespace {

constexpr double kTinyLog = 1e-300;

RVector to_rv(const std::vector<double>& v) {
  return Eigen::Map<const RVector>(v.data(), v.size());
}

// M y for any solution representation (M is the deterministic approximant).
Vector apply_m(const MdeSolution& sol, int n, const Vector& y) {
  switch (sol.rep) {
    case MdeRep::Scalar:
      return sol.state(0) * y;
    case MdeRep::Diagonal:
      return sol.state.cwiseProduct(y);
    case MdeRep::Circulant: {
      // M is a circulant matrix whose first column is the inverse transform
      // of the symbol: col[d] = n^{-1} sum_p state[p] e^{-2 pi i p d / n}.
      Vector col = Vector::Zero(n);
      const double step = 2.0 * M_PI / n;
      for (int d = 0; d < n; ++d) {
        cd acc = 0.0;
        for (int p = 0; p < n; ++p)
          acc += sol.state(p) * std::polar(1.0, -step * double(p) * double(d));
        col(d) = acc / double(n);
      }
      Vector out = Vector::Zero(n);
      for (int i = 0; i < n; ++i) {
        cd acc = 0.0;
        for (int j = 0; j < n; ++j) acc += col((i - j + n) % n) * y(j);
        out(i) = acc;
      }
      return out;
    }
    case MdeRep::Dense:
      return sol.dense * y;
  }
  throw SchemaError("apply_m: unknown representation");
}

Matrix make_probe_set(const Model& m, int probes, uint64_t seed) {
  const int n = m.n;
  Matrix x(n, probes);
  x.col(0).setConstant(cd(1.0 / std::sqrt(double(n)), 0.0));
  std::mt19937_64 rng = make_rng(seed, 0x70b3);
  std::normal_distribution<double> nd;
  for (int j = 1; j < probes; ++j) {
    Vector v(n);
    for (int i = 0; i < n; ++i)
      v(i) = cd(nd(rng), m.real() ? 0.0 : nd(rng));
    x.col(j) = v / v.norm();
  }
  return x;
}

}  // namespace

LocalLawRun local_law_run(const Model& m, LocalLawOptions opt) {
  const int n = m.n;
  if (n < 2) throw SchemaError("local_law_run: model size must be >= 2");
  if (opt.etas < 2) throw SchemaError("local_law_run: need at least 2 etas");
  if (opt.trials < 1 || opt.probes < 1)
    throw SchemaError("local_law_run: trials and probes must be positive");
  if (!(opt.quant > 0.0 && opt.quant <= 1.0))
    throw SchemaError("local_law_run: quantile must lie in (0, 1]");

  const double eta_lo = std::pow(double(n), -opt.eta_min_pow);
  const double eta_hi = opt.eta_max;
  if (!(eta_lo < eta_hi))
    throw SchemaError("local_law_run: eta range is empty at this size");

  std::vector<double> etas(opt.etas);
  for (int i = 0; i < opt.etas; ++i) {
    const double w = double(i) / double(opt.etas - 1);
    etas[i] = std::exp((1.0 - w) * std::log(eta_hi) + w * std::log(eta_lo));
  }

  const Matrix probes = make_probe_set(m, opt.probes, opt.seed);

  // Deterministic side, solved once per eta descending with warm starts.
  struct EtaData {
    cd z;
    cd trace;
    double rho = 0.0;
    Matrix mbil;  // probes^adj M probes
  };
  MdeSolver solver(m);
  std::vector<EtaData> det(opt.etas);
  MdeSolution warm;
  for (int i = 0; i < opt.etas; ++i) {
    const cd z(opt.energy, etas[i]);
    MdeSolution sol = warm.empty() ? solver.solve(z) : solver.solve(z, warm);
    EtaData& d = det[i];
    d.z = z;
    d.trace = sol.trace_mean();
    d.rho = sol.rho();
    d.mbil.resize(opt.probes, opt.probes);
    for (int b = 0; b < opt.probes; ++b) {
      const Vector my = apply_m(sol, n, probes.col(b));
      for (int a = 0; a < opt.probes; ++a) d.mbil(a, b) = probes.col(a).dot(my);
    }
    warm = std::move(sol);
  }

  std::vector<std::vector<double>> avg_err(opt.etas), iso_err(opt.etas);
  for (int t = 0; t < opt.trials; ++t) {
    std::mt19937_64 rng = make_rng(opt.seed, 1000 + uint64_t(t));
    const Matrix h = sample_matrix(m, rng);
    const Spectrum sp =
        m.real() ? eig_full(RMatrix(h.real())) : eig_full(h);
    const ResolventProbe pr = make_probe(sp, probes);
    for (int i = 0; i < opt.etas; ++i) {
      const EtaData& d = det[i];
      avg_err[i].push_back(std::abs(sp.resolvent_trace(d.z) - d.trace));
      double worst = 0.0;
      for (int a = 0; a < opt.probes; ++a)
        for (int b = 0; b < opt.probes; ++b)
          worst = std::max(worst, std::abs(pr.bilinear(a, b, d.z) - d.mbil(a, b)));
      iso_err[i].push_back(worst);
    }
  }

  LocalLawRun run;
  run.n = n;
  run.energy = opt.energy;
  run.points.resize(opt.etas);
  std::vector<double> lx, lavg, liso;
  for (int i = 0; i < opt.etas; ++i) {
    LocalLawPoint& p = run.points[i];
    p.eta = etas[i];
    p.avg = quantile(avg_err[i], opt.quant);
    p.iso = quantile(iso_err[i], opt.quant);
    const double zb = zbracket(det[i].z);
    const double rho = std::max(det[i].rho, 1e-12);
    // predicted sizes: avg ~ 1/(<z> n eta), iso ~ sqrt(rho / (<z>^2 n eta))
    p.avg_norm = p.avg * zb * double(n) * etas[i];
    p.iso_norm = p.iso * zb * std::sqrt(double(n) * etas[i] / rho);
    lx.push_back(std::log(etas[i]));
    lavg.push_back(std::log(std::max(p.avg, kTinyLog)));
    liso.push_back(std::log(std::max(p.iso, kTinyLog)));
  }
  run.avg_fit = fit_line(to_rv(lx), to_rv(lavg));
  run.iso_fit = fit_line(to_rv(lx), to_rv(liso));
  return run;
}

ScalingStudy scaling_study(const std::function<Model(int)>& family,
                           const std::vector<int>& sizes, LocalLawOptions opt) {
  if (sizes.size() < 2)
    throw TooFewPoints("scaling_study: need at least two sizes");
  ScalingStudy st;
  std::vector<double> ln, lavg, liso;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const int n = sizes[k];
    LocalLawOptions o = opt;
    o.seed = splitmix64(opt.seed + 0x5ca11u * (k + 1));
    LocalLawRun run = local_law_run(family(n), o);

    // sample the run at the eta closest to n^{-1/2} on the log scale
    const double target = -0.5 * std::log(double(n));
    int best = 0;
    double best_gap = std::abs(std::log(run.points[0].eta) - target);
    for (std::size_t i = 1; i < run.points.size(); ++i) {
      const double gap = std::abs(std::log(run.points[i].eta) - target);
      if (gap < best_gap) {
        best_gap = gap;
        best = int(i);
      }
    }
    ln.push_back(std::log(double(n)));
    lavg.push_back(std::log(std::max(run.points[best].avg_norm, kTinyLog)));
    liso.push_back(std::log(std::max(run.points[best].iso_norm, kTinyLog)));
    st.runs.push_back(std::move(run));
  }
  st.avg_size_fit = fit_line(to_rv(ln), to_rv(lavg));
  st.iso_size_fit = fit_line(to_rv(ln), to_rv(liso));
  return st;
}

double avg_law_metric(const Spectrum& sp, const MdeSolution& sol,
                      const Matrix& b, cd z, double dist) {
  const int n = sp.n();
  if (b.rows() != n || b.cols() != n)
    throw SchemaError("avg_law_metric: observable shape mismatch");
  if (!sp.has_vectors())
    throw SchemaError("avg_law_metric: spectrum lacks vectors");
  cd gb = 0.0;
  for (int k = 0; k < n; ++k) {
    const cd quad = sp.real
                        ? cd(sp.rvectors.col(k).transpose() *
                             (b.real() * sp.rvectors.col(k)),
                             sp.rvectors.col(k).transpose() *
                             (b.imag() * sp.rvectors.col(k)))
                        : sp.vectors.col(k).dot(b * sp.vectors.col(k));
    gb += quad / (sp.values[k] - z);
  }
  gb /= double(n);
  const cd mb = ntrace(Matrix(sol.materialize(n) * b));
  return std::abs(gb - mb) * zbracket(z) * double(n) * dist / hsnorm(b);
}

double iso_law_metric(const Spectrum& sp, const MdeSolution& sol,
                      const Vector& x, const Vector& y, cd z) {
  const int n = sp.n();
  if (x.size() != n || y.size() != n)
    throw SchemaError("iso_law_metric: probe shape mismatch");
  Matrix xy(n, 2);
  xy.col(0) = x;
  xy.col(1) = y;
  const ResolventProbe pr = make_probe(sp, xy);
  const cd gxy = pr.bilinear(0, 1, z);
  const cd mxy = x.dot(Matrix(sol.materialize(n)) * y);
  const double eta = z.imag();
  const double rho = std::max(sol.rho(), 1e-12);
  return std::abs(gxy - mxy) * zbracket(z) * std::sqrt(double(n) * eta / rho);
}

double ward_residual(const Matrix& h, cd z) {
  const int n = int(h.rows());
  if (n < 1 || h.cols() != n) throw SchemaError("ward_residual: square matrix");
  const double eta = z.imag();
  if (!(eta > 0)) throw SchemaError("ward_residual: Im z must be positive");
  Matrix g = Matrix::Identity(n, n);
  g = (h - z * Matrix::Identity(n, n)).partialPivLu().solve(g);
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lhs = g.row(i).squaredNorm();
    const double rhs = g(i, i).imag() / eta;
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(rhs, 1e-300));
  }
  return worst;
}

}  // namespace mdelab
