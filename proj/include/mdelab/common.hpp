#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mdelab {

using cd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

// ---- error taxonomy ------------------------------------------------------

struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PositivityLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnstableFlow : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GapCollapse : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TooFewPoints : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PoorFit : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---- scalar helpers -------------------------------------------------------

// normalized trace <A> = N^{-1} tr A
inline cd ntrace(const Matrix& a) { return a.trace() / double(a.rows()); }

// normalized Hilbert-Schmidt norm <|A|^2>^{1/2}; ||I||_hs = 1
inline double hsnorm(const Matrix& a) {
  return a.norm() / std::sqrt(double(a.rows()));
}
inline double hsnorm(const RMatrix& a) {
  return a.norm() / std::sqrt(double(a.rows()));
}

// regularized modulus bracket <z> = 1 + |z|
inline double zbracket(cd z) { return 1.0 + std::abs(z); }

inline double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

std::string format_sci(double v, int digits = 12);

// ---- deterministic RNG streams ---------------------------------------------
//
// Every randomized routine takes (seed, stream) and derives an independent
// mt19937_64 via splitmix64 mixing, so trial i of a run is reproducible
// regardless of execution order.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{std::uint32_t(s), std::uint32_t(s >> 32),
                    std::uint32_t(stream), std::uint32_t(stream >> 32)};
  return std::mt19937_64(seq);
}

// least-squares line fit of y against x; returns (slope, intercept, r2)
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LineFit fit_line(const RVector& x, const RVector& y);

// empirical quantile (linear interpolation between order statistics)
double quantile(std::vector<double> v, double q);

}  // namespace mdelab
