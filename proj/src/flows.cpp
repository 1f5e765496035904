#include "mdelab/flows.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace mdelab {

Matrix zig_step(const Matrix& h0, const CovarianceTensor& gauss_ref, double t,
                std::mt19937_64& rng) {
  if (t < 0.0) throw SchemaError("zig_step: negative time");
  return std::exp(-0.5 * t) * h0 +
         std::sqrt(-std::expm1(-t)) * gauss_ref.sample(rng);
}

Matrix zag_step(const Matrix& h, const Matrix& mean,
                const CovarianceTensor& model_cov, double s,
                std::mt19937_64& rng) {
  if (s < 0.0) throw SchemaError("zag_step: negative time");
  return mean + std::exp(-0.5 * s) * (h - mean) +
         std::sqrt(-std::expm1(-s)) * model_cov.sample(rng);
}

double ou_time(double c, double t) {
  if (!(c > 0.0) || !std::isfinite(c))
    throw SchemaError("ou_time: fullness constant must be positive");
  if (t < 0.0 || !std::isfinite(t)) throw SchemaError("ou_time: bad time");
  const double slack = c - 1.0 + std::exp(-t);
  if (slack <= 0.0) {
    std::ostringstream msg;
    msg << "ou_time: t = " << t << " reaches the horizon -log(1-c) = "
        << -std::log1p(-c) << " for c = " << c;
    throw UnstableFlow(msg.str());
  }
  return std::log(c) - std::log(slack);
}

Matrix fat_step(const Matrix& h, const Matrix& mean,
                const CovarianceTensor& thin_cov, double s, double t,
                std::mt19937_64& rng) {
  return std::exp(0.5 * t) * zag_step(h, mean, thin_cov, s, rng);
}

SurjectivityDraw surjectivity_draw(const Matrix& h, const Matrix& mean,
                                   const CovarianceTensor& model_cov,
                                   const CovarianceTensor& gauss_ref, double c,
                                   double t, std::mt19937_64& rng) {
  if (model_cov.n() != gauss_ref.n() || model_cov.dim() != gauss_ref.dim())
    throw SchemaError("surjectivity_draw: covariance shapes differ");
  const double s = ou_time(c, t);
  CovarianceTensor thin(model_cov.basis(),
                        model_cov.cov() - c * gauss_ref.cov());
  if (!thin.psd())
    throw UnstableFlow(
        "surjectivity_draw: Cov_H - c Cov_G has a negative direction; "
        "c exceeds the fullness constant of the model");
  return {fat_step(h, mean, thin, s, t, rng), s};
}

CovarianceTensor zig_covariance(const CovarianceTensor& start,
                                const CovarianceTensor& gauss_ref, double t) {
  if (t < 0.0) throw SchemaError("zig_covariance: negative time");
  return gauss_ref.blend(start, std::exp(-t));
}

}  // namespace mdelab
