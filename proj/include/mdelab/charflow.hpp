#pragma once

#include <functional>
#include <vector>

#include "mdelab/shape.hpp"

namespace mdelab {

// Time-indexed data pair (A_t, S_t) for the Ornstein-Uhlenbeck interpolation.
// The model of interest sits at the terminal time T; running backward to
// t < T rescales the expectation and moves the self-energy away from the
// class Gaussian reference:
//   A_t = e^{(T-t)/2} A,   S_t = S_gauss + e^{T-t} (S - S_gauss).
struct FlowFamily {
  Model terminal;
  double horizon = 0.0;  // T

  Model at(double t) const;  // data pair at time t in [0, T]
  // largest backward horizon keeping S_t admissible (wigner-type: +inf)
  double max_horizon() const;
};

// characteristic ODE dz/dt = -z/2 - <M_t(z_t)>, integrated forward in t
struct FlowPoint {
  double t = 0.0;
  cd z{0.0, 0.0};
  cd m{0.0, 0.0};     // <M_t(z_t)>
  double rho = 0.0;   // Im m / pi
};

struct FlowTrajectory {
  std::vector<FlowPoint> points;
  bool exited = false;  // stopped early because Im z reached eta_min
  const FlowPoint& front() const { return points.front(); }
  const FlowPoint& back() const { return points.back(); }
};

struct FlowOptions {
  int steps = 64;           // initial RK4 grid; steps halve adaptively
  double tol = 1e-10;       // step-doubling local error target
  double eta_min = 1e-9;    // stop (flag) if Im z would cross this
  MdeOptions mde{};
};

// integrate the characteristic from (t0, z0) to t1 (either direction)
FlowTrajectory integrate_characteristic(const FlowFamily& fam, cd z0,
                                        double t0, double t1,
                                        FlowOptions opt = {});

// conservation diagnostics along a trajectory:
//  res_level: max |e^{t} (eta_t / rho_t + pi) - const| / const
//  res_mass:  max |d(eta rho)/dt + pi rho^2| / (pi rho^2)  (finite differences)
struct ConservationReport {
  double res_level = 0.0;
  double res_mass = 0.0;
};
ConservationReport conservation_residuals(const FlowFamily& fam,
                                          const FlowTrajectory& traj);

// transported solution: M_t(z_t) = e^{-(T-t)/2} M_T(z_T) ... the
// characteristic transports the full matrix solution by a scalar factor
Matrix transport_solution(const Matrix& m_terminal, double horizon, double t);
cd transport_trace(cd m_terminal, double horizon, double t);

// gap endpoints under the backward flow: integrate the characteristic
// starting from each terminal edge along the real axis
struct GapTrack {
  std::vector<double> t;
  std::vector<double> lo, hi;    // endpoint positions
  std::vector<double> delta;     // gap lengths
};
GapTrack evolve_gap(const FlowFamily& fam, double edge_lo, double edge_hi,
                    int steps = 32, FlowOptions opt = {});

// multi-scale analysis bookkeeping ------------------------------------------

struct FlowParams {
  double eps = 0.1;     // above-scale exponent (rho N eta >= N^eps)
  double zeta = 0.01;   // sub-scale exponent (rho N eta >= N^{-zeta/2})
  double delta = 0.02;  // time-step exponent of the shrinking grid
  double xi = 0.01;     // terminal-time exponent, T = N^{-xi/4}; = eps/10
  double c_lower = 0.1;  // c' in eta/rho >= c' (N^{-1+eps} + T - t)
  double c_upper = 1.0;  // C' in |E| v eta <= C_L + C' (T - t)
  double c_l = 10.0;     // C_L, spectral window half-width
  double r_front = 1.0;  // linear-growth rate inside the front function
};

// shrinking time grid {0, T - N^{-k delta} T, ..., T}; the index count is the
// smallest K with N^{-K delta} T <= N^{-1+eps}
std::vector<double> flow_time_grid(int n, double horizon, FlowParams p = {});

// front function separating the sub-scale regime from a gap of width
// gap_delta at time t:
//   f(t) = [ (n^{-1+eps} + r (T-t)) / (2 gap^{1/6})  v  n^eps sqrt(eta_f) ]^2
// with eta_f = n^{-2/3} gap^{1/9}; throws GapCollapse when f > gap/4
double front_function(double t, double horizon, int n, double gap_delta,
                      FlowParams p = {});

// membership with per-inequality margins (positive = satisfied, the margin
// is ratio - 1 for each defining inequality)
struct DomainCheck {
  bool member = false;
  double margin = 0.0;            // min of margins
  std::vector<double> margins;
};

// above-scale domain at time t:
//   rho n eta >= n^eps;  |E| v eta <= C_L + C'(T-t);
//   eta / rho >= c' (n^{-1+eps} + T - t)
DomainCheck domain_above(const FlowFamily& fam, cd z, double t,
                         FlowParams p = {});

// sub-scale domain around the time-t gap [edge_lo, edge_hi]:
//   dist(Re z, edges) >= f(t);  n^{-zeta/2} <= rho n eta <= n^eps
DomainCheck domain_sub(const FlowFamily& fam, cd z, double t, double edge_lo,
                       double edge_hi, FlowParams p = {});

enum class FlowDomain { Above, Sub, Outside };
// convenience wrapper: evolves the terminal gap nearest to Re z (if any)
// back to time t and tests both domains
FlowDomain classify_domain(const FlowFamily& fam, cd z, double t,
                           const SupportScan& terminal_scan, FlowParams p = {});

}  // namespace mdelab
