#pragma once

// Validation experiments reused by the CLI `validate` command and the
// acceptance suite.

#include <cstdint>
#include <span>
#include <vector>

#include "fiberdiff/solvers.hpp"

namespace fiberdiff::experiments {

/// Least-squares decay rate: -slope of log(amplitude) against time.
double fit_decay_rate(std::span<const double> t, std::span<const double> amplitude);

/// Coefficient a of a cos(2 pi mode u / L) in a periodic 1D state.
double cosine_amplitude(const solvers::GridState1D& s, int mode);

struct AnnulusConfig {
  double R = 1.0;
  double w = 0.1;
  double D0 = 1.0;
  int n_u = 64;    ///< coarse resolution along the channel
  int n_v = 8;     ///< coarse resolution across
  double dt = 2e-3;
  double t_fit_start = 0.05;  ///< skip the fast transverse transient
  double t_end = 1.0;
};

struct AnnulusRun {
  int n_u = 0;
  int n_v = 0;
  double dt = 0.0;
  double rate = 0.0;        ///< fitted decay of the projected cos mode
  double mass_drift = 0.0;  ///< max relative mass change over the run
};

struct AnnulusResult {
  double predicted = 0.0;     ///< D_eff / R^2 with D_eff the channel closed form
  std::vector<AnnulusRun> runs;
  double extrapolated = 0.0;  ///< Richardson in dt (first order), then grid (second order)
  double rel_error = 0.0;
  double seconds = 0.0;
};

/// Oracle run on an annulus (channel over a circle) started from the
/// fiber-constant field P = cos(u / R); uses backward Euler.
AnnulusRun annulus_run(const AnnulusConfig& cfg, int n_u, int n_v, double dt);
AnnulusResult annulus_decay_experiment(const AnnulusConfig& cfg);

struct SweepResult {
  int draws = 0;
  double channel = 0.0;  ///< max relative closed/quadrature discrepancy
  double slab_D1 = 0.0;
  double slab_D2 = 0.0;
  double slab_sigma = 0.0;
  double tube = 0.0;
  double seconds = 0.0;
};

/// Random (kappa, w, r, D0) draws with |kappa| (w/2 or r) <= margin.
SweepResult closed_vs_quadrature_sweep(int draws, std::uint64_t seed, double margin = 0.9);

struct CommutationResult {
  double max_rel_diff = 0.0;  ///< max over time of |rho_oracle - rho_reduced| / max |rho_reduced|
  double final_rel_diff = 0.0;
};

/// Oracle (projected) vs reduced 1D solver on a channel with curvature
/// kappa(u) = k0 + k1 cos(2 pi u / L) over one diffusion time L^2 / D0.
CommutationResult commutation_experiment(double L, double w, double k0, double k1, int n_u,
                                         int n_v, double dt);

}  // namespace fiberdiff::experiments
