#include "fiberdiff/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "fiberdiff/effdiff.hpp"

namespace fiberdiff::experiments {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

}  // namespace

double fit_decay_rate(std::span<const double> t, std::span<const double> a) {
  if (t.size() != a.size() || t.size() < 2) throw std::invalid_argument("need >= 2 matching samples");
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = static_cast<double>(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(a[k] > 0.0)) throw std::domain_error("amplitude must stay positive for a log fit");
    const double y = std::log(a[k]);
    st += t[k];
    sy += y;
    stt += t[k] * t[k];
    sty += t[k] * y;
  }
  return -(n * sty - st * sy) / (n * stt - st * st);
}

double cosine_amplitude(const solvers::GridState1D& s, int mode) {
  const double k = 2.0 * std::numbers::pi * mode / s.grid.length;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < s.grid.n; ++i) {
    const double c = std::cos(k * s.grid.point(i));
    num += s.rho[static_cast<std::size_t>(i)] * c;
    den += c * c;
  }
  return num / den;
}

AnnulusRun annulus_run(const AnnulusConfig& cfg, int n_u, int n_v, double dt) {
  const geometry::Grid1D grid(2.0 * std::numbers::pi * cfg.R, n_u, true);
  auto state = solvers::make_channel_state(grid, n_v, cfg.w, geometry::Field1D::constant(1.0 / cfg.R),
                                           [&](double u, double) { return std::cos(u / cfg.R); });
  // A uniform background keeps the mass functional away from zero.
  for (double& p : state.P) p += 2.0;
  const solvers::ChannelOracle oracle(state, cfg.D0, dt, {solvers::TimeScheme::backward_euler});
  const double m0 = oracle.mass(state);
  AnnulusRun run{n_u, n_v, dt, 0.0, 0.0};
  std::vector<double> ts, amps;
  const auto steps = static_cast<long>(std::llround(cfg.t_end / dt));
  for (long s = 1; s <= steps; ++s) {
    oracle.step(state);
    run.mass_drift = std::max(run.mass_drift, rel(oracle.mass(state), m0));
    if (state.t >= cfg.t_fit_start - 1e-12) {
      ts.push_back(state.t);
      amps.push_back(cosine_amplitude(solvers::project_channel(state), 1));
    }
  }
  run.rate = fit_decay_rate(ts, amps);
  return run;
}

AnnulusResult annulus_decay_experiment(const AnnulusConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  AnnulusResult res;
  res.predicted = effdiff::channel_D_closed(cfg.D0, cfg.w, 1.0 / cfg.R) / (cfg.R * cfg.R);
  const int n1 = cfg.n_u, m1 = cfg.n_v;
  const double dt = cfg.dt;
  res.runs.push_back(annulus_run(cfg, n1, m1, dt));
  res.runs.push_back(annulus_run(cfg, n1, m1, 0.5 * dt));
  res.runs.push_back(annulus_run(cfg, 2 * n1, 2 * m1, dt));
  res.runs.push_back(annulus_run(cfg, 2 * n1, 2 * m1, 0.5 * dt));
  const double coarse = 2.0 * res.runs[1].rate - res.runs[0].rate;
  const double fine = 2.0 * res.runs[3].rate - res.runs[2].rate;
  res.extrapolated = (4.0 * fine - coarse) / 3.0;
  res.rel_error = rel(res.extrapolated, res.predicted);
  res.seconds = seconds_since(t0);
  return res;
}

SweepResult closed_vs_quadrature_sweep(int draws, std::uint64_t seed, double margin) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), width(0.01, 2.0), diff(0.1, 10.0);
  SweepResult r;
  r.draws = draws;
  for (int k = 0; k < draws; ++k) {
    const double D0 = diff(rng);
    {
      const double w = width(rng);
      const double kappa = margin * unit(rng) * 2.0 / w;
      const auto q = effdiff::fiber_effective_D(effdiff::LocalFiber::channel(kappa, w), D0);
      r.channel = std::max(r.channel, rel(effdiff::channel_D_closed(D0, w, kappa), q[0]));
    }
    {
      const double w = width(rng);
      const double k1 = margin * unit(rng) * 2.0 / w, k2 = margin * unit(rng) * 2.0 / w;
      const auto f = effdiff::LocalFiber::slab(k1, k2, w);
      const auto q = effdiff::fiber_effective_D(f, D0);
      const auto c = effdiff::surface_D_closed(D0, w, k1, k2);
      r.slab_D1 = std::max(r.slab_D1, rel(c[0], q[0]));
      r.slab_D2 = std::max(r.slab_D2, rel(c[1], q[1]));
      r.slab_sigma = std::max(r.slab_sigma, rel(effdiff::slab_sigma_closed(w, k1, k2), effdiff::fiber_sigma(f)));
    }
    {
      const double radius = 0.5 * width(rng);
      const double kappa = margin * std::abs(unit(rng)) / radius;
      const auto q = effdiff::fiber_effective_D(effdiff::LocalFiber::tube(kappa, radius), D0);
      r.tube = std::max(r.tube, rel(effdiff::tube_D_closed(D0, radius, kappa), q[0]));
    }
  }
  r.seconds = seconds_since(t0);
  return r;
}

CommutationResult commutation_experiment(double L, double w, double k0, double k1, int n_u, int n_v,
                                         double dt) {
  const geometry::Grid1D grid(L, n_u, true);
  const double two_pi = 2.0 * std::numbers::pi;
  const auto kappa = geometry::Field1D::function([=](double u) { return k0 + k1 * std::cos(two_pi * u / L); });
  auto Q0 = [=](double u) { return 2.0 + std::cos(two_pi * u / L) + 0.5 * std::sin(2.0 * two_pi * u / L); };

  auto oracle_state = solvers::make_channel_state(grid, n_v, w, kappa, [&](double u, double) { return Q0(u); });
  const solvers::ChannelOracle oracle(oracle_state, 1.0, dt);

  effdiff::BundleSpec b{effdiff::PlanarChannel{geometry::PlaneCurve(grid, kappa), w}, 1.0, {}};
  const auto field = effdiff::effective_field(b);
  // Reduced initial data is the projection of the oracle's, rho = Q sigma.
  auto reduced = solvers::project_channel(oracle_state);
  const solvers::FickJacobs1D fj(field, dt);

  CommutationResult res;
  const auto steps = static_cast<long>(std::llround(L * L / dt));
  for (long s = 0; s < steps; ++s) {
    oracle.step(oracle_state);
    fj.step(reduced);
    const auto projected = solvers::project_channel(oracle_state);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < reduced.rho.size(); ++i) {
      diff = std::max(diff, std::abs(projected.rho[i] - reduced.rho[i]));
      scale = std::max(scale, std::abs(reduced.rho[i]));
    }
    res.final_rel_diff = diff / scale;
    res.max_rel_diff = std::max(res.max_rel_diff, res.final_rel_diff);
  }
  return res;
}

}  // namespace fiberdiff::experiments
