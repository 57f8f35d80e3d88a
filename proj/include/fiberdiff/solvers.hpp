#pragma once

// Conservative finite-volume integrators for
//   * the reduced equation d rho/dt = div(sigma D grad(rho / sigma)) on a
//     curve (1D) or on a principal-direction surface grid (2D), and
//   * the full diffusion equation dP/dt = D0 Laplacian(P) in curvilinear
//     channel coordinates (u, v), used as an oracle for the reduction.
//
// All three write the update as W dQ/dt = -K Q with W a positive diagonal
// of cell weights and K a symmetric face-flux matrix whose columns sum to
// zero, so sum(W Q) is conserved up to the linear solve.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "fiberdiff/effdiff.hpp"
#include "fiberdiff/geometry.hpp"

namespace fiberdiff::solvers {

enum class TimeScheme { backward_euler, crank_nicolson, explicit_euler };
enum class FaceAverage { harmonic, arithmetic };
/// Surface solver: one coupled 2D solve, or Strang splitting into
/// axis-1 / axis-2 sweeps.
enum class Splitting { coupled, alternating };

struct StepOptions {
  TimeScheme scheme = TimeScheme::crank_nicolson;
  FaceAverage average = FaceAverage::harmonic;
  Splitting splitting = Splitting::coupled;
};

/// Effective density on a curve grid (cell averages). Periodic grids use
/// periodic boundaries, open grids zero flux.
struct GridState1D {
  geometry::Grid1D grid;
  std::vector<double> rho;
  double t = 0.0;
};

/// Effective density on a surface parameter grid, row-major (i * n2 + j),
/// per unit surface area.
struct GridState2D {
  geometry::Grid1D axis1;
  geometry::Grid1D axis2;
  std::vector<double> rho;
  double t = 0.0;
};

/// Full density P(u, v) on (u, v) in [0, L] x [-w/2, w/2], index i * n_v + j.
/// kappa holds the centre-line curvature at each u cell.
struct ChannelState2D {
  geometry::Grid1D u;
  int n_v = 8;
  double w = 0.1;
  std::vector<double> kappa;
  std::vector<double> P;
  double t = 0.0;

  double dv() const noexcept { return w / n_v; }
  double v(int j) const noexcept { return -0.5 * w + (j + 0.5) * dv(); }
  /// sqrt(det g) = 1 - kappa(u_i) v_j at a cell centre.
  double sqrt_g(int i, int j) const noexcept {
    return 1.0 - kappa[static_cast<std::size_t>(i)] * v(j);
  }
};

GridState1D make_state_1d(const geometry::Grid1D& grid, const std::function<double(double)>& rho0);
GridState2D make_state_2d(const geometry::Grid1D& axis1, const geometry::Grid1D& axis2,
                          const std::function<double(double, double)>& rho0);
ChannelState2D make_channel_state(const geometry::Grid1D& u, int n_v, double w,
                                  const geometry::Field1D& kappa,
                                  const std::function<double(double, double)>& P0);

namespace detail {
class ConservativeSystem;
}

/// Reduced 1D stepper. The matrix is factored once for the given dt.
class FickJacobs1D {
 public:
  FickJacobs1D(const effdiff::EffectiveField& field, double dt, StepOptions opts = {});

  void step(GridState1D& s) const;
  /// sum rho du
  double mass(const GridState1D& s) const;
  /// Largest face flux |sigma D d(rho/sigma)/du|, relative to the total mass.
  double flux_norm(const GridState1D& s) const;
  double dt() const noexcept { return dt_; }

 private:
  void check(const GridState1D& s) const;

  geometry::Grid1D grid_;
  std::vector<double> sigma_;
  double dt_;
  std::shared_ptr<const detail::ConservativeSystem> system_;
};

/// Reduced surface stepper on a principal-direction grid.
class EffectiveDiffusion2D {
 public:
  EffectiveDiffusion2D(const effdiff::EffectiveField& field, double dt, StepOptions opts = {});

  void step(GridState2D& s) const;
  /// sum rho dA with dA = scale1 scale2 du1 du2
  double mass(const GridState2D& s) const;
  double flux_norm(const GridState2D& s) const;
  double dt() const noexcept { return dt_; }

 private:
  void check(const GridState2D& s) const;

  geometry::Grid1D axis1_, axis2_;
  std::vector<double> sigma_;
  std::vector<double> area_;
  double dt_;
  Splitting splitting_;
  std::shared_ptr<const detail::ConservativeSystem> full_, half1_, full2_;
};

/// Full-dimensional channel oracle with zero flux through v = +-w/2.
class ChannelOracle {
 public:
  ChannelOracle(const ChannelState2D& layout, double D0, double dt, StepOptions opts = {});

  void step(ChannelState2D& s) const;
  /// sum P sqrt(g) du dv
  double mass(const ChannelState2D& s) const;
  double flux_norm(const ChannelState2D& s) const;
  double dt() const noexcept { return dt_; }

 private:
  void check(const ChannelState2D& s) const;

  int n_u_, n_v_;
  double dt_;
  std::shared_ptr<const detail::ConservativeSystem> system_;
};

/// One step each; these rebuild the operator, so loops should hold a stepper.
GridState1D step_fj_1d(GridState1D state, const effdiff::EffectiveField& field, double dt,
                       StepOptions opts = {});
GridState2D step_fj_2d(GridState2D state, const effdiff::EffectiveField& field, double dt,
                       StepOptions opts = {});
ChannelState2D step_channel_2d(ChannelState2D state, double D0, double dt, StepOptions opts = {});

/// rho(u_i) = sum_j P_ij (1 - kappa_i v_j) dv, the fiber integral of P.
GridState1D project_channel(const ChannelState2D& state);

}  // namespace fiberdiff::solvers
