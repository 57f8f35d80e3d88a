#include "fiberdiff/solvers.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fiberdiff/errors.hpp"

namespace fiberdiff::solvers {

namespace detail {

struct Face {
  int a;
  int b;
  double transmissibility;  // flux from a to b is T (Q_a - Q_b)
};

class ConservativeSystem {
 public:
  ConservativeSystem(std::vector<double> weights, std::vector<Face> faces, double dt, TimeScheme scheme)
      : w_(std::move(weights)), faces_(std::move(faces)), dt_(dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw SolverError("time step must be positive");
    theta_ = scheme == TimeScheme::backward_euler ? 1.0 : scheme == TimeScheme::crank_nicolson ? 0.5 : 0.0;
    const auto n = static_cast<Eigen::Index>(w_.size());
    for (double x : w_)
      if (!(x > 0.0)) throw SolverError("cell weights must be positive");

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(faces_.size() * 4);
    for (const Face& f : faces_) {
      trip.emplace_back(f.a, f.a, f.transmissibility);
      trip.emplace_back(f.b, f.b, f.transmissibility);
      trip.emplace_back(f.a, f.b, -f.transmissibility);
      trip.emplace_back(f.b, f.a, -f.transmissibility);
    }
    k_.resize(n, n);
    k_.setFromTriplets(trip.begin(), trip.end());

    if (theta_ == 0.0) {
      std::vector<double> out(w_.size(), 0.0);
      for (const Face& f : faces_) {
        out[static_cast<std::size_t>(f.a)] += f.transmissibility;
        out[static_cast<std::size_t>(f.b)] += f.transmissibility;
      }
      for (std::size_t i = 0; i < w_.size(); ++i)
        if (dt * out[i] > w_[i])
          throw SolverError("explicit step violates the stability limit dt <= W_i / sum T at cell " +
                            std::to_string(i));
      return;
    }
    Eigen::SparseMatrix<double> a = theta_ * dt_ * k_;
    for (Eigen::Index i = 0; i < n; ++i) a.coeffRef(i, i) += w_[static_cast<std::size_t>(i)];
    solver_.compute(a);
    if (solver_.info() != Eigen::Success) throw SolverError("factorization of the step matrix failed");
  }

  void step(std::span<double> q) const {
    const auto n = static_cast<Eigen::Index>(w_.size());
    Eigen::Map<Eigen::VectorXd> qv(q.data(), n);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) rhs[i] = w_[static_cast<std::size_t>(i)] * qv[i];
    if (theta_ < 1.0) rhs -= (1.0 - theta_) * dt_ * (k_ * qv);
    if (theta_ == 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) qv[i] = rhs[i] / w_[static_cast<std::size_t>(i)];
      return;
    }
    Eigen::VectorXd sol = solver_.solve(rhs);
    if (solver_.info() != Eigen::Success) throw SolverError("linear solve failed");
    qv = sol;
  }

  double mass(std::span<const double> q) const {
    double s = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) s += w_[i] * q[i];
    return s;
  }

  double max_flux(std::span<const double> q) const {
    double m = 0.0;
    for (const Face& f : faces_)
      m = std::max(m, std::abs(f.transmissibility * (q[static_cast<std::size_t>(f.a)] - q[static_cast<std::size_t>(f.b)])));
    return m;
  }

 private:
  std::vector<double> w_;
  std::vector<Face> faces_;
  double dt_;
  double theta_ = 0.5;
  Eigen::SparseMatrix<double> k_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

}  // namespace detail

namespace {

double face_average(double a, double b, FaceAverage avg) {
  if (avg == FaceAverage::arithmetic) return 0.5 * (a + b);
  return 2.0 * a * b / (a + b);
}

bool same_grid(const geometry::Grid1D& a, const geometry::Grid1D& b) {
  return a.n == b.n && a.periodic == b.periodic && std::abs(a.length - b.length) <= 1e-12 * a.length;
}

// Faces along one axis of an n1 x n2 row-major grid.
template <class Coef>
void axis_faces(std::vector<detail::Face>& out, const geometry::Grid1D& along, int n_other,
                bool first_axis, int n2, Coef coef) {
  const int n = along.n;
  const int last = along.periodic ? n : n - 1;
  if (along.periodic && n < 3) throw SolverError("periodic axis needs at least 3 cells");
  for (int o = 0; o < n_other; ++o)
    for (int i = 0; i < last; ++i) {
      const int ip = (i + 1) % n;
      const int a = first_axis ? i * n2 + o : o * n2 + i;
      const int b = first_axis ? ip * n2 + o : o * n2 + ip;
      out.push_back({a, b, coef(i, ip, o)});
    }
}

std::vector<double> ratio(std::span<const double> rho, std::span<const double> sigma) {
  std::vector<double> q(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) q[i] = rho[i] / sigma[i];
  return q;
}

}  // namespace

GridState1D make_state_1d(const geometry::Grid1D& grid, const std::function<double(double)>& rho0) {
  GridState1D s{grid, std::vector<double>(static_cast<std::size_t>(grid.n)), 0.0};
  for (int i = 0; i < grid.n; ++i) s.rho[static_cast<std::size_t>(i)] = rho0(grid.point(i));
  return s;
}

GridState2D make_state_2d(const geometry::Grid1D& axis1, const geometry::Grid1D& axis2,
                          const std::function<double(double, double)>& rho0) {
  GridState2D s{axis1, axis2, std::vector<double>(static_cast<std::size_t>(axis1.n) * static_cast<std::size_t>(axis2.n)), 0.0};
  for (int i = 0; i < axis1.n; ++i)
    for (int j = 0; j < axis2.n; ++j)
      s.rho[static_cast<std::size_t>(i * axis2.n + j)] = rho0(axis1.point(i), axis2.point(j));
  return s;
}

ChannelState2D make_channel_state(const geometry::Grid1D& u, int n_v, double w,
                                  const geometry::Field1D& kappa,
                                  const std::function<double(double, double)>& P0) {
  if (n_v < 2) throw std::invalid_argument("channel oracle needs at least 2 cells across");
  if (!(w > 0.0)) throw std::invalid_argument("channel width must be positive");
  ChannelState2D s;
  s.u = u;
  s.n_v = n_v;
  s.w = w;
  s.kappa.resize(static_cast<std::size_t>(u.n));
  for (int i = 0; i < u.n; ++i) {
    s.kappa[static_cast<std::size_t>(i)] = kappa(u.point(i));
    if (!(1.0 - std::abs(s.kappa[static_cast<std::size_t>(i)]) * 0.5 * w > 1e-12))
      throw InvariantViolation("|kappa| w/2 >= 1 (channel self-intersects)", "u=" + std::to_string(u.point(i)));
  }
  s.P.resize(static_cast<std::size_t>(u.n) * static_cast<std::size_t>(n_v));
  for (int i = 0; i < u.n; ++i)
    for (int j = 0; j < n_v; ++j) s.P[static_cast<std::size_t>(i * n_v + j)] = P0(u.point(i), s.v(j));
  return s;
}

// ---------------------------------------------------------------------------

FickJacobs1D::FickJacobs1D(const effdiff::EffectiveField& field, double dt, StepOptions opts)
    : grid_(field.axis1), sigma_(field.sigma), dt_(dt) {
  if (field.base_dim != 1) throw std::invalid_argument("FickJacobs1D needs a curve-based field");
  if (grid_.n < 8) throw std::invalid_argument("1D grid needs at least 8 cells");
  const double du = grid_.spacing();
  std::vector<double> w(sigma_.size()), c(sigma_.size());
  for (std::size_t i = 0; i < sigma_.size(); ++i) {
    w[i] = du * sigma_[i];
    c[i] = sigma_[i] * field.D1[i];
  }
  std::vector<detail::Face> faces;
  axis_faces(faces, grid_, 1, true, 1, [&](int i, int ip, int) {
    return face_average(c[static_cast<std::size_t>(i)], c[static_cast<std::size_t>(ip)], opts.average) / du;
  });
  system_ = std::make_shared<detail::ConservativeSystem>(std::move(w), std::move(faces), dt, opts.scheme);
}

void FickJacobs1D::check(const GridState1D& s) const {
  if (!same_grid(s.grid, grid_) || s.rho.size() != sigma_.size())
    throw std::invalid_argument("state grid does not match the effective field grid");
}

void FickJacobs1D::step(GridState1D& s) const {
  check(s);
  auto q = ratio(s.rho, sigma_);
  system_->step(q);
  for (std::size_t i = 0; i < q.size(); ++i) s.rho[i] = sigma_[i] * q[i];
  s.t += dt_;
}

double FickJacobs1D::mass(const GridState1D& s) const {
  check(s);
  double m = 0.0;
  for (double r : s.rho) m += r;
  return m * grid_.spacing();
}

double FickJacobs1D::flux_norm(const GridState1D& s) const {
  check(s);
  return system_->max_flux(ratio(s.rho, sigma_)) / std::abs(mass(s));
}

// ---------------------------------------------------------------------------

EffectiveDiffusion2D::EffectiveDiffusion2D(const effdiff::EffectiveField& field, double dt, StepOptions opts)
    : axis1_(field.axis1), sigma_(field.sigma), dt_(dt), splitting_(opts.splitting) {
  if (field.base_dim != 2 || !field.axis2)
    throw std::invalid_argument("EffectiveDiffusion2D needs a surface-based field");
  if (!field.principal_aligned)
    throw SolverError("surface grid is not aligned with the principal directions (unsupported)");
  axis2_ = *field.axis2;
  const int n1 = axis1_.n, n2 = axis2_.n;
  const double d1 = axis1_.spacing(), d2 = axis2_.spacing();
  const std::size_t n = sigma_.size();
  area_.resize(n);
  std::vector<double> w(n), c1(n), c2(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double h1 = field.scale1[k], h2 = field.scale2[k];
    area_[k] = h1 * h2 * d1 * d2;
    w[k] = area_[k] * sigma_[k];
    c1[k] = sigma_[k] * field.D1[k] * h2 / h1;
    c2[k] = sigma_[k] * field.D2[k] * h1 / h2;
  }
  std::vector<detail::Face> f1, f2;
  axis_faces(f1, axis1_, n2, true, n2, [&](int i, int ip, int j) {
    return face_average(c1[static_cast<std::size_t>(i * n2 + j)], c1[static_cast<std::size_t>(ip * n2 + j)], opts.average) * d2 / d1;
  });
  axis_faces(f2, axis2_, n1, false, n2, [&](int j, int jp, int i) {
    return face_average(c2[static_cast<std::size_t>(i * n2 + j)], c2[static_cast<std::size_t>(i * n2 + jp)], opts.average) * d1 / d2;
  });
  if (splitting_ == Splitting::coupled) {
    std::vector<detail::Face> all = f1;
    all.insert(all.end(), f2.begin(), f2.end());
    full_ = std::make_shared<detail::ConservativeSystem>(w, std::move(all), dt, opts.scheme);
  } else {
    // Strang: half step along axis 1, full along axis 2, half along axis 1.
    half1_ = std::make_shared<detail::ConservativeSystem>(w, f1, 0.5 * dt, opts.scheme);
    full2_ = std::make_shared<detail::ConservativeSystem>(w, f2, dt, opts.scheme);
    std::vector<detail::Face> all = f1;
    all.insert(all.end(), f2.begin(), f2.end());
    // Kept for flux diagnostics only; never stepped.
    full_ = std::make_shared<detail::ConservativeSystem>(std::move(w), std::move(all), dt, TimeScheme::backward_euler);
  }
}

void EffectiveDiffusion2D::check(const GridState2D& s) const {
  if (!same_grid(s.axis1, axis1_) || !same_grid(s.axis2, axis2_) || s.rho.size() != sigma_.size())
    throw std::invalid_argument("state grid does not match the effective field grid");
}

void EffectiveDiffusion2D::step(GridState2D& s) const {
  check(s);
  auto q = ratio(s.rho, sigma_);
  if (splitting_ == Splitting::coupled) {
    full_->step(q);
  } else {
    half1_->step(q);
    full2_->step(q);
    half1_->step(q);
  }
  for (std::size_t i = 0; i < q.size(); ++i) s.rho[i] = sigma_[i] * q[i];
  s.t += dt_;
}

double EffectiveDiffusion2D::mass(const GridState2D& s) const {
  check(s);
  double m = 0.0;
  for (std::size_t k = 0; k < s.rho.size(); ++k) m += s.rho[k] * area_[k];
  return m;
}

double EffectiveDiffusion2D::flux_norm(const GridState2D& s) const {
  check(s);
  return full_->max_flux(ratio(s.rho, sigma_)) / std::abs(mass(s));
}

// ---------------------------------------------------------------------------

ChannelOracle::ChannelOracle(const ChannelState2D& layout, double D0, double dt, StepOptions opts)
    : n_u_(layout.u.n), n_v_(layout.n_v), dt_(dt) {
  if (!(D0 > 0.0)) throw std::invalid_argument("D0 must be positive");
  if (layout.kappa.size() != static_cast<std::size_t>(n_u_))
    throw std::invalid_argument("curvature samples do not match the u grid");
  const double du = layout.u.spacing(), dv = layout.dv();
  const std::size_t n = static_cast<std::size_t>(n_u_) * static_cast<std::size_t>(n_v_);
  std::vector<double> w(n);
  for (int i = 0; i < n_u_; ++i)
    for (int j = 0; j < n_v_; ++j) {
      const double g = layout.sqrt_g(i, j);
      if (!(g > 1e-12)) throw InvariantViolation("singular channel metric", "u=" + std::to_string(layout.u.point(i)));
      w[static_cast<std::size_t>(i * n_v_ + j)] = du * dv * g;
    }
  std::vector<detail::Face> faces;
  // u faces: D0 * integral over the cell's v range of sqrt(g) g^uu = 1/(1 - k v).
  axis_faces(faces, layout.u, n_v_, true, n_v_, [&](int i, int ip, int j) {
    const double k = 0.5 * (layout.kappa[static_cast<std::size_t>(i)] + layout.kappa[static_cast<std::size_t>(ip)]);
    const double hi = layout.v(j) + 0.5 * dv;
    double integral;
    if (std::abs(k * dv) < 1e-8)
      integral = dv / (1.0 - k * layout.v(j));
    else
      integral = std::log1p(k * dv / (1.0 - k * hi)) / k;
    return D0 * integral / du;
  });
  // v faces: D0 sqrt(g) at the face, times du / dv. No faces at v = +-w/2.
  for (int i = 0; i < n_u_; ++i)
    for (int j = 0; j + 1 < n_v_; ++j) {
      const double vf = layout.v(j) + 0.5 * dv;
      faces.push_back({i * n_v_ + j, i * n_v_ + j + 1,
                       D0 * (1.0 - layout.kappa[static_cast<std::size_t>(i)] * vf) * du / dv});
    }
  system_ = std::make_shared<detail::ConservativeSystem>(std::move(w), std::move(faces), dt, opts.scheme);
}

void ChannelOracle::check(const ChannelState2D& s) const {
  if (s.u.n != n_u_ || s.n_v != n_v_ || s.P.size() != static_cast<std::size_t>(n_u_) * static_cast<std::size_t>(n_v_))
    throw std::invalid_argument("channel state does not match the oracle layout");
}

void ChannelOracle::step(ChannelState2D& s) const {
  check(s);
  system_->step(s.P);
  s.t += dt_;
}

double ChannelOracle::mass(const ChannelState2D& s) const {
  check(s);
  return system_->mass(s.P);
}

double ChannelOracle::flux_norm(const ChannelState2D& s) const {
  check(s);
  return system_->max_flux(s.P) / std::abs(mass(s));
}

// ---------------------------------------------------------------------------

GridState1D step_fj_1d(GridState1D state, const effdiff::EffectiveField& field, double dt, StepOptions opts) {
  FickJacobs1D(field, dt, opts).step(state);
  return state;
}

GridState2D step_fj_2d(GridState2D state, const effdiff::EffectiveField& field, double dt, StepOptions opts) {
  EffectiveDiffusion2D(field, dt, opts).step(state);
  return state;
}

ChannelState2D step_channel_2d(ChannelState2D state, double D0, double dt, StepOptions opts) {
  ChannelOracle(state, D0, dt, opts).step(state);
  return state;
}

GridState1D project_channel(const ChannelState2D& s) {
  GridState1D out{s.u, std::vector<double>(static_cast<std::size_t>(s.u.n), 0.0), s.t};
  const double dv = s.dv();
  for (int i = 0; i < s.u.n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < s.n_v; ++j) acc += s.P[static_cast<std::size_t>(i * s.n_v + j)] * s.sqrt_g(i, j) * dv;
    out.rho[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

}  // namespace fiberdiff::solvers
