#pragma once

// Command implementations behind the `fiberdiff` executable. Kept in a
// library so the tests can drive them without spawning processes.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fiberdiff/experiments.hpp"

namespace fiberdiff::cli {

enum ExitCode : int { kOk = 0, kIoError = 1, kInvariantViolation = 2, kToleranceFailure = 3 };

/// Bundle parameters shared by `tensor` and `solve`. Which fields matter
/// depends on the family:
///   channel  plane curve of constant kappa and given length, width w
///   circle   channel over a circle of radius R
///   lined    slab over the cylinder on a circle of radius R, height z_extent
///   sphere   slab over a sphere of radius r
///   torus    slab over a torus with tube radius r and centre radius R
///   tube     tube of radius r around a curve of constant kappa and tau
/// curve_csv replaces the analytic curve for channel, lined and tube.
struct FamilyConfig {
  std::string family = "channel";
  double D0 = 1.0;
  double w = 0.1;
  double r = 1.0;
  double R = 2.0;
  double kappa = 0.0;
  double tau = 0.0;
  double length = 1.0;
  double z_extent = 1.0;
  double normal_sign = 1.0;
  int n = 64;
  int n_theta = 64;
  int n_phi = 64;
  int n_z = 32;
  std::string curve_csv;
  bool closed = true;
};

struct TensorConfig {
  FamilyConfig bundle;
  bool check_quadrature = false;
  bool gnuplot = false;
  std::string out = "out";
};

struct SolveConfig {
  FamilyConfig bundle;
  std::string init = "cosine";  ///< cosine | constant | sigma | random
  int mode = 1;
  std::uint64_t seed = 1;
  std::optional<double> dt;     ///< family-dependent default when unset
  std::optional<double> t_end;
  int snapshots = 20;
  std::string scheme = "cn";    ///< be | cn | explicit
  std::string average = "harmonic";
  std::string splitting = "coupled";
  double stationary_tol = 1e-8;
  double mass_tol = 1e-10;
  bool gnuplot = false;
  std::string out = "out";
};

struct ValidateConfig {
  int draws = 1000;
  std::uint64_t seed = 2024;
  experiments::AnnulusConfig annulus;
  bool skip_annulus = false;
  std::string out = "out";
};

int cmd_tensor(const TensorConfig& cfg, std::ostream& log);
int cmd_solve(const SolveConfig& cfg, std::ostream& log);
int cmd_validate(const ValidateConfig& cfg, std::ostream& log);

/// Parses `args` (without the program name), merges an optional --config
/// JSON file under the flags, applies FIBERDIFF_OUT and dispatches. All
/// exceptions are mapped to exit codes here.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fiberdiff::cli
