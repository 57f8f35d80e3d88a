#include "fiberdiff/output.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace fiberdiff::output {

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::ios_base::failure("error while writing " + path.string());
}

nlohmann::json stats(const std::vector<double>& v) {
  if (v.empty()) return nullptr;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return {{"min", *lo}, {"max", *hi}, {"mean", s / static_cast<double>(v.size())}};
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific, 16);
  if (res.ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, res.ptr);
}

void write_field_csv(const effdiff::EffectiveField& f, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << f.axis_names[0];
  if (f.base_dim == 2) out << ',' << f.axis_names[1];
  out << ",sigma,D1";
  if (f.base_dim == 2) out << ",D2";
  const bool quad = !f.quadrature_discrepancy.empty();
  if (quad) out << ",quad_max_rel_err";
  out << '\n';
  for (int i = 0; i < f.n1(); ++i)
    for (int j = 0; j < f.n2(); ++j) {
      const std::size_t k = f.index(i, j);
      out << format_double(f.axis1.point(i));
      if (f.base_dim == 2) out << ',' << format_double(f.axis2->point(j));
      out << ',' << format_double(f.sigma[k]) << ',' << format_double(f.D1[k]);
      if (f.base_dim == 2) out << ',' << format_double(f.D2[k]);
      if (quad) out << ',' << format_double(f.quadrature_discrepancy[k]);
      out << '\n';
    }
  finish(out, path);
}

nlohmann::json field_statistics(const effdiff::EffectiveField& f) {
  nlohmann::json j;
  j["sigma"] = stats(f.sigma);
  j["D1"] = stats(f.D1);
  if (f.base_dim == 2) j["D2"] = stats(f.D2);
  if (!f.quadrature_discrepancy.empty()) j["quad_max_rel_err"] = stats(f.quadrature_discrepancy);
  return j;
}

void write_state_csv(const solvers::GridState1D& s, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "u,rho\n";
  for (int i = 0; i < s.grid.n; ++i)
    out << format_double(s.grid.point(i)) << ',' << format_double(s.rho[static_cast<std::size_t>(i)]) << '\n';
  finish(out, path);
}

void write_state_csv(const solvers::GridState2D& s, const std::filesystem::path& path,
                     const std::array<std::string, 2>& axis_names) {
  auto out = open_for_write(path);
  out << axis_names[0] << ',' << axis_names[1] << ",rho\n";
  for (int i = 0; i < s.axis1.n; ++i)
    for (int j = 0; j < s.axis2.n; ++j)
      out << format_double(s.axis1.point(i)) << ',' << format_double(s.axis2.point(j)) << ','
          << format_double(s.rho[static_cast<std::size_t>(i * s.axis2.n + j)]) << '\n';
  finish(out, path);
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

}  // namespace fiberdiff::output
