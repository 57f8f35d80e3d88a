#pragma once

// CSV and JSON writers shared by the CLI and the Python module. Numbers are
// written in scientific notation with 17 significant digits, which
// round-trips every double and does not depend on the locale.

#include <filesystem>
#include <string>

#include "fiberdiff/effdiff.hpp"
#include "fiberdiff/solvers.hpp"
#include "json.hpp"

namespace fiberdiff::output {

std::string format_double(double x);

/// Columns: grid coordinates..., sigma, D1[, D2][, quad_max_rel_err].
void write_field_csv(const effdiff::EffectiveField& f, const std::filesystem::path& path);

/// {"sigma": {"min", "max", "mean"}, "D1": ..., ...}
nlohmann::json field_statistics(const effdiff::EffectiveField& f);

void write_state_csv(const solvers::GridState1D& s, const std::filesystem::path& path);
void write_state_csv(const solvers::GridState2D& s, const std::filesystem::path& path,
                     const std::array<std::string, 2>& axis_names);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace fiberdiff::output
