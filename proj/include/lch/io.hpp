#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lch/config.hpp"
#include "lch/diagnostics.hpp"
#include "lch/error.hpp"
#include "lch/mesh.hpp"
#include "lch/stepper.hpp"

namespace lch {

struct TimeSeriesRow {
  long step = 0;
  double time = 0.0;
  EnergyReport energy;
  Masses mass;
  Extrema ext{};
  int newton_iters = 0;
};

inline constexpr const char* kTimeSeriesHeader =
    "step,time,energy_gradient,energy_potential,energy_nutrient,energy_stabilization,"
    "energy_total,dissipation_m,dissipation_g,c_mass,phi_mu_combo,min_phi,max_phi,"
    "min_c,max_c,newton_iters";

inline std::string format_row(const TimeSeriesRow& r) {
  using detail::fmt17;
  std::string s = std::to_string(r.step);
  for (double v : {r.time, r.energy.gradient_part, r.energy.potential_part,
                   r.energy.nutrient_part, r.energy.stabilization_part, r.energy.total,
                   r.energy.dissipation_m, r.energy.dissipation_g, r.mass.c_mass,
                   r.mass.phi_mu_combo, r.ext.min_phi, r.ext.max_phi, r.ext.min_c,
                   r.ext.max_c}) {
    s += ',';
    s += fmt17(v);
  }
  s += ',';
  s += std::to_string(r.newton_iters);
  return s;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "'");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  finish_output(out, path);
}

/// Streams time-series rows; each row is flushed so a crashed run keeps its history.
class TimeSeriesWriter {
 public:
  explicit TimeSeriesWriter(std::filesystem::path path)
      : path_(std::move(path)), out_(open_output(path_)) {
    out_ << kTimeSeriesHeader << '\n';
    finish_output(out_, path_);
  }

  void write(const TimeSeriesRow& r) {
    out_ << format_row(r) << '\n';
    finish_output(out_, path_);
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// VTK legacy ASCII dump. The torus is written unrolled onto the (M+1)²
/// points of [0,L]², with the periodic copies duplicated, so that viewers do
/// not draw wrap-around triangles.
inline void write_vtk(const std::filesystem::path& path, const PeriodicMesh& mesh,
                      const SimState& s) {
  require_on_mesh(s.phi, mesh, "write_vtk");
  require_on_mesh(s.c, mesh, "write_vtk");
  require_on_mesh(s.mu, mesh, "write_vtk");
  using detail::fmt17;
  const std::size_t M = static_cast<std::size_t>(mesh.cells_per_side());
  const std::size_t P = (M + 1) * (M + 1);
  const double h = mesh.spacing();
  auto out = open_output(path);
  out << "# vtk DataFile Version 3.0\n"
      << "lch fields step " << s.step << " time " << fmt17(s.time) << '\n'
      << "ASCII\nDATASET UNSTRUCTURED_GRID\n"
      << "POINTS " << P << " double\n";
  for (std::size_t j = 0; j <= M; ++j)
    for (std::size_t i = 0; i <= M; ++i)
      out << fmt17(static_cast<double>(i) * h) << ' ' << fmt17(static_cast<double>(j) * h)
          << " 0\n";
  const std::size_t nt = 2 * M * M;
  out << "CELLS " << nt << ' ' << 4 * nt << '\n';
  auto pt = [M](std::size_t i, std::size_t j) { return i + (M + 1) * j; };
  for (std::size_t j = 0; j < M; ++j)
    for (std::size_t i = 0; i < M; ++i) {
      out << "3 " << pt(i, j) << ' ' << pt(i + 1, j) << ' ' << pt(i + 1, j + 1) << '\n';
      out << "3 " << pt(i, j) << ' ' << pt(i + 1, j + 1) << ' ' << pt(i, j + 1) << '\n';
    }
  out << "CELL_TYPES " << nt << '\n';
  for (std::size_t t = 0; t < nt; ++t) out << "5\n";
  out << "POINT_DATA " << P << '\n';
  auto scalars = [&](const char* name, const NodalField& u) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (std::size_t j = 0; j <= M; ++j)
      for (std::size_t i = 0; i <= M; ++i) out << fmt17(u[mesh.node_index(i, j)]) << '\n';
  };
  scalars("phi", s.phi);
  scalars("c", s.c);
  scalars("mu", s.mu);
  finish_output(out, path);
}

inline constexpr const char* kFieldHeader = "node_index,x,y,phi,c,mu";

inline void write_field_csv(const std::filesystem::path& path, const PeriodicMesh& mesh,
                            const SimState& s) {
  require_on_mesh(s.phi, mesh, "write_field_csv");
  require_on_mesh(s.c, mesh, "write_field_csv");
  require_on_mesh(s.mu, mesh, "write_field_csv");
  using detail::fmt17;
  auto out = open_output(path);
  out << kFieldHeader << '\n';
  const auto xy = mesh.node_coords();
  for (std::size_t j = 0; j < mesh.node_count(); ++j)
    out << j << ',' << fmt17(xy[j].x) << ',' << fmt17(xy[j].y) << ',' << fmt17(s.phi[j])
        << ',' << fmt17(s.c[j]) << ',' << fmt17(s.mu[j]) << '\n';
  finish_output(out, path);
}

/// Nodal fields read back from a dump; step and time are not restored.
inline SimState read_field_csv(const std::filesystem::path& path, const PeriodicMesh& mesh) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kFieldHeader)
    throw IoError("'" + path.string() + "': unexpected header");
  SimState s{NodalField(mesh), NodalField(mesh), NodalField(mesh)};
  std::vector<bool> seen(mesh.node_count(), false);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[6];
    for (int k = 0; k < 6; ++k)
      if (!std::getline(ls, f[k], ','))
        throw IoError("'" + path.string() + "': short row " + std::to_string(rows + 1));
    try {
      const auto j = static_cast<std::size_t>(detail::parse_integer("node_index", f[0]));
      if (j >= mesh.node_count() || seen[j])
        throw IoError("'" + path.string() + "': bad node index " + f[0]);
      seen[j] = true;
      s.phi[j] = detail::parse_double("phi", f[3]);
      s.c[j] = detail::parse_double("c", f[4]);
      s.mu[j] = detail::parse_double("mu", f[5]);
    } catch (const ConfigError& e) {
      throw IoError("'" + path.string() + "': " + e.what());
    }
    ++rows;
  }
  if (rows != mesh.node_count())
    throw IoError("'" + path.string() + "': " + std::to_string(rows) + " rows for " +
                  std::to_string(mesh.node_count()) + " nodes");
  return s;
}

/// Point data of a dump written by write_vtk, mapped back onto mesh nodes.
inline SimState read_vtk(const std::filesystem::path& path, const PeriodicMesh& mesh) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const std::size_t M = static_cast<std::size_t>(mesh.cells_per_side());
  const std::size_t P = (M + 1) * (M + 1);
  SimState s{NodalField(mesh), NodalField(mesh), NodalField(mesh)};
  int found = 0;
  std::string tok;
  while (in >> tok) {
    if (tok == "POINTS") {
      std::size_t n = 0;
      in >> n;
      if (n != P) throw IoError("'" + path.string() + "': point count does not match mesh");
    } else if (tok == "SCALARS") {
      std::string name, type, lut, lutname;
      int comps = 0;
      in >> name >> type >> comps >> lut >> lutname;
      NodalField* dst = name == "phi" ? &s.phi : name == "c" ? &s.c : name == "mu" ? &s.mu : nullptr;
      for (std::size_t q = 0; q < P; ++q) {
        std::string v;
        if (!(in >> v)) throw IoError("'" + path.string() + "': truncated " + name);
        if (dst && q % (M + 1) < M && q / (M + 1) < M) {
          try {
            (*dst)[mesh.node_index(q % (M + 1), q / (M + 1))] = detail::parse_double(name, v);
          } catch (const ConfigError& e) {
            throw IoError("'" + path.string() + "': " + e.what());
          }
        }
      }
      if (dst) ++found;
    }
  }
  if (found != 3) throw IoError("'" + path.string() + "': missing phi/c/mu arrays");
  return s;
}

}  // namespace lch
