#pragma once

// VTK snapshots, CSV time series and binary checkpoints.

#include <fmt/format.h>
#include <fmt/os.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "chfv/diagnostics.hpp"
#include "chfv/errors.hpp"
#include "chfv/mesh.hpp"
#include "chfv/scheme.hpp"

namespace chfv {

struct OutputPlan {
  std::filesystem::path directory = "out";
  std::size_t vtk_every = 0;  // 0 disables snapshots
  std::string csv_name = "diagnostics.csv";
  std::size_t checkpoint_every = 0;  // 0 disables checkpoints

  std::filesystem::path csv_path() const { return directory / csv_name; }
  std::filesystem::path vtk_path(std::size_t step) const { return directory / fmt::format("state_{:06d}.vtk", step); }
  std::filesystem::path checkpoint_path() const { return directory / "checkpoint.bin"; }
};

inline int vtk_cell_type(std::size_t vertices) {
  switch (vertices) {
    case 3: return 5;
    case 4: return 9;
    default: return 7;
  }
}

inline void write_vtk(const Mesh& mesh, const State& s, std::ostream& out) {
  const std::size_t n = mesh.num_cells();
  if (s.size() != n) throw IoError("state size does not match mesh");
  const auto pts = mesh.points();
  auto num = [](double v) { return fmt::format("{:.12e}", v); };

  out << "# vtk DataFile Version 3.0\nchfv state step " << s.step << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << pts.size() << " double\n";
  for (const Point& p : pts) out << num(p.x()) << ' ' << num(p.y()) << ' ' << num(0.0) << '\n';

  std::size_t list_size = 0;
  for (const Cell& c : mesh.cells()) list_size += c.vertices.size() + 1;
  out << "CELLS " << n << ' ' << list_size << '\n';
  for (const Cell& c : mesh.cells()) {
    out << c.vertices.size();
    for (std::size_t v : c.vertices) out << ' ' << v;
    out << '\n';
  }
  out << "CELL_TYPES " << n << '\n';
  for (const Cell& c : mesh.cells()) out << vtk_cell_type(c.vertices.size()) << '\n';

  out << "CELL_DATA " << n << '\n';
  auto scalar = [&](const char* name, auto&& value) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (std::size_t k = 0; k < n; ++k) out << num(value(k)) << '\n';
  };
  scalar("c1", [&](std::size_t k) { return s.c1[k]; });
  scalar("c2", [&](std::size_t k) { return 1.0 - s.c1[k]; });
  scalar("mu1", [&](std::size_t k) { return s.mu1[k]; });
  scalar("mu2", [&](std::size_t k) { return s.mu2[k]; });
  scalar("mu_bar", [&](std::size_t k) { return mean_potential(s, k); });
  const auto grad = cell_gradient(mesh, s.c1);
  out << "VECTORS grad_c1 double\n";
  for (const Point& g : grad) out << num(g.x()) << ' ' << num(g.y()) << ' ' << num(0.0) << '\n';
}

inline void write_vtk(const Mesh& mesh, const State& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_vtk(mesh, s, out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline constexpr const char* csv_header =
    "time,mass1,mass2,energy,dissipation,entropy_production,c1_min,c1_max,edge_mobility_min,newton_iters,fallback";

inline std::string csv_row(const StepDiagnostics& d) {
  return fmt::format("{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{}", d.time,
                     d.mass.first, d.mass.second, d.energy, d.dissipation, d.entropy_production, d.c1_min,
                     d.c1_max, d.edge_mobility_min, d.newton_iters, d.fallback_used ? 1 : 0);
}

/// Appends one row; writes the header first if the file is absent or empty.
inline void append_csv_row(const StepDiagnostics& d, const std::filesystem::path& path) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open '" + path.string() + "' for appending");
  if (fresh) out << csv_header << '\n';
  out << csv_row(d) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline constexpr std::array<char, 8> checkpoint_magic{'C', 'H', 'F', 'V', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t checkpoint_version = 1;

namespace detail {
template <class T>
void put_le(std::string& buf, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(const std::string& buf, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  if (pos + sizeof(U) > buf.size()) throw IoError("checkpoint truncated");
  U u = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    u |= static_cast<U>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return std::bit_cast<T>(u);
}
}  // namespace detail

/// Writes atomically (temporary file, then rename).
inline void checkpoint(const State& s, std::size_t step, const std::filesystem::path& path) {
  std::string buf(checkpoint_magic.begin(), checkpoint_magic.end());
  detail::put_le(buf, checkpoint_version);
  detail::put_le(buf, static_cast<std::uint64_t>(s.size()));
  detail::put_le(buf, static_cast<std::uint64_t>(step));
  for (const auto* field : {&s.c1, &s.mu1, &s.mu2}) {
    if (field->size() != s.size()) throw IoError("inconsistent state field sizes");
    for (double v : *field) detail::put_le(buf, v);
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into '" + path.string() + "': " + ec.message());
}

inline std::pair<State, std::size_t> restore(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < checkpoint_magic.size() ||
      std::memcmp(buf.data(), checkpoint_magic.data(), checkpoint_magic.size()) != 0) {
    throw IoError("'" + path.string() + "' is not a checkpoint");
  }
  std::size_t pos = checkpoint_magic.size();
  const auto version = detail::get_le<std::uint32_t>(buf, pos);
  if (version != checkpoint_version) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto n = detail::get_le<std::uint64_t>(buf, pos);
  const auto step = detail::get_le<std::uint64_t>(buf, pos);
  if (buf.size() - pos != 3 * 8 * n) {
    throw IoError("checkpoint size mismatch: expected " + std::to_string(3 * 8 * n) + " payload bytes, found " +
                  std::to_string(buf.size() - pos));
  }
  State s;
  for (auto* field : {&s.c1, &s.mu1, &s.mu2}) {
    field->resize(n);
    for (auto& v : *field) v = detail::get_le<double>(buf, pos);
  }
  s.step = step;
  return {std::move(s), step};
}

}  // namespace chfv
