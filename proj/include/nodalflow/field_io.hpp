#pragma once
// Field dumps.
//
// Binary layout (little-endian, 40-byte header then payload):
//   0   char[8]   magic "NFFIELD1"
//   8   uint32    dim
//   12  uint32    n
//   16  float64   L (box half-width, rescaled frame)
//   24  float64   epsilon
//   32  uint64    count (= n^dim)
//   40  float64[count] values, row-major, axis 0 slowest
//
// CSV layout: first line "# dim=<d> n=<n> L=<L> eps=<eps>", then one value per
// line printed with 17 significant digits (round-trips exactly).

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "nodalflow/grid.hpp"

namespace nodalflow {

static_assert(std::endian::native == std::endian::little, "field dumps assume a little-endian host");

struct FieldDump {
  Field field;
  double epsilon = 0.0;
};

inline constexpr char kFieldMagic[8] = {'N', 'F', 'F', 'I', 'E', 'L', 'D', '1'};

inline void write_field(const std::string& path, const Field& u, double epsilon) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const Grid& g = u.grid();
  const std::uint32_t dim = static_cast<std::uint32_t>(g.dim);
  const std::uint32_t n = static_cast<std::uint32_t>(g.n);
  const std::uint64_t count = u.size();
  out.write(kFieldMagic, 8);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&g.L), 8);
  out.write(reinterpret_cast<const char*>(&epsilon), 8);
  out.write(reinterpret_cast<const char*>(&count), 8);
  out.write(reinterpret_cast<const char*>(u.data()), static_cast<std::streamsize>(count * 8));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline FieldDump read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  std::uint32_t dim = 0, n = 0;
  double L = 0.0, eps = 0.0;
  std::uint64_t count = 0;
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kFieldMagic, 8) != 0) throw std::runtime_error("not a field dump: " + path);
  in.read(reinterpret_cast<char*>(&dim), 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&L), 8);
  in.read(reinterpret_cast<char*>(&eps), 8);
  in.read(reinterpret_cast<char*>(&count), 8);
  if (!in) throw std::runtime_error("truncated header: " + path);
  Grid g = Grid::make(static_cast<int>(dim), static_cast<int>(n), L);
  if (count != g.size()) throw std::runtime_error("count does not match header: " + path);
  std::vector<double> v(count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * 8));
  if (!in) throw std::runtime_error("truncated payload: " + path);
  return {Field(g, std::move(v)), eps};
}

inline void write_field_csv(const std::string& path, const Field& u, double epsilon) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  const Grid& g = u.grid();
  std::fprintf(f, "# dim=%d n=%d L=%.17g eps=%.17g\n", g.dim, g.n, g.L, epsilon);
  for (double x : u.values()) std::fprintf(f, "%.17g\n", x);
  std::fclose(f);
}

inline FieldDump read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string header;
  std::getline(in, header);
  int dim = 0, n = 0;
  double L = 0.0, eps = 0.0;
  if (std::sscanf(header.c_str(), "# dim=%d n=%d L=%lg eps=%lg", &dim, &n, &L, &eps) != 4)
    throw std::runtime_error("bad csv field header: " + path);
  Grid g = Grid::make(dim, n, L);
  std::vector<double> v;
  v.reserve(g.size());
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) v.push_back(std::strtod(line.c_str(), nullptr));
  if (v.size() != g.size()) throw std::runtime_error("csv value count does not match header: " + path);
  return {Field(g, std::move(v)), eps};
}

}  // namespace nodalflow
