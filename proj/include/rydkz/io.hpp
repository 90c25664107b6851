// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rydkz/basis.hpp"
#include "rydkz/errors.hpp"
#include "rydkz/geometry.hpp"
#include "rydkz/observables.hpp"
#include "rydkz/state.hpp"
#include "rydkz/version.hpp"

namespace rydkz {

using json = nlohmann::json;

inline std::uint64_t fnv1a_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// Stable hash of a config document: dump() serializes object keys sorted.
inline std::string config_hash(const json& j) {
  return hash_hex(fnv1a_hash(j.dump()));
}

// ---- schema helpers ------------------------------------------------------

inline const json& require_field(const json& j, const char* key,
                                 const std::string& context) {
  if (!j.is_object())
    throw SchemaError(context + " must be a JSON object");
  auto it = j.find(key);
  if (it == j.end())
    throw SchemaError(std::string("missing field '") + key + "' in " +
                      context);
  return *it;
}

template <class T>
inline T field_as(const json& j, const char* key, const std::string& context) {
  const json& v = require_field(j, key, context);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw SchemaError(std::string("field '") + key + "' in " + context +
                      " has the wrong type");
  }
}

template <class T>
inline T field_or(const json& j, const char* key, T fallback) {
  if (!j.is_object()) return fallback;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw SchemaError(std::string("field '") + key + "' has the wrong type");
  }
}

inline Boundary boundary_from_string(const std::string& s,
                                     const std::string& context) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "open") return Boundary::open;
  throw SchemaError("field 'boundary' in " + context +
                    " must be \"periodic\" or \"open\", got \"" + s + "\"");
}

inline json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError("cannot parse " + path.string() + ": " + e.what());
  }
  return j;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("short write to " + path.string());
}

// ---- geometry files ------------------------------------------------------

inline AtomGeometry geometry_from_json(const json& j) {
  AtomGeometry g;
  g.boundary = boundary_from_string(
      field_as<std::string>(j, "boundary", "geometry"), "geometry");
  const json& pos = require_field(j, "positions_um", "geometry");
  if (!pos.is_array() || pos.empty())
    throw SchemaError("field 'positions_um' in geometry must be a nonempty "
                      "array");
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const json& p = pos[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() ||
        !p[1].is_number())
      throw SchemaError("positions_um[" + std::to_string(i) +
                        "] must be an [x, y] pair of numbers");
    g.positions_um.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  g.validate();
  return g;
}

inline json geometry_to_json(const AtomGeometry& g) {
  json j;
  j["boundary"] = to_string(g.boundary);
  j["positions_um"] = json::array();
  for (const auto& p : g.positions_um)
    j["positions_um"].push_back({p[0], p[1]});
  return j;
}

// ---- shot files ----------------------------------------------------------
//
// One measurement per line as L characters of '0'/'1' with atom 0 leftmost;
// an optional second column repeats the line `count` times. A JSON sidecar
// (same path + ".json") records sites, boundary, and provenance.

inline std::string bitstring_of(bitmask_t mask, int n_sites) {
  std::string s(static_cast<std::size_t>(n_sites), '0');
  for (int j = 0; j < n_sites; ++j)
    if ((mask >> j) & 1ULL) s[static_cast<std::size_t>(j)] = '1';
  return s;
}

inline bitmask_t mask_of_bitstring(const std::string& s,
                                   const std::string& context) {
  if (s.size() > 63) throw SchemaError(context + ": bitstring too long");
  bitmask_t mask = 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j] == '1')
      mask |= 1ULL << j;
    else if (s[j] != '0')
      throw SchemaError(context + ": bitstring character '" +
                        std::string(1, s[j]) + "' is neither '0' nor '1'");
  }
  return mask;
}

inline void write_shot_file(const std::filesystem::path& path,
                            const BitstringSample& sample,
                            const std::string& provenance,
                            const std::string& cfg_hash = "") {
  sample.validate();
  std::ostringstream body;
  for (const auto& [mask, count] : sample.shots)
    body << bitstring_of(mask, sample.n_sites) << " " << count << "\n";
  write_text_file(path, body.str());

  json side;
  side["L"] = sample.n_sites;
  side["boundary"] = to_string(sample.boundary);
  side["provenance"] = provenance;
  side["total_shots"] = sample.total_shots;
  side["version"] = std::string(kVersion);
  if (!cfg_hash.empty()) side["config_hash"] = cfg_hash;
  write_text_file(path.string() + ".json", side.dump(2) + "\n");
}

inline BitstringSample read_shot_file(const std::filesystem::path& path) {
  const json side = load_json_file(path.string() + ".json");
  BitstringSample sample;
  sample.n_sites = field_as<int>(side, "L", "shot sidecar");
  if (sample.n_sites < 1 || sample.n_sites > 63)
    throw SchemaError("shot sidecar declares an unusable site count");
  sample.boundary = boundary_from_string(
      field_as<std::string>(side, "boundary", "shot sidecar"), "shot sidecar");

  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  std::map<bitmask_t, std::uint64_t> hist;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t total = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string bits;
    ls >> bits;
    if (bits.empty()) continue;
    const std::string ctx = path.string() + ":" + std::to_string(line_no);
    if (static_cast<int>(bits.size()) != sample.n_sites)
      throw SchemaError(ctx + ": bitstring length " +
                        std::to_string(bits.size()) + " does not match L = " +
                        std::to_string(sample.n_sites));
    std::uint64_t count = 1;
    std::string rest;
    if (ls >> rest) {
      try {
        count = std::stoull(rest);
      } catch (...) {
        throw SchemaError(ctx + ": count column '" + rest +
                          "' is not an integer");
      }
      if (count == 0) throw SchemaError(ctx + ": count must be positive");
    }
    hist[mask_of_bitstring(bits, ctx)] += count;
    total += count;
  }
  if (total == 0) throw SchemaError(path.string() + " contains no shots");
  sample.total_shots = total;
  sample.shots.assign(hist.begin(), hist.end());
  return sample;
}

// ---- state dumps ---------------------------------------------------------
//
// Magic line, one-line JSON header, then dim interleaved little-endian
// (re, im) doubles.

inline constexpr std::string_view kStateMagic = "RYDKZSTATE1";

inline void write_state_file(const std::filesystem::path& path,
                             const QuantumState& psi,
                             const std::string& cfg_hash = "") {
  psi.validate();
  json header;
  header["L"] = psi.basis->n_sites;
  header["boundary"] = to_string(psi.basis->boundary);
  header["constrained"] = psi.basis->constrained;
  header["dim"] = psi.basis->dim();
  header["version"] = std::string(kVersion);
  if (!cfg_hash.empty()) header["config_hash"] = cfg_hash;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << kStateMagic << "\n" << header.dump() << "\n";
  static_assert(sizeof(double) == 8);
  for (const cplx& a : psi.amplitudes) {
    const double re = a.real(), im = a.imag();
    out.write(reinterpret_cast<const char*>(&re), sizeof(double));
    out.write(reinterpret_cast<const char*>(&im), sizeof(double));
  }
  if (!out) throw Error("short write to " + path.string());
}

inline QuantumState read_state_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path.string());
  std::string magic, header_line;
  if (!std::getline(in, magic) || magic != kStateMagic)
    throw SchemaError(path.string() + " is not a state dump (bad magic)");
  if (!std::getline(in, header_line))
    throw SchemaError(path.string() + " is missing its header line");
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + " has a malformed header: " + e.what());
  }
  const int L = field_as<int>(header, "L", "state header");
  const Boundary boundary = boundary_from_string(
      field_as<std::string>(header, "boundary", "state header"),
      "state header");
  const bool constrained = field_as<bool>(header, "constrained", "state header");
  const std::size_t dim = field_as<std::size_t>(header, "dim", "state header");

  auto basis = std::make_shared<ConstrainedBasis>(
      enumerate_basis(L, boundary, constrained));
  if (basis->dim() != dim)
    throw SchemaError(path.string() + " declares dim " + std::to_string(dim) +
                      " but an " + std::to_string(L) + "-site " +
                      to_string(boundary) +
                      (constrained ? " constrained" : " full") +
                      " space has dim " + std::to_string(basis->dim()));

  QuantumState psi;
  psi.basis = std::move(basis);
  psi.amplitudes.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    double re = 0.0, im = 0.0;
    in.read(reinterpret_cast<char*>(&re), sizeof(double));
    in.read(reinterpret_cast<char*>(&im), sizeof(double));
    if (!in)
      throw SchemaError(path.string() + " is truncated at amplitude " +
                        std::to_string(i));
    psi.amplitudes[i] = cplx(re, im);
  }
  return psi;
}

// ---- CSV primitives ------------------------------------------------------

inline std::string csv_comment(const std::string& cfg_hash) {
  std::string s = "# generator=rydkz version=" + std::string(kVersion);
  if (!cfg_hash.empty()) s += " config_hash=" + cfg_hash;
  return s + "\n";
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw SchemaError("CSV is missing column '" + name + "'");
  }
};

inline CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (table.columns.empty()) {
      table.columns = cells;
      continue;
    }
    if (cells.size() != table.columns.size())
      throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(table.columns.size()) +
                        " cells, got " + std::to_string(cells.size()));
    std::vector<double> row;
    for (const std::string& c : cells) {
      if (c == "nan" || c.empty()) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      try {
        row.push_back(std::stod(c));
      } catch (...) {
        throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                          ": cell '" + c + "' is not a number");
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty())
    throw SchemaError(path.string() + " has no header row");
  return table;
}

}  // namespace rydkz
