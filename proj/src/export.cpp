#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "spamm/error.hpp"
#include "spamm/io.hpp"

namespace spamm::io {

namespace {

using nlohmann::json;

std::ofstream open_out(const fs::path &path) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream &out, const fs::path &path) {
  out.flush();
  if (!out)
    throw IoError("write failed for " + path.string());
}

std::vector<std::string> split(const std::string &line, char sep) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) {
    if (!cell.empty() && cell.back() == '\r')
      cell.pop_back();
    cells.push_back(cell);
  }
  return cells;
}

// Shortest round-trip text for a double.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

BoxStatus status_from_string(const std::string &s) {
  if (s == "performed")
    return BoxStatus::performed;
  if (s == "culled")
    return BoxStatus::culled;
  throw IoError("unknown box status '" + s + "'");
}

json history_json(const std::vector<HistoryRow> &history) {
  json rows = json::array();
  for (const auto &h : history)
    rows.push_back({{"k", h.k},
                    {"t", h.t},
                    {"alpha", h.alpha},
                    {"eps", h.eps},
                    {"vol_y", h.y_stats.volume_fraction()},
                    {"vol_z", h.z_stats.volume_fraction()},
                    {"vol_x", h.x_stats.volume_fraction()},
                    {"leaf_products_x", h.x_stats.leaf_products_performed}});
  return rows;
}

} // namespace

VolumeFormat volume_format_from_string(std::string_view s) {
  if (s == "csv")
    return VolumeFormat::csv;
  if (s == "vtk" || s == "legacy_vtk_points")
    return VolumeFormat::legacy_vtk_points;
  throw InvalidArgument("unknown volume format '" + std::string(s) + "'");
}

void export_volumes(const VolumeLog &log, const fs::path &path,
                    VolumeFormat format) {
  if (log.boxes.empty())
    throw InvalidArgument("export_volumes: empty volume log");
  std::ofstream out = open_out(path);
  if (format == VolumeFormat::csv) {
    out << "i_lo,j_lo,k_lo,side,status\n";
    for (const auto &b : log.boxes)
      out << b.i_lo << ',' << b.j_lo << ',' << b.k_lo << ',' << b.side << ','
          << to_string(b.status) << '\n';
  } else {
    // One point per box at its center, with status (1 performed, 0 culled)
    // and side as point scalars.
    const std::size_t n = log.boxes.size();
    out << "# vtk DataFile Version 3.0\n"
        << "spamm product volume (padded_dim " << log.padded_dim
        << ", block_size " << log.block_size << ")\n"
        << "ASCII\nDATASET POLYDATA\nPOINTS " << n << " double\n";
    for (const auto &b : log.boxes) {
      const double h = 0.5 * static_cast<double>(b.side);
      out << b.i_lo + h << ' ' << b.j_lo + h << ' ' << b.k_lo + h << '\n';
    }
    out << "VERTICES " << n << ' ' << 2 * n << '\n';
    for (std::size_t p = 0; p < n; ++p)
      out << "1 " << p << '\n';
    out << "POINT_DATA " << n << "\nSCALARS status int 1\nLOOKUP_TABLE default\n";
    for (const auto &b : log.boxes)
      out << (b.status == BoxStatus::performed ? 1 : 0) << '\n';
    out << "SCALARS side double 1\nLOOKUP_TABLE default\n";
    for (const auto &b : log.boxes)
      out << b.side << '\n';
  }
  finish(out, path);
}

VolumeLog read_volumes_csv(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || split(line, ',').size() != 5)
    throw IoError(path.string() + ": missing volume header");
  VolumeLog log;
  std::size_t min_side = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r")
      continue;
    const auto c = split(line, ',');
    if (c.size() != 5)
      throw IoError(path.string() + ": bad row '" + line + "'");
    VolumeBox b;
    try {
      b.i_lo = std::stoull(c[0]);
      b.j_lo = std::stoull(c[1]);
      b.k_lo = std::stoull(c[2]);
      b.side = std::stoull(c[3]);
    } catch (const std::exception &) {
      throw IoError(path.string() + ": bad row '" + line + "'");
    }
    b.status = status_from_string(c[4]);
    log.padded_dim = std::max(log.padded_dim, b.i_lo + b.side);
    log.padded_dim = std::max(log.padded_dim, b.j_lo + b.side);
    log.padded_dim = std::max(log.padded_dim, b.k_lo + b.side);
    if (b.status == BoxStatus::performed &&
        (min_side == 0 || b.side < min_side))
      min_side = b.side;
    log.boxes.push_back(b);
  }
  // Performed boxes are leaf products, so their side is the block size.
  log.block_size = min_side;
  return log;
}

void export_history(const RunManifest &manifest, const fs::path &path) {
  std::ofstream out = open_out(path);
  out << "k,t_k,alpha,eps,vol_y,vol_z,vol_x\n";
  for (const auto &h : manifest.history)
    out << h.k << ',' << num(h.t) << ',' << num(h.alpha) << ',' << num(h.eps)
        << ',' << num(h.y_stats.volume_fraction()) << ','
        << num(h.z_stats.volume_fraction()) << ','
        << num(h.x_stats.volume_fraction()) << '\n';
  finish(out, path);
}

std::vector<HistoryCsvRow> read_history(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("k,t_k,alpha,eps,vol_y,vol_z,vol_x", 0) != 0)
    throw IoError(path.string() + ": missing history header");
  std::vector<HistoryCsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r")
      continue;
    const auto c = split(line, ',');
    if (c.size() != 7)
      throw IoError(path.string() + ": bad row '" + line + "'");
    try {
      rows.push_back({std::stoull(c[0]), std::stod(c[1]), std::stod(c[2]),
                      std::stod(c[3]), std::stod(c[4]), std::stod(c[5]),
                      std::stod(c[6])});
    } catch (const std::exception &) {
      throw IoError(path.string() + ": bad row '" + line + "'");
    }
  }
  return rows;
}

void write_manifest_json(const RunManifest &manifest, const fs::path &path) {
  json j;
  j["config"] = manifest.config;
  j["history"] = history_json(manifest.history);
  j["iterations"] = manifest.history.empty() ? 0 : manifest.history.size() - 1;
  j["outputs"] = manifest.outputs;
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

void save_representation(const precond::ProductRepresentation &rep,
                         const fs::path &dir) {
  fs::create_directories(dir);
  json slices = json::array();
  for (std::size_t i = 0; i < rep.slices.size(); ++i) {
    const auto &s = rep.slices[i];
    char name[32];
    std::snprintf(name, sizeof name, "slice_%03zu.mtx", i);
    write_matrix_market(to_dense(s.z_factor), dir / name, false);
    slices.push_back({{"file", name},
                      {"mu", s.mu},
                      {"tau0", s.tau0},
                      {"tau_apply", s.tau_apply},
                      {"iterations", s.iterations},
                      {"final_trace_error", s.final_trace_error},
                      {"status", std::string(to_string(s.status))}});
  }
  json j{{"target", rep.target}, {"slices", slices}};
  const fs::path path = dir / "manifest.json";
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

precond::ProductRepresentation load_representation(const fs::path &dir,
                                                   std::size_t block_size) {
  const fs::path path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());
  precond::ProductRepresentation rep;
  try {
    const json j = json::parse(in);
    rep.target = j.value("target", std::string{});
    for (const auto &e : j.at("slices")) {
      precond::Slice s;
      s.z_factor = build(read_matrix_market(dir / e.at("file").get<std::string>()),
                         block_size);
      s.mu = e.at("mu").get<double>();
      s.tau0 = e.at("tau0").get<double>();
      s.tau_apply = e.at("tau_apply").get<double>();
      s.iterations = e.value("iterations", std::size_t{0});
      s.final_trace_error = e.value("final_trace_error", 0.0);
      const std::string st = e.value("status", std::string("max_iter"));
      s.status = st == "converged" ? RunStatus::converged
                 : st == "diverged" ? RunStatus::diverged
                                    : RunStatus::max_iter;
      rep.slices.push_back(std::move(s));
    }
  } catch (const json::exception &e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return rep;
}

} // namespace spamm::io
