#include "pontryagus/datagen.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace pontryagus {

namespace {

constexpr const char* kHeader =
    "traj_id,node_id,alpha,t,rx,ry,rz,vx,vy,vz,m,lrx,lry,lrz,lvx,lvy,lvz,lm,u,theta,phi";
constexpr int kColumns = 21;
constexpr const char* kMetaFormat = "pontryagus-dataset v1";

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void append_row(std::string& out, long traj, long node, double alpha, const TrajectoryNode& n) {
  out += std::to_string(traj);
  out += ',';
  out += std::to_string(node);
  const double values[] = {alpha,       n.t,         n.x.r.x(),   n.x.r.y(),   n.x.r.z(),   n.x.v.x(),
                           n.x.v.y(),   n.x.v.z(),   n.x.m,       n.lam.lr.x(), n.lam.lr.y(), n.lam.lr.z(),
                           n.lam.lv.x(), n.lam.lv.y(), n.lam.lv.z(), n.lam.lm,    n.ctrl.u,    n.ctrl.theta,
                           n.ctrl.phi};
  for (double v : values) {
    out += ',';
    out += fmt(v);
  }
  out += '\n';
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DatasetIoError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw DatasetIoError("write failed: " + path);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

void write_elements(std::string& out, const std::string& prefix, const KeplerElements& el) {
  out += prefix + ".a=" + fmt(el.a) + "\n";
  out += prefix + ".e=" + fmt(el.e) + "\n";
  out += prefix + ".i=" + fmt(el.i) + "\n";
  out += prefix + ".omega=" + fmt(el.omega) + "\n";
  out += prefix + ".Omega=" + fmt(el.Omega) + "\n";
}

}  // namespace

DatasetFormatError::DatasetFormatError(const std::string& path, long line, const std::string& what)
    : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

std::string meta_path_for(const std::string& csv_path) {
  return std::filesystem::path(csv_path).replace_extension(".meta").string();
}

void write_trajectory_csv(const TrajectoryRecord& traj, const std::string& path) {
  std::string out = std::string(kHeader) + "\n";
  for (std::size_t j = 0; j < traj.nodes.size(); ++j) append_row(out, 0, static_cast<long>(j), traj.alpha, traj.nodes[j]);
  write_text(path, out);
}

void write_dataset(const OptimalControlDataset& ds, const std::string& path) {
  if (ds.provenance.size() != ds.trajectories.size()) {
    throw std::invalid_argument("dataset provenance and trajectories differ in length");
  }
  std::string out = std::string(kHeader) + "\n";
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const TrajectoryRecord& t = ds.trajectories[i];
    for (std::size_t j = 0; j < t.nodes.size(); ++j) {
      append_row(out, static_cast<long>(i), static_cast<long>(j), t.alpha, t.nodes[j]);
    }
  }
  write_text(path, out);

  const DatasetInfo& in = ds.info;
  std::string meta = std::string("format=") + kMetaFormat + "\n";
  meta += std::string("alpha_label=") + to_string(in.label) + "\n";
  meta += "seed=" + std::to_string(in.seed) + "\n";
  meta += "gamma_bar=" + fmt(in.gamma_bar) + "\n";
  meta += "n=" + std::to_string(in.n) + "\n";
  meta += "start_points=" + std::to_string(in.start_points) + "\n";
  meta += "length_unit_m=" + fmt(in.length_unit_m) + "\n";
  meta += "mass_unit_kg=" + fmt(in.mass_unit_kg) + "\n";
  meta += "time_unit_s=" + fmt(in.time_unit_s) + "\n";
  meta += "mu=" + fmt(in.mu) + "\n";
  write_elements(meta, "departure", in.departure);
  write_elements(meta, "arrival", in.arrival);
  meta += "trajectories=" + std::to_string(ds.trajectories.size()) + "\n";
  // traj.<id>=origin step source t_origin Ef seed
  for (std::size_t i = 0; i < ds.provenance.size(); ++i) {
    const Provenance& p = ds.provenance[i];
    meta += "traj." + std::to_string(i) + "=" + std::to_string(p.origin) + " " + std::to_string(p.step) + " " +
            std::to_string(p.source) + " " + fmt(p.t_origin) + " " + fmt(p.Ef) + " " + std::to_string(p.seed) + "\n";
  }
  write_text(meta_path_for(path), meta);
}

OptimalControlDataset read_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DatasetIoError("cannot open " + path);

  OptimalControlDataset ds;
  std::string line;
  long lineno = 0;
  if (!std::getline(f, line)) throw DatasetFormatError(path, 1, "missing header row");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw DatasetFormatError(path, lineno, "unexpected header");

  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split(line, ',');
    if (static_cast<int>(fields.size()) != kColumns) {
      throw DatasetFormatError(path, lineno, "expected 21 fields, found " + std::to_string(fields.size()));
    }
    long traj = 0, node = 0;
    if (!parse_number(fields[0], traj) || !parse_number(fields[1], node)) {
      throw DatasetFormatError(path, lineno, "traj_id and node_id must be integers");
    }
    double v[19];
    for (int k = 0; k < 19; ++k) {
      if (!parse_number(fields[k + 2], v[k]) || !std::isfinite(v[k])) {
        throw DatasetFormatError(path, lineno, "field " + std::to_string(k + 3) + " is not a finite number");
      }
    }
    const long expected_traj = static_cast<long>(ds.trajectories.size());
    if (node == 0) {
      if (traj != expected_traj) throw DatasetFormatError(path, lineno, "trajectory ids must be consecutive from 0");
      ds.trajectories.emplace_back();
      ds.trajectories.back().alpha = v[0];
      ds.trajectories.back().converged = true;
    } else {
      if (traj != expected_traj - 1 || node != static_cast<long>(ds.trajectories.back().nodes.size())) {
        throw DatasetFormatError(path, lineno, "node ids must be consecutive within a trajectory");
      }
      if (v[0] != ds.trajectories.back().alpha) throw DatasetFormatError(path, lineno, "alpha changes within a trajectory");
    }
    TrajectoryNode n;
    n.t = v[1];
    n.x.r = Vec3(v[2], v[3], v[4]);
    n.x.v = Vec3(v[5], v[6], v[7]);
    n.x.m = v[8];
    n.lam.lr = Vec3(v[9], v[10], v[11]);
    n.lam.lv = Vec3(v[12], v[13], v[14]);
    n.lam.lm = v[15];
    n.ctrl = ControlAction::from_polar(v[16], v[17], v[18]);
    auto& nodes = ds.trajectories.back().nodes;
    if (!nodes.empty() && !(n.t > nodes.back().t)) throw DatasetFormatError(path, lineno, "times must increase");
    nodes.push_back(n);
  }

  const std::string meta_path = meta_path_for(path);
  std::ifstream mf(meta_path, std::ios::binary);
  if (!mf) throw DatasetIoError("missing metadata sidecar " + meta_path);
  std::map<std::string, std::pair<std::string, long>> kv;
  lineno = 0;
  while (std::getline(mf, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DatasetFormatError(meta_path, lineno, "expected key=value");
    kv[line.substr(0, eq)] = {line.substr(eq + 1), lineno};
  }
  auto get = [&](const std::string& key) -> const std::pair<std::string, long>& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DatasetFormatError(meta_path, lineno, "missing key " + key);
    return it->second;
  };
  auto num = [&](const std::string& key) {
    const auto& [text, at] = get(key);
    double x = 0.0;
    if (!parse_number(text, x) || !std::isfinite(x)) throw DatasetFormatError(meta_path, at, "bad number for " + key);
    return x;
  };
  auto integer = [&](const std::string& key) {
    const auto& [text, at] = get(key);
    long long x = 0;
    if (!parse_number(text, x)) throw DatasetFormatError(meta_path, at, "bad integer for " + key);
    return x;
  };
  if (get("format").first != kMetaFormat) throw DatasetFormatError(meta_path, get("format").second, "unsupported format");

  DatasetInfo& in = ds.info;
  try {
    in.label = parse_alpha_label(get("alpha_label").first);
  } catch (const std::invalid_argument& e) {
    throw DatasetFormatError(meta_path, get("alpha_label").second, e.what());
  }
  {
    const auto& [text, at] = get("seed");
    if (!parse_number(text, in.seed)) throw DatasetFormatError(meta_path, at, "bad seed");
  }
  in.gamma_bar = num("gamma_bar");
  in.n = static_cast<int>(integer("n"));
  in.start_points = static_cast<int>(integer("start_points"));
  in.length_unit_m = num("length_unit_m");
  in.mass_unit_kg = num("mass_unit_kg");
  in.time_unit_s = num("time_unit_s");
  in.mu = num("mu");
  for (auto* side : {"departure", "arrival"}) {
    KeplerElements& el = std::string(side) == "departure" ? in.departure : in.arrival;
    const std::string p(side);
    el.a = num(p + ".a");
    el.e = num(p + ".e");
    el.i = num(p + ".i");
    el.omega = num(p + ".omega");
    el.Omega = num(p + ".Omega");
  }
  const long long count = integer("trajectories");
  if (count != static_cast<long long>(ds.trajectories.size())) {
    throw DatasetFormatError(meta_path, get("trajectories").second,
                             "metadata lists " + std::to_string(count) + " trajectories, CSV has " +
                                 std::to_string(ds.trajectories.size()));
  }
  for (long long i = 0; i < count; ++i) {
    const auto& [text, at] = get("traj." + std::to_string(i));
    const std::vector<std::string> f6 = split(text, ' ');
    Provenance p;
    if (f6.size() != 6 || !parse_number(f6[0], p.origin) || !parse_number(f6[1], p.step) ||
        !parse_number(f6[2], p.source) || !parse_number(f6[3], p.t_origin) || !parse_number(f6[4], p.Ef) ||
        !parse_number(f6[5], p.seed)) {
      throw DatasetFormatError(meta_path, at, "malformed provenance entry");
    }
    ds.provenance.push_back(p);
  }
  return ds;
}

}  // namespace pontryagus
