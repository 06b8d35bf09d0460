#include "pontryagus/network.hpp"

#include "model_text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pontryagus {

const char* to_string(Target t) {
  switch (t) {
    case Target::kU: return "u";
    case Target::kPhi: return "phi";
    case Target::kTheta: return "theta";
  }
  return "?";
}

std::vector<Target> parse_targets(const std::string& text) {
  std::vector<Target> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    Target t;
    if (item == "u") {
      t = Target::kU;
    } else if (item == "phi") {
      t = Target::kPhi;
    } else if (item == "theta") {
      t = Target::kTheta;
    } else {
      throw std::invalid_argument("unknown target '" + item + "' (expected u, phi or theta)");
    }
    if (std::find(out.begin(), out.end(), t) != out.end()) {
      throw std::invalid_argument("target '" + item + "' listed twice");
    }
    out.push_back(t);
  }
  if (out.empty()) throw std::invalid_argument("empty target list");
  return out;
}

std::string format_targets(const std::vector<Target>& targets) {
  std::string s;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (k) s += ',';
    s += to_string(targets[k]);
  }
  return s;
}

double target_value(const ControlAction& c, Target t) {
  switch (t) {
    case Target::kU: return c.u;
    case Target::kPhi: return c.phi;
    case Target::kTheta: return c.theta;
  }
  return 0.0;
}

Polar control_to_polar(const ControlAction& c) {
  const ControlAction p = ControlAction::from_direction(c.u, c.dir);
  return {p.u, p.theta, p.phi};
}

Vec3 polar_to_direction(double theta, double phi) { return ControlAction::from_polar(1.0, theta, phi).dir; }

Mlp Mlp::zeros(const std::vector<int>& dims) {
  Mlp m;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    m.W.push_back(Eigen::MatrixXd::Zero(dims[l + 1], dims[l]));
    m.b.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
  }
  return m;
}

Mlp Mlp::glorot(const std::vector<int>& dims, std::mt19937_64& rng) {
  Mlp m = zeros(dims);
  for (std::size_t l = 0; l < m.W.size(); ++l) {
    const double limit = std::sqrt(6.0 / (dims[l] + dims[l + 1]));
    std::uniform_real_distribution<double> u(-limit, limit);
    // Row-major fill so the draw order matches the file layout.
    for (Eigen::Index i = 0; i < m.W[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < m.W[l].cols(); ++j) m.W[l](i, j) = u(rng);
    }
  }
  return m;
}

std::vector<int> Mlp::dims() const {
  std::vector<int> d;
  if (W.empty()) return d;
  d.push_back(static_cast<int>(W.front().cols()));
  for (const auto& w : W) d.push_back(static_cast<int>(w.rows()));
  return d;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
  return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < W.size(); ++l) {
    Eigen::MatrixXd z = W[l] * a;
    z.colwise() += b[l];
    if (l + 1 < W.size()) {
      a = z.cwiseMax(0.0);
    } else {
      a = z.array().tanh().matrix();
    }
  }
  return a;
}

MlpGradients backprop_gradient(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const std::size_t layers = net.W.size();
  std::vector<Eigen::MatrixXd> acts;  // acts[l] is the input of layer l
  acts.reserve(layers + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = net.W[l] * acts.back();
    z.colwise() += net.b[l];
    if (l + 1 < layers) {
      acts.push_back(z.cwiseMax(0.0));
    } else {
      acts.push_back(z.array().tanh().matrix());
    }
  }

  MlpGradients g;
  g.W.resize(layers);
  g.b.resize(layers);
  const Eigen::MatrixXd diff = acts.back() - y;
  const double scale = 1.0 / static_cast<double>(diff.size());
  g.loss = diff.squaredNorm() * scale;

  // dL/dz of the output layer through tanh.
  Eigen::MatrixXd delta = (2.0 * scale * diff).cwiseProduct((1.0 - acts.back().array().square()).matrix());
  for (std::size_t l = layers; l-- > 0;) {
    g.W[l].noalias() = delta * acts[l].transpose();
    g.b[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = net.W[l].transpose() * delta;
    // ReLU derivative: the stored activation is positive exactly where z > 0.
    delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

Eigen::MatrixXd OutputScale::to_scaled(const Eigen::MatrixXd& native) const {
  Eigen::MatrixXd s(native.rows(), native.cols());
  for (Eigen::Index k = 0; k < native.rows(); ++k) {
    s.row(k) = (2.0 * (native.row(k).array() - lo[k]) / (hi[k] - lo[k]) - 1.0).matrix();
  }
  return s;
}

Eigen::MatrixXd OutputScale::to_native(const Eigen::MatrixXd& scaled) const {
  Eigen::MatrixXd n(scaled.rows(), scaled.cols());
  for (Eigen::Index k = 0; k < scaled.rows(); ++k) {
    n.row(k) = (lo[k] + 0.5 * (scaled.row(k).array() + 1.0) * (hi[k] - lo[k])).matrix();
  }
  return n;
}

TrainingRows rows_from_dataset(const OptimalControlDataset& ds, const std::vector<Target>& targets) {
  const std::size_t n = ds.pair_count();
  TrainingRows rows;
  rows.x.resize(7, static_cast<Eigen::Index>(n));
  rows.y.resize(static_cast<Eigen::Index>(targets.size()), static_cast<Eigen::Index>(n));
  rows.trajectory.reserve(n);
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    for (const TrajectoryNode& node : ds.trajectories[i].nodes) {
      rows.x.col(col) = node.x.to_vector();
      for (std::size_t k = 0; k < targets.size(); ++k) rows.y(static_cast<Eigen::Index>(k), col) = target_value(node.ctrl, targets[k]);
      rows.trajectory.push_back(static_cast<int>(i));
      ++col;
    }
  }
  return rows;
}

void fit_normalization(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, InputNormalization& in,
                       OutputScale& out) {
  if (x.cols() < 2) throw std::invalid_argument("normalization needs at least two rows");
  if (x.rows() != 7) throw std::invalid_argument("inputs must have 7 features");
  const double n = static_cast<double>(x.cols());
  for (int f = 0; f < 7; ++f) {
    const double mean = x.row(f).mean();
    const double var = (x.row(f).array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 0.0) || sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      throw ZeroVarianceError("input feature " + std::to_string(f) + " has zero variance");
    }
    in.mean[f] = mean;
    in.std[f] = sd;
  }
  out.lo.resize(y.rows());
  out.hi.resize(y.rows());
  for (Eigen::Index k = 0; k < y.rows(); ++k) {
    out.lo[k] = y.row(k).minCoeff();
    out.hi[k] = y.row(k).maxCoeff();
    if (!(out.hi[k] > out.lo[k])) throw ZeroVarianceError("target " + std::to_string(k) + " is constant");
  }
}

Eigen::MatrixXd GuidanceModel::normalize(const Eigen::MatrixXd& raw) const {
  return ((raw.colwise() - input.mean).array().colwise() / input.std.array()).matrix();
}

Eigen::MatrixXd GuidanceModel::forward_batch(const Eigen::MatrixXd& raw) const {
  Eigen::MatrixXd native = output.to_native(net.forward(normalize(raw)));
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (targets[k] == Target::kU) native.row(static_cast<Eigen::Index>(k)) = native.row(static_cast<Eigen::Index>(k)).cwiseMax(0.0).cwiseMin(1.0);
  }
  return native;
}

Eigen::VectorXd GuidanceModel::forward(const SpacecraftState& x) const {
  Eigen::MatrixXd raw = x.to_vector();
  return forward_batch(raw).col(0);
}

std::vector<int> guidance_layer_dims(int outputs) { return {7, 200, 200, 200, 200, outputs}; }

namespace {

constexpr const char* kModelMagic = "pontryagus-model v1";

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class Vec>
std::string join(const Vec& v) {
  std::string s;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k) s += ' ';
    s += fmt(v[k]);
  }
  return s;
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::string next() {
    std::string line;
    if (!std::getline(in_, line)) fail("unexpected end of file");
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }
  std::string value(const std::string& key) {
    const std::string line = next();
    if (line.rfind(key + "=", 0) != 0) fail("expected key " + key);
    return line.substr(key.size() + 1);
  }
  std::vector<double> numbers(const std::string& text, std::size_t count) {
    std::istringstream ss(text);
    std::vector<double> v;
    std::string tok;
    while (ss >> tok) {
      char* end = nullptr;
      const double x = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0' || !std::isfinite(x)) fail("bad number '" + tok + "'");
      v.push_back(x);
    }
    if (v.size() != count) fail("expected " + std::to_string(count) + " numbers, found " + std::to_string(v.size()));
    return v;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ModelFormatError(path_ + ":" + std::to_string(line_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::string path_;
  long line_ = 0;
};

}  // namespace

void write_model_body(std::ostream& out, const GuidanceModel& model) {
  const std::vector<int> dims = model.layer_dims();
  out << kModelMagic << "\n";
  out << "target_set=" << format_targets(model.targets) << "\n";
  out << "layer_dims=";
  for (std::size_t k = 0; k < dims.size(); ++k) out << (k ? "," : "") << dims[k];
  out << "\n";
  out << "seed=" << model.seed << "\n";
  out << "input_mean=" << join(model.input.mean) << "\n";
  out << "input_std=" << join(model.input.std) << "\n";
  out << "output_lo=" << join(model.output.lo) << "\n";
  out << "output_hi=" << join(model.output.hi) << "\n";
  for (std::size_t l = 0; l < model.net.W.size(); ++l) {
    const Eigen::MatrixXd& w = model.net.W[l];
    out << "W" << l << "=" << w.rows() << " " << w.cols() << "\n";
    for (Eigen::Index i = 0; i < w.rows(); ++i) out << join(Eigen::VectorXd(w.row(i).transpose())) << "\n";
    out << "b" << l << "=" << join(model.net.b[l]) << "\n";
  }
  out << "end\n";
}

GuidanceModel read_model_body(std::istream& in, const std::string& path) {
  LineReader r(in, path);
  const std::string magic = r.next();
  if (magic.rfind("pontryagus-model ", 0) == 0 && magic != kModelMagic) {
    r.fail("unsupported model version '" + magic + "'");
  }
  if (magic != kModelMagic) r.fail("not a model file");

  GuidanceModel m;
  try {
    m.targets = parse_targets(r.value("target_set"));
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
  std::vector<int> dims;
  {
    std::stringstream ss(r.value("layer_dims"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      char* end = nullptr;
      const long d = std::strtol(item.c_str(), &end, 10);
      if (end == item.c_str() || *end != '\0' || d < 1) r.fail("bad layer dimension '" + item + "'");
      dims.push_back(static_cast<int>(d));
    }
  }
  if (dims.size() < 2 || dims.front() != 7 || dims.back() != static_cast<int>(m.targets.size())) {
    r.fail("layer_dims inconsistent with 7 inputs and the target set");
  }
  {
    const std::string s = r.value("seed");
    char* end = nullptr;
    m.seed = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') r.fail("bad seed");
  }
  const std::size_t k = m.targets.size();
  auto mean = r.numbers(r.value("input_mean"), 7);
  auto sd = r.numbers(r.value("input_std"), 7);
  auto lo = r.numbers(r.value("output_lo"), k);
  auto hi = r.numbers(r.value("output_hi"), k);
  for (int f = 0; f < 7; ++f) {
    m.input.mean[f] = mean[f];
    m.input.std[f] = sd[f];
    if (!(sd[f] > 0.0)) r.fail("input_std must be positive");
  }
  m.output.lo = Eigen::Map<Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(k));
  m.output.hi = Eigen::Map<Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(k));
  m.net = Mlp::zeros(dims);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::string shape = r.value("W" + std::to_string(l));
    if (shape != std::to_string(dims[l + 1]) + " " + std::to_string(dims[l])) r.fail("weight shape mismatch");
    for (int i = 0; i < dims[l + 1]; ++i) {
      auto row = r.numbers(r.next(), static_cast<std::size_t>(dims[l]));
      for (int j = 0; j < dims[l]; ++j) m.net.W[l](i, j) = row[j];
    }
    auto b = r.numbers(r.value("b" + std::to_string(l)), static_cast<std::size_t>(dims[l + 1]));
    for (int i = 0; i < dims[l + 1]; ++i) m.net.b[l][i] = b[i];
  }
  if (r.next() != "end") r.fail("missing end marker");
  return m;
}

void save_model(const GuidanceModel& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  write_model_body(f, model);
  if (!f) throw std::runtime_error("write failed: " + path);
}

GuidanceModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return read_model_body(f, path);
}

}  // namespace pontryagus
