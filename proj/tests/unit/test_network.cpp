#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pontryagus/network.hpp"
#include "support.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pontryagus;
using testing_support::Gen;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pontryagus_test_network_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

Mlp random_net(const std::vector<int>& dims, std::uint64_t seed) {
  Gen g(seed);
  Mlp m = Mlp::zeros(dims);
  for (std::size_t l = 0; l < m.W.size(); ++l) {
    for (Eigen::Index i = 0; i < m.W[l].size(); ++i) m.W[l].data()[i] = g.uniform(-0.8, 0.8);
    for (Eigen::Index i = 0; i < m.b[l].size(); ++i) m.b[l][i] = g.uniform(-0.3, 0.3);
  }
  return m;
}

Eigen::MatrixXd random_matrix(int rows, int cols, Gen& g, double lo, double hi) {
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g.uniform(lo, hi);
  return x;
}

GuidanceModel random_model(std::uint64_t seed) {
  GuidanceModel m;
  m.targets = {Target::kU, Target::kPhi, Target::kTheta};
  m.net = random_net({7, 9, 6, 3}, seed);
  m.seed = seed;
  Gen g(seed + 1);
  for (int f = 0; f < 7; ++f) {
    m.input.mean[f] = g.uniform(-1.0, 1.0);
    m.input.std[f] = g.uniform(0.1, 2.0);
  }
  m.output.lo = Eigen::Vector3d(0.0, -kPi, 0.0);
  m.output.hi = Eigen::Vector3d(1.0, kPi, kPi);
  return m;
}

// Loss written out as a plain sum, independent of the library's reductions.
double mse(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd p = net.forward(x);
  double s = 0.0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) s += (p(i, j) - y(i, j)) * (p(i, j) - y(i, j));
  }
  return s / static_cast<double>(p.size());
}

}  // namespace

TEST_CASE("target lists parse and print") {
  CHECK(parse_targets("u") == std::vector<Target>{Target::kU});
  CHECK(parse_targets("u,phi,theta") == std::vector<Target>{Target::kU, Target::kPhi, Target::kTheta});
  CHECK(parse_targets("theta,u") == std::vector<Target>{Target::kTheta, Target::kU});
  CHECK(format_targets(parse_targets("phi,theta")) == "phi,theta");
  CHECK_THROWS_AS(parse_targets(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_targets("u,u"), std::invalid_argument);
  CHECK_THROWS_AS(parse_targets("u,psi"), std::invalid_argument);
}

TEST_CASE("polar angles round-trip the thrust direction") {
  Gen g(51);
  for (int trial = 0; trial < 2000; ++trial) {
    ControlAction c = ControlAction::from_direction(g.uniform(0.0, 1.0), g.unit_vector());
    const Polar p = control_to_polar(c);
    CHECK(p.u == c.u);
    CHECK(p.theta >= 0.0);
    CHECK(p.theta <= kPi);
    CHECK(p.phi > -kPi);
    CHECK(p.phi <= kPi);
    CHECK((polar_to_direction(p.theta, p.phi) - c.dir).norm() <= 1e-14);
    CHECK(target_value(c, Target::kTheta) == p.theta);
    CHECK(target_value(c, Target::kPhi) == p.phi);
  }
  // The azimuth of the -x direction is +pi, never -pi.
  CHECK(control_to_polar(ControlAction::from_direction(1.0, Vec3(-1, -0.0, 0))).phi == kPi);
  CHECK(control_to_polar(ControlAction::from_direction(1.0, Vec3(0, 0, 1))).theta == 0.0);
}

TEST_CASE("glorot initialisation") {
  const std::vector<int> dims = guidance_layer_dims(3);
  CHECK(dims == std::vector<int>{7, 200, 200, 200, 200, 3});
  std::mt19937_64 a(42), b(42), c(43);
  const Mlp m = Mlp::glorot(dims, a);
  CHECK(m.dims() == dims);
  CHECK(m.parameter_count() == 7u * 200 + 200 + 3 * (200u * 200 + 200) + 200 * 3 + 3);
  for (std::size_t l = 0; l < m.W.size(); ++l) {
    const double limit = std::sqrt(6.0 / (dims[l] + dims[l + 1]));
    CHECK(m.W[l].cwiseAbs().maxCoeff() <= limit);
    CHECK(m.b[l].isZero(0.0));
    // Uniform on [-limit, limit]: variance limit^2 / 3.
    const double var = m.W[l].squaredNorm() / static_cast<double>(m.W[l].size());
    CHECK(var == doctest::Approx(limit * limit / 3.0).epsilon(m.W[l].size() > 1000 ? 0.05 : 0.3));
  }
  const Mlp same = Mlp::glorot(dims, b);
  const Mlp other = Mlp::glorot(dims, c);
  CHECK(same.W[2] == m.W[2]);
  CHECK(other.W[2] != m.W[2]);
}

TEST_CASE("forward pass on a hand-sized network") {
  Mlp m = Mlp::zeros({2, 2, 1});
  m.W[0] << 1.0, -1.0, 0.5, 2.0;
  m.b[0] << 0.0, -1.0;
  m.W[1] << 1.0, 0.5;
  m.b[1] << 0.1;
  Eigen::MatrixXd x(2, 2);
  x << 1.0, -1.0, 0.5, 1.0;
  // Column 0: z1 = (0.5, 0.5) -> relu (0.5, 0.5); out = tanh(0.5 + 0.25 + 0.1).
  // Column 1: z1 = (-2, 0.5)  -> relu (0, 0.5);   out = tanh(0.25 + 0.1).
  const Eigen::MatrixXd y = m.forward(x);
  CHECK(y(0, 0) == doctest::Approx(std::tanh(0.85)).epsilon(1e-15));
  CHECK(y(0, 1) == doctest::Approx(std::tanh(0.35)).epsilon(1e-15));
}

TEST_CASE("zero network predicts the middle of every target range") {
  GuidanceModel m = random_model(3);
  m.net = Mlp::zeros(m.net.dims());
  Gen g(52);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd out = m.forward(g.state());
    CHECK(out[0] == 0.5);
    CHECK(out[1] == 0.0);
    CHECK(out[2] == doctest::Approx(kPi / 2).epsilon(1e-15));
  }
}

TEST_CASE("backpropagation matches finite differences") {
  Gen g(53);
  for (int trial = 0; trial < 10; ++trial) {
    const Mlp net = random_net({7, 8, 6, 3}, 100 + trial);
    const Eigen::MatrixXd x = random_matrix(7, 5, g, -1.5, 1.5);
    const Eigen::MatrixXd y = random_matrix(3, 5, g, -0.9, 0.9);
    const MlpGradients grad = backprop_gradient(net, x, y);
    CHECK(grad.loss == doctest::Approx(mse(net, x, y)).epsilon(1e-14));
    const double h = 1e-6;
    for (std::size_t l = 0; l < net.W.size(); ++l) {
      for (Eigen::Index i = 0; i < net.W[l].size(); ++i) {
        Mlp p = net, m = net;
        p.W[l].data()[i] += h;
        m.W[l].data()[i] -= h;
        const double fd = (mse(p, x, y) - mse(m, x, y)) / (2.0 * h);
        CHECK(std::abs(grad.W[l].data()[i] - fd) <= 1e-7 * std::max(1.0, std::abs(fd)));
      }
      for (Eigen::Index i = 0; i < net.b[l].size(); ++i) {
        Mlp p = net, m = net;
        p.b[l][i] += h;
        m.b[l][i] -= h;
        const double fd = (mse(p, x, y) - mse(m, x, y)) / (2.0 * h);
        CHECK(std::abs(grad.b[l][i] - fd) <= 1e-7 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("a duplicated sample leaves the mean gradient unchanged") {
  Gen g(54);
  const Mlp net = random_net({7, 8, 2}, 7);
  const Eigen::MatrixXd x = random_matrix(7, 1, g, -1.0, 1.0);
  const Eigen::MatrixXd y = random_matrix(2, 1, g, -0.5, 0.5);
  Eigen::MatrixXd x2(7, 2), y2(2, 2);
  x2 << x, x;
  y2 << y, y;
  const MlpGradients one = backprop_gradient(net, x, y);
  const MlpGradients two = backprop_gradient(net, x2, y2);
  CHECK(two.loss == doctest::Approx(one.loss).epsilon(1e-15));
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    CHECK((two.W[l] - one.W[l]).norm() <= 1e-15 * std::max(1.0, one.W[l].norm()));
    CHECK((two.b[l] - one.b[l]).norm() <= 1e-15 * std::max(1.0, one.b[l].norm()));
  }
}

TEST_CASE("normalisation statistics") {
  Gen g(55);
  const Eigen::MatrixXd x = random_matrix(7, 400, g, -3.0, 5.0);
  const Eigen::MatrixXd y = random_matrix(2, 400, g, -2.0, 7.0);
  InputNormalization in;
  OutputScale out;
  fit_normalization(x, y, in, out);
  GuidanceModel m;
  m.input = in;
  const Eigen::MatrixXd z = m.normalize(x);
  for (int f = 0; f < 7; ++f) {
    CHECK(std::abs(z.row(f).mean()) <= 1e-13);
    CHECK(z.row(f).squaredNorm() / 400.0 == doctest::Approx(1.0).epsilon(1e-13));
  }
  CHECK(out.lo[0] == y.row(0).minCoeff());
  CHECK(out.hi[1] == y.row(1).maxCoeff());
  const Eigen::MatrixXd s = out.to_scaled(y);
  CHECK(s.minCoeff() == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(s.maxCoeff() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((out.to_native(s) - y).cwiseAbs().maxCoeff() <= 1e-14);

  Eigen::MatrixXd flat = x;
  flat.row(6).setConstant(0.8);
  CHECK_THROWS_AS(fit_normalization(flat, y, in, out), ZeroVarianceError);
  Eigen::MatrixXd const_target = y;
  const_target.row(1).setConstant(1.0);
  CHECK_THROWS_AS(fit_normalization(x, const_target, in, out), ZeroVarianceError);
  CHECK_THROWS_AS(fit_normalization(x.leftCols(1), y.leftCols(1), in, out), std::invalid_argument);
}

TEST_CASE("throttle output is clamped to [0, 1]") {
  GuidanceModel m = random_model(4);
  // Output range wider than [0, 1] so the raw prediction can leave it.
  m.output.lo[0] = -3.0;
  m.output.hi[0] = 4.0;
  Gen g(56);
  bool below = false, above = false;
  for (int trial = 0; trial < 500; ++trial) {
    SpacecraftState x;
    x.r = g.vec(-5.0, 5.0);
    x.v = g.vec(-5.0, 5.0);
    x.m = g.uniform(-5.0, 5.0);
    const double raw = m.output.to_native(m.net.forward(m.normalize(x.to_vector())))(0, 0);
    const double u = m.forward(x)[0];
    CHECK(u >= 0.0);
    CHECK(u <= 1.0);
    below |= raw < 0.0;
    above |= raw > 1.0;
    if (raw >= 0.0 && raw <= 1.0) CHECK(u == raw);
  }
  CHECK(below);
  CHECK(above);
}

TEST_CASE("rows are gathered node by node") {
  OptimalControlDataset ds;
  Gen g(57);
  for (int t = 0; t < 3; ++t) {
    TrajectoryRecord r;
    for (int k = 0; k < 4 + t; ++k) {
      TrajectoryNode n;
      n.t = k;
      n.x = g.state();
      n.ctrl = ControlAction::from_direction(g.uniform(0, 1), g.unit_vector());
      r.nodes.push_back(n);
    }
    ds.trajectories.push_back(r);
    ds.provenance.emplace_back();
  }
  const TrainingRows rows = rows_from_dataset(ds, {Target::kTheta, Target::kU});
  CHECK(rows.x.cols() == 15);
  CHECK(rows.y.rows() == 2);
  CHECK(rows.trajectory == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2});
  const TrajectoryNode& n = ds.trajectories[1].nodes[2];
  CHECK(rows.x.col(6) == n.x.to_vector());
  CHECK(rows.y(0, 6) == n.ctrl.theta);
  CHECK(rows.y(1, 6) == n.ctrl.u);
}

TEST_CASE("model files round-trip exactly") {
  const fs::path dir = scratch_dir("roundtrip");
  const GuidanceModel m = random_model(5);
  const std::string path = (dir / "model.txt").string();
  save_model(m, path);
  const GuidanceModel back = load_model(path);
  CHECK(back.targets == m.targets);
  CHECK(back.seed == m.seed);
  CHECK(back.layer_dims() == m.layer_dims());
  CHECK(back.input.mean == m.input.mean);
  CHECK(back.input.std == m.input.std);
  CHECK(back.output.lo == m.output.lo);
  CHECK(back.output.hi == m.output.hi);
  for (std::size_t l = 0; l < m.net.W.size(); ++l) {
    CHECK(back.net.W[l] == m.net.W[l]);
    CHECK(back.net.b[l] == m.net.b[l]);
  }
  Gen g(58);
  for (int trial = 0; trial < 20; ++trial) {
    const SpacecraftState x = g.state();
    CHECK(back.forward(x) == m.forward(x));
  }
  std::ifstream f(path);
  std::string first;
  std::getline(f, first);
  CHECK(first == "pontryagus-model v1");
}

TEST_CASE("damaged model files are rejected") {
  const fs::path dir = scratch_dir("damaged");
  const GuidanceModel m = random_model(6);
  const std::string good_path = (dir / "good.txt").string();
  save_model(m, good_path);
  std::vector<std::string> lines;
  {
    std::ifstream f(good_path);
    for (std::string l; std::getline(f, l);) lines.push_back(l);
  }
  auto write = [&](const std::vector<std::string>& v) {
    const std::string p = (dir / "bad.txt").string();
    std::ofstream f(p, std::ios::trunc);
    for (const auto& l : v) f << l << "\n";
    return p;
  };
  auto message = [&](const std::vector<std::string>& v) -> std::string {
    try {
      load_model(write(v));
    } catch (const ModelFormatError& e) {
      return e.what();
    }
    return "";
  };

  {
    auto v = lines;
    v.resize(v.size() / 2);
    const std::string msg = message(v);
    CHECK(msg.find("unexpected end of file") != std::string::npos);
    CHECK(msg.find(":" + std::to_string(v.size()) + ":") != std::string::npos);
  }
  {
    auto v = lines;
    v[0] = "pontryagus-model v2";
    CHECK(message(v).find("unsupported model version") != std::string::npos);
  }
  {
    auto v = lines;
    v[0] = "hello";
    CHECK(message(v).find("not a model file") != std::string::npos);
  }
  {
    auto v = lines;
    v[1] = "target_set=u,phi";
    CHECK(message(v).find(":3:") != std::string::npos);
  }
  {
    auto v = lines;
    v[9] = v[9] + " 1.0";  // an extra weight in the first row of W0
    CHECK(message(v).find(":10:") != std::string::npos);
  }
  {
    auto v = lines;
    v[9].replace(0, v[9].find(' '), "nan");
    CHECK(message(v).find("bad number") != std::string::npos);
  }
  {
    auto v = lines;
    v.pop_back();
    CHECK_FALSE(message(v).empty());
  }
  CHECK_THROWS_AS(load_model((dir / "missing.txt").string()), std::runtime_error);
}
