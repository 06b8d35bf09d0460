#include "pontryagus/network.hpp"
#include "pontryagus/seeding.hpp"

#include "model_text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace pontryagus {

void TrainConfig::validate() const {
  if (batch < 1) throw std::invalid_argument("batch must be positive");
  if (!(lr0 > 0.0)) throw std::invalid_argument("lr0 must be positive");
  if (!(lr_factor > 1.0)) throw std::invalid_argument("lr_factor must exceed 1");
  if (lr_patience < 1 || stop_patience < 1) throw std::invalid_argument("patience values must be positive");
  if (!(plateau_delta > 0.0)) throw std::invalid_argument("plateau_delta must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must lie in (0, 1)");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be positive");
  if (hidden.empty()) throw std::invalid_argument("at least one hidden layer is required");
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("hidden layer widths must be positive");
  }
}

void split_rows(const TrainingRows& rows, double val_fraction, std::uint64_t seed, std::vector<int>& train,
                std::vector<int>& val) {
  train.clear();
  val.clear();
  const int n_traj = rows.trajectory.empty() ? 0 : *std::max_element(rows.trajectory.begin(), rows.trajectory.end()) + 1;
  std::vector<int> order(n_traj);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  int n_val = static_cast<int>(std::lround(val_fraction * n_traj));
  if (n_traj >= 2) n_val = std::clamp(n_val, 1, n_traj - 1);
  std::vector<char> held(n_traj, 0);
  for (int k = n_traj - n_val; k < n_traj; ++k) held[order[k]] = 1;
  for (int c = 0; c < static_cast<int>(rows.trajectory.size()); ++c) {
    (held[rows.trajectory[c]] ? val : train).push_back(c);
  }
}

namespace {

constexpr const char* kCheckpointMagic = "pontryagus-checkpoint v1";

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const int* idx, int count) {
  Eigen::MatrixXd out(m.rows(), count);
  for (int k = 0; k < count; ++k) out.col(k) = m.col(idx[k]);
  return out;
}

// FNV-1a over the raw bytes, to refuse resuming on a different dataset.
std::uint64_t fingerprint(const TrainingRows& rows) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t k = 0; k < n; ++k) {
      h ^= b[k];
      h *= 1099511628211ULL;
    }
  };
  mix(rows.x.data(), sizeof(double) * rows.x.size());
  mix(rows.y.data(), sizeof(double) * rows.y.size());
  mix(rows.trajectory.data(), sizeof(int) * rows.trajectory.size());
  return h;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_numbers(std::ostream& out, const double* p, Eigen::Index n) {
  for (Eigen::Index k = 0; k < n; ++k) out << (k ? " " : "") << fmt(p[k]);
  out << "\n";
}

void write_history(std::ostream& out, const std::string& key, const std::vector<double>& v) {
  out << key << "=" << v.size() << "\n";
  write_numbers(out, v.data(), static_cast<Eigen::Index>(v.size()));
}

struct CheckpointReader {
  std::istream& in;
  std::string path;

  [[noreturn]] void fail(const std::string& what) const { throw ModelFormatError(path + ": " + what); }

  std::string line() {
    std::string s;
    if (!std::getline(in, s)) fail("truncated checkpoint");
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
  }
  std::string value(const std::string& key) {
    const std::string s = line();
    if (s.rfind(key + "=", 0) != 0) fail("expected key " + key);
    return s.substr(key.size() + 1);
  }
  template <class T>
  T scalar(const std::string& key) {
    std::istringstream ss(value(key));
    T v{};
    if (!(ss >> v)) fail("bad value for " + key);
    return v;
  }
  double real(const std::string& key) {
    const std::string s = value(key);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') fail("bad value for " + key);
    return v;
  }
  void numbers(double* p, Eigen::Index n) {
    std::istringstream ss(line());
    std::string tok;
    Eigen::Index k = 0;
    while (ss >> tok) {
      if (k == n) fail("too many numbers");
      char* end = nullptr;
      p[k++] = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') fail("bad number '" + tok + "'");
    }
    if (k != n) fail("too few numbers");
  }
  std::vector<double> history(const std::string& key) {
    std::vector<double> v(scalar<std::size_t>(key));
    numbers(v.data(), static_cast<Eigen::Index>(v.size()));
    return v;
  }
};

}  // namespace

Trainer::Trainer(const TrainingRows& rows, const TrainConfig& cfg) : rows_(&rows), cfg_(cfg) {}

Trainer::Trainer(const TrainingRows& rows, std::vector<Target> targets, const TrainConfig& cfg)
    : rows_(&rows), cfg_(cfg) {
  cfg_.validate();
  if (rows.x.cols() == 0) throw std::invalid_argument("training dataset is empty");
  if (rows.y.rows() != static_cast<Eigen::Index>(targets.size())) {
    throw std::invalid_argument("target rows do not match the target set");
  }
  split_rows(rows, cfg_.val_fraction, derive_seed(cfg_.seed, 1), train_idx_, val_idx_);
  if (train_idx_.size() < 2) throw std::invalid_argument("training split has fewer than two rows");

  model_.targets = std::move(targets);
  model_.seed = cfg_.seed;
  fit_normalization(gather(rows.x, train_idx_.data(), static_cast<int>(train_idx_.size())),
                    gather(rows.y, train_idx_.data(), static_cast<int>(train_idx_.size())), model_.input,
                    model_.output);
  std::vector<int> dims{7};
  dims.insert(dims.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  dims.push_back(static_cast<int>(model_.targets.size()));
  std::mt19937_64 init(derive_seed(cfg_.seed, 0));
  model_.net = Mlp::glorot(dims, init);

  const Mlp zero = Mlp::zeros(dims);
  mW_ = vW_ = zero.W;
  mb_ = vb_ = zero.b;
  lr_ = cfg_.lr0;
  best_loss_ = std::numeric_limits<double>::infinity();
  rng_.seed(derive_seed(cfg_.seed, 2));
  xn_ = model_.normalize(rows.x);
  ys_ = model_.output.to_scaled(rows.y);
  report_.train_rows = train_idx_.size();
  report_.val_rows = val_idx_.size();
}

double Trainer::evaluate_loss(const std::vector<int>& idx, std::vector<double>* per_target) const {
  const Eigen::Index k = ys_.rows();
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(k);
  constexpr int kChunk = 4096;
  for (std::size_t start = 0; start < idx.size(); start += kChunk) {
    const int count = static_cast<int>(std::min<std::size_t>(kChunk, idx.size() - start));
    const Eigen::MatrixXd diff =
        model_.net.forward(gather(xn_, idx.data() + start, count)) - gather(ys_, idx.data() + start, count);
    sq += diff.array().square().rowwise().sum().matrix();
  }
  const double n = static_cast<double>(std::max<std::size_t>(idx.size(), 1));
  if (per_target) {
    per_target->resize(k);
    for (Eigen::Index t = 0; t < k; ++t) (*per_target)[t] = sq[t] / n;
  }
  return sq.sum() / (n * static_cast<double>(k));
}

bool Trainer::run_epoch() {
  if (finished_) return false;
  std::shuffle(train_idx_.begin(), train_idx_.end(), rng_);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  double loss_sum = 0.0;
  const int n = static_cast<int>(train_idx_.size());
  for (int start = 0; start < n; start += cfg_.batch) {
    const int count = std::min(cfg_.batch, n - start);
    const MlpGradients g =
        backprop_gradient(model_.net, gather(xn_, train_idx_.data() + start, count), gather(ys_, train_idx_.data() + start, count));
    loss_sum += g.loss * count;

    ++adam_step_;
    const double t = static_cast<double>(adam_step_);
    const double step = lr_ * std::sqrt(1.0 - std::pow(kBeta2, t)) / (1.0 - std::pow(kBeta1, t));
    for (std::size_t l = 0; l < model_.net.W.size(); ++l) {
      mW_[l] = kBeta1 * mW_[l] + (1.0 - kBeta1) * g.W[l];
      vW_[l] = kBeta2 * vW_[l] + (1.0 - kBeta2) * g.W[l].cwiseAbs2();
      model_.net.W[l].array() -= step * mW_[l].array() / (vW_[l].array().sqrt() + kEps);
      mb_[l] = kBeta1 * mb_[l] + (1.0 - kBeta1) * g.b[l];
      vb_[l] = kBeta2 * vb_[l] + (1.0 - kBeta2) * g.b[l].cwiseAbs2();
      model_.net.b[l].array() -= step * mb_[l].array() / (vb_[l].array().sqrt() + kEps);
    }
  }
  const double train_loss = loss_sum / n;
  const double val_loss = val_idx_.empty() ? train_loss : evaluate_loss(val_idx_, nullptr);
  if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
    throw TrainingDivergedError(report_.epochs_run, "training loss became non-finite in epoch " +
                                                        std::to_string(report_.epochs_run + 1));
  }
  report_.train_loss_history.push_back(train_loss);
  report_.val_loss_history.push_back(val_loss);
  report_.lr_history.push_back(lr_);
  ++report_.epochs_run;

  // Plateau bookkeeping on the training loss with an absolute threshold.
  if (train_loss < best_loss_ - cfg_.plateau_delta) {
    best_loss_ = train_loss;
    wait_lr_ = 0;
    wait_stop_ = 0;
  } else {
    ++wait_lr_;
    ++wait_stop_;
    if (wait_lr_ >= cfg_.lr_patience) {
      lr_ /= cfg_.lr_factor;
      wait_lr_ = 0;
    }
  }
  if (wait_stop_ >= cfg_.stop_patience) {
    finished_ = true;
    report_.stop_reason = "plateau";
  } else if (report_.epochs_run >= cfg_.max_epochs) {
    finished_ = true;
    report_.stop_reason = "max_epochs";
  }
  return !finished_;
}

void Trainer::run() {
  while (run_epoch()) {
  }
}

TrainReport Trainer::final_report() const {
  TrainReport r = report_;
  evaluate_loss(train_idx_, &r.train_mse);
  if (val_idx_.empty()) {
    r.val_mse = r.train_mse;
  } else {
    evaluate_loss(val_idx_, &r.val_mse);
  }
  return r;
}

void Trainer::save_checkpoint(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << kCheckpointMagic << "\n";
  f << "rows=" << rows_->x.cols() << "\n";
  f << "fingerprint=" << fingerprint(*rows_) << "\n";
  f << "batch=" << cfg_.batch << "\n";
  f << "lr0=" << fmt(cfg_.lr0) << "\n";
  f << "lr_factor=" << fmt(cfg_.lr_factor) << "\n";
  f << "lr_patience=" << cfg_.lr_patience << "\n";
  f << "stop_patience=" << cfg_.stop_patience << "\n";
  f << "plateau_delta=" << fmt(cfg_.plateau_delta) << "\n";
  f << "val_fraction=" << fmt(cfg_.val_fraction) << "\n";
  f << "seed=" << cfg_.seed << "\n";
  f << "max_epochs=" << cfg_.max_epochs << "\n";
  f << "adam_step=" << adam_step_ << "\n";
  f << "lr=" << fmt(lr_) << "\n";
  f << "best_loss=" << fmt(best_loss_) << "\n";
  f << "wait_lr=" << wait_lr_ << "\n";
  f << "wait_stop=" << wait_stop_ << "\n";
  f << "finished=" << (finished_ ? 1 : 0) << "\n";
  f << "stop_reason=" << report_.stop_reason << "\n";
  f << "rng=" << rng_ << "\n";
  f << "train_order=" << train_idx_.size() << "\n";
  for (std::size_t k = 0; k < train_idx_.size(); ++k) f << (k ? " " : "") << train_idx_[k];
  f << "\n";
  write_history(f, "train_loss", report_.train_loss_history);
  write_history(f, "val_loss", report_.val_loss_history);
  write_history(f, "lr_history", report_.lr_history);
  for (std::size_t l = 0; l < mW_.size(); ++l) {
    f << "adam." << l << "\n";
    write_numbers(f, mW_[l].data(), mW_[l].size());
    write_numbers(f, vW_[l].data(), vW_[l].size());
    write_numbers(f, mb_[l].data(), mb_[l].size());
    write_numbers(f, vb_[l].data(), vb_[l].size());
  }
  write_model_body(f, model_);
  if (!f) throw std::runtime_error("write failed: " + path);
}

Trainer Trainer::resume(const std::string& path, const TrainingRows& rows) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  CheckpointReader r{f, path};
  if (r.line() != kCheckpointMagic) r.fail("not a training checkpoint");
  if (r.scalar<long>("rows") != rows.x.cols()) r.fail("checkpoint was written for a different row count");
  if (r.scalar<std::uint64_t>("fingerprint") != fingerprint(rows)) r.fail("checkpoint was written for a different dataset");

  TrainConfig cfg;
  cfg.batch = r.scalar<int>("batch");
  cfg.lr0 = r.real("lr0");
  cfg.lr_factor = r.real("lr_factor");
  cfg.lr_patience = r.scalar<int>("lr_patience");
  cfg.stop_patience = r.scalar<int>("stop_patience");
  cfg.plateau_delta = r.real("plateau_delta");
  cfg.val_fraction = r.real("val_fraction");
  cfg.seed = r.scalar<std::uint64_t>("seed");
  cfg.max_epochs = r.scalar<int>("max_epochs");

  Trainer t(rows, cfg);
  t.adam_step_ = r.scalar<long>("adam_step");
  t.lr_ = r.real("lr");
  t.best_loss_ = r.real("best_loss");
  t.wait_lr_ = r.scalar<int>("wait_lr");
  t.wait_stop_ = r.scalar<int>("wait_stop");
  t.finished_ = r.scalar<int>("finished") != 0;
  t.report_.stop_reason = r.value("stop_reason");
  {
    std::istringstream ss(r.value("rng"));
    if (!(ss >> t.rng_)) r.fail("bad rng state");
  }
  t.train_idx_.resize(r.scalar<std::size_t>("train_order"));
  {
    std::istringstream ss(r.line());
    for (int& i : t.train_idx_) {
      if (!(ss >> i) || i < 0 || i >= rows.x.cols()) r.fail("bad training order");
    }
  }
  t.report_.train_loss_history = r.history("train_loss");
  t.report_.val_loss_history = r.history("val_loss");
  t.report_.lr_history = r.history("lr_history");
  t.report_.epochs_run = static_cast<int>(t.report_.train_loss_history.size());

  // Shapes come from the model, which follows the optimizer state in the file.
  std::vector<std::vector<double>> moments;
  for (;;) {
    const std::streampos at = f.tellg();
    const std::string tag = r.line();
    if (tag.rfind("adam.", 0) != 0) {
      f.seekg(at);
      break;
    }
    for (int k = 0; k < 4; ++k) {
      std::istringstream ss(r.line());
      std::vector<double> v;
      std::string tok;
      while (ss >> tok) v.push_back(std::strtod(tok.c_str(), nullptr));
      moments.push_back(std::move(v));
    }
  }
  t.model_ = read_model_body(f, path);
  const std::vector<int> dims = t.model_.layer_dims();
  t.cfg_.hidden.assign(dims.begin() + 1, dims.end() - 1);
  if (moments.size() != 4 * t.model_.net.W.size()) r.fail("optimizer state does not match the model");
  for (std::size_t l = 0; l < t.model_.net.W.size(); ++l) {
    const auto rowsW = t.model_.net.W[l].rows(), colsW = t.model_.net.W[l].cols();
    auto take = [&](std::size_t k, Eigen::Index size) {
      if (static_cast<Eigen::Index>(moments[k].size()) != size) r.fail("optimizer state has the wrong shape");
      return Eigen::Map<const Eigen::VectorXd>(moments[k].data(), size);
    };
    t.mW_.push_back(Eigen::Map<const Eigen::MatrixXd>(take(4 * l, rowsW * colsW).data(), rowsW, colsW));
    t.vW_.push_back(Eigen::Map<const Eigen::MatrixXd>(take(4 * l + 1, rowsW * colsW).data(), rowsW, colsW));
    t.mb_.push_back(take(4 * l + 2, rowsW));
    t.vb_.push_back(take(4 * l + 3, rowsW));
  }
  if (rows.y.rows() != static_cast<Eigen::Index>(t.model_.targets.size())) r.fail("target set does not match the rows");

  std::vector<int> train_ref;
  split_rows(rows, cfg.val_fraction, derive_seed(cfg.seed, 1), train_ref, t.val_idx_);
  if (train_ref.size() != t.train_idx_.size()) r.fail("training split does not match the dataset");
  t.xn_ = t.model_.normalize(rows.x);
  t.ys_ = t.model_.output.to_scaled(rows.y);
  t.report_.train_rows = t.train_idx_.size();
  t.report_.val_rows = t.val_idx_.size();
  return t;
}

GuidanceModel train(const TrainingRows& rows, const std::vector<Target>& targets, const TrainConfig& cfg,
                    TrainReport* report) {
  Trainer t(rows, targets, cfg);
  t.run();
  if (report) *report = t.final_report();
  return t.model();
}

}  // namespace pontryagus
