#include "synque/errors.hpp"
#include "synque/repmetrics.hpp"
#include "synque/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace synque {

namespace {

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i + 1 < n; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  return idx;
}

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// log(1 + exp(z)) without overflow
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& X, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

Eigen::VectorXd labels_of(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) y(static_cast<Eigen::Index>(r)) = labels[idx[r]];
  return y;
}

// L2-regularised logistic regression by damped Newton steps on standardised features.
// Returns predicted labels for `test`.
std::vector<int> logistic_predict(const Eigen::MatrixXd& train, const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& test, const PadConfig& cfg) {
  const Eigen::Index d = train.cols();
  const Eigen::RowVectorXd mean = train.colwise().mean();
  Eigen::RowVectorXd sd = ((train.rowwise() - mean).array().square().colwise().mean()).sqrt();
  for (Eigen::Index c = 0; c < d; ++c)
    if (!(sd(c) > 0.0)) sd(c) = 1.0;

  auto design = [&](const Eigen::MatrixXd& M) {
    Eigen::MatrixXd A(M.rows(), d + 1);
    A.leftCols(d) = (M.rowwise() - mean).array().rowwise() / sd.array();
    A.col(d).setOnes();
    return A;
  };
  const Eigen::MatrixXd A = design(train);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d + 1, cfg.l2);
  penalty(d) = 0.0;  // intercept is not penalised

  auto loss = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd z = A * theta;
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z(i)) - y(i) * z(i);
    return total + 0.5 * (penalty.array() * theta.array().square()).sum();
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  double current = loss(theta);
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const Eigen::VectorXd z = A * theta;
    Eigen::VectorXd p(z.size()), w(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      p(i) = sigmoid(z(i));
      w(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
    }
    const Eigen::VectorXd grad = A.transpose() * (p - y) + (penalty.array() * theta.array()).matrix();
    Eigen::MatrixXd H = A.transpose() * w.asDiagonal() * A;
    H.diagonal() += penalty;
    H.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = H.ldlt().solve(grad);
    double t = 1.0;
    Eigen::VectorXd next = theta - step;
    double next_loss = loss(next);
    while (next_loss > current && t > 1e-8) {
      t *= 0.5;
      next = theta - t * step;
      next_loss = loss(next);
    }
    if (next_loss > current) break;
    const double moved = (t * step).cwiseAbs().maxCoeff();
    theta = next;
    current = next_loss;
    if (moved < cfg.tolerance) break;
  }

  const Eigen::VectorXd z = design(test) * theta;
  std::vector<int> out(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = z(i) > 0.0 ? 1 : 0;
  return out;
}

// Gradient-boosted depth-1 trees on the logistic loss, thresholds from per-feature quantiles.
std::vector<int> stumps_predict(const Eigen::MatrixXd& train, const Eigen::VectorXd& y,
                                const Eigen::MatrixXd& test, const PadConfig& cfg) {
  constexpr double lambda = 1.0;
  const Eigen::Index n = train.rows();
  const Eigen::Index d = train.cols();
  const double pos = y.sum();
  const double base = std::log(std::max(pos, 0.5) / std::max(static_cast<double>(n) - pos, 0.5));

  std::vector<std::vector<double>> thresholds(static_cast<std::size_t>(d));
  for (Eigen::Index c = 0; c < d; ++c) {
    std::vector<double> v(train.col(c).data(), train.col(c).data() + n);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    auto& t = thresholds[static_cast<std::size_t>(c)];
    if (v.size() < 2) continue;
    const std::size_t cuts = std::min<std::size_t>(v.size() - 1, static_cast<std::size_t>(std::max(cfg.max_bins, 1)));
    for (std::size_t q = 1; q <= cuts; ++q) {
      const std::size_t at = q * (v.size() - 1) / (cuts + 1);
      t.push_back(0.5 * (v[at] + v[at + 1]));
    }
    t.erase(std::unique(t.begin(), t.end()), t.end());
  }

  struct Stump {
    Eigen::Index feature;
    double threshold, left, right;
  };
  std::vector<Stump> stumps;
  Eigen::VectorXd F = Eigen::VectorXd::Constant(n, base);
  for (int round = 0; round < cfg.rounds; ++round) {
    Eigen::VectorXd g(n), h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(F(i));
      g(i) = p - y(i);
      h(i) = std::max(p * (1.0 - p), 1e-12);
    }
    const double G = g.sum(), Hs = h.sum();
    double best_gain = 0.0;
    std::optional<Stump> best;
    for (Eigen::Index c = 0; c < d; ++c) {
      for (double t : thresholds[static_cast<std::size_t>(c)]) {
        double gl = 0.0, hl = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
          if (train(i, c) <= t) {
            gl += g(i);
            hl += h(i);
          }
        const double gr = G - gl, hr = Hs - hl;
        const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - G * G / (Hs + lambda);
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best = Stump{c, t, -gl / (hl + lambda), -gr / (hr + lambda)};
        }
      }
    }
    if (!best) break;
    stumps.push_back(*best);
    for (Eigen::Index i = 0; i < n; ++i)
      F(i) += cfg.learning_rate * (train(i, best->feature) <= best->threshold ? best->left : best->right);
  }

  std::vector<int> out(static_cast<std::size_t>(test.rows()));
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    double f = base;
    for (const auto& s : stumps) f += cfg.learning_rate * (test(i, s.feature) <= s.threshold ? s.left : s.right);
    out[static_cast<std::size_t>(i)] = f > 0.0 ? 1 : 0;
  }
  return out;
}

std::string_view to_string(PadClassifier c) {
  return c == PadClassifier::logistic ? "logistic" : "boosted_stumps";
}

}  // namespace

nlohmann::json to_json(const PadConfig& cfg) {
  return {{"classifier", std::string(to_string(cfg.classifier))},
          {"holdout_fraction", cfg.holdout_fraction},
          {"l2", cfg.l2},
          {"max_iterations", cfg.max_iterations},
          {"tolerance", cfg.tolerance},
          {"rounds", cfg.rounds},
          {"learning_rate", cfg.learning_rate},
          {"max_bins", cfg.max_bins}};
}

PadConfig pad_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("pad config must be a JSON object");
  PadConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "classifier") {
      const auto name = value.get<std::string>();
      if (name == "logistic")
        cfg.classifier = PadClassifier::logistic;
      else if (name == "boosted_stumps")
        cfg.classifier = PadClassifier::boosted_stumps;
      else
        throw ConfigError(fmt::format("unknown pad classifier '{}' (logistic, boosted_stumps)", name));
    } else if (key == "holdout_fraction") {
      cfg.holdout_fraction = value.get<double>();
    } else if (key == "l2") {
      cfg.l2 = value.get<double>();
    } else if (key == "max_iterations") {
      cfg.max_iterations = value.get<int>();
    } else if (key == "tolerance") {
      cfg.tolerance = value.get<double>();
    } else if (key == "rounds") {
      cfg.rounds = value.get<int>();
    } else if (key == "learning_rate") {
      cfg.learning_rate = value.get<double>();
    } else if (key == "max_bins") {
      cfg.max_bins = value.get<int>();
    } else {
      throw ConfigError(fmt::format("unknown pad key '{}'", key));
    }
  }
  if (!(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0))
    throw ConfigError("pad holdout_fraction must lie in (0, 1)");
  if (cfg.l2 < 0.0) throw ConfigError("pad l2 must be non-negative");
  return cfg;
}

PadSplit pad_split(std::size_t n_syn, std::size_t n_real, double holdout_fraction, std::int64_t seed) {
  Rng rng(static_cast<std::uint64_t>(seed));
  PadSplit split;
  auto take = [&](std::size_t n, std::size_t offset, const char* cls) {
    const auto held = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n))));
    if (n < 2 || held >= n)
      throw std::invalid_argument(fmt::format(
          "pad: holdout would be degenerate ({} {} rows); provide at least 2 rows per class, "
          "preferably many more",
          n, cls));
    const auto order = shuffled(n, rng);
    for (std::size_t i = 0; i < n; ++i) (i < held ? split.holdout : split.train).push_back(offset + order[i]);
  };
  take(n_syn, 0, "synthetic");
  take(n_real, n_syn, "real");
  return split;
}

double pad_holdout_error(const Eigen::MatrixXd& X, const std::vector<int>& labels, const PadSplit& split,
                         const PadConfig& cfg) {
  const Eigen::MatrixXd train = rows_of(X, split.train);
  const Eigen::VectorXd y = labels_of(labels, split.train);
  const Eigen::MatrixXd test = rows_of(X, split.holdout);
  const auto predicted = cfg.classifier == PadClassifier::logistic ? logistic_predict(train, y, test, cfg)
                                                                   : stumps_predict(train, y, test, cfg);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) wrong += predicted[i] != labels[split.holdout[i]];
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

ProxyScore pad(const EmbeddingMatrix& Xs, const EmbeddingMatrix& Xr, const PadConfig& cfg, std::int64_t seed) {
  if (Xs.rows() == 0 || Xr.rows() == 0) throw std::invalid_argument("pad: empty input");
  if (Xs.dim() != Xr.dim())
    throw std::invalid_argument(fmt::format("pad: dimension mismatch ({} vs {})", Xs.dim(), Xr.dim()));
  Eigen::MatrixXd X(Xs.rows() + Xr.rows(), Xs.dim());
  X.topRows(Xs.rows()) = Xs.data();
  X.bottomRows(Xr.rows()) = Xr.data();
  std::vector<int> labels(static_cast<std::size_t>(X.rows()), 0);
  std::fill_n(labels.begin(), Xs.rows(), 1);
  const auto split = pad_split(static_cast<std::size_t>(Xs.rows()), static_cast<std::size_t>(Xr.rows()),
                               cfg.holdout_fraction, seed);
  const double error = pad_holdout_error(X, labels, split, cfg);
  return make_score(Metric::pad, 1.0 - 2.0 * error,
                    {{"classifier", std::string(to_string(cfg.classifier))},
                     {"holdout_error", fmt::format("{:.6f}", error)},
                     {"holdout_size", std::to_string(split.holdout.size())},
                     {"seed", std::to_string(seed)},
                     {"n_s", std::to_string(Xs.rows())},
                     {"m_r", std::to_string(Xr.rows())}});
}

}  // namespace synque
