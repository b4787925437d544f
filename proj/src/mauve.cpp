#include "synque/errors.hpp"
#include "synque/repmetrics.hpp"
#include "synque/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace synque {

namespace {

double kl(const std::vector<double>& a, const std::vector<double>& r) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > 0.0) total += a[i] * std::log(a[i] / r[i]);
  return std::max(total, 0.0);
}

void smooth(std::vector<double>& h, double eps) {
  double total = 0.0;
  for (auto& v : h) total += (v += eps);
  for (auto& v : h) v /= total;
}

}  // namespace

nlohmann::json to_json(const MauveConfig& cfg) {
  nlohmann::json j{{"scaling", cfg.scaling},
                   {"grid_points", cfg.grid_points},
                   {"smoothing", cfg.smoothing},
                   {"kmeans_iterations", cfg.kmeans_iterations}};
  if (cfg.num_bins)
    j["num_bins"] = *cfg.num_bins;
  else
    j["num_bins"] = "auto";
  return j;
}

MauveConfig mauve_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("mauve config must be a JSON object");
  MauveConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "num_bins") {
      if (value.is_string() && value.get<std::string>() == "auto")
        cfg.num_bins.reset();
      else
        cfg.num_bins = value.get<std::size_t>();
    } else if (key == "scaling") {
      cfg.scaling = value.get<double>();
    } else if (key == "grid_points") {
      cfg.grid_points = value.get<std::size_t>();
    } else if (key == "smoothing") {
      cfg.smoothing = value.get<double>();
    } else if (key == "kmeans_iterations") {
      cfg.kmeans_iterations = value.get<int>();
    } else {
      throw ConfigError(fmt::format("unknown mauve key '{}'", key));
    }
  }
  if (cfg.num_bins && *cfg.num_bins < 2) throw ConfigError("mauve num_bins must be at least 2");
  if (!(cfg.scaling > 0.0)) throw ConfigError("mauve scaling must be positive");
  if (cfg.grid_points < 1) throw ConfigError("mauve grid_points must be at least 1");
  if (!(cfg.smoothing > 0.0)) throw ConfigError("mauve smoothing must be positive");
  return cfg;
}

std::size_t auto_mauve_bins(std::size_t total_points) {
  return std::min<std::size_t>(128, std::max<std::size_t>(2, total_points / 20));
}

std::vector<FrontierPoint> divergence_frontier(const std::vector<double>& P, const std::vector<double>& Q,
                                               double scaling, std::size_t grid_points) {
  if (P.size() != Q.size() || P.empty()) throw std::invalid_argument("frontier: histogram size mismatch");
  std::vector<FrontierPoint> curve;
  curve.reserve(grid_points + 2);
  curve.push_back({1.0, 0.0});
  std::vector<double> R(P.size());
  for (std::size_t i = 1; i <= grid_points; ++i) {
    const double lambda = static_cast<double>(i) / static_cast<double>(grid_points + 1);
    for (std::size_t b = 0; b < P.size(); ++b) R[b] = lambda * P[b] + (1.0 - lambda) * Q[b];
    curve.push_back({std::exp(-scaling * kl(Q, R)), std::exp(-scaling * kl(P, R))});
  }
  curve.push_back({0.0, 1.0});
  return curve;
}

double frontier_area(const std::vector<FrontierPoint>& frontier) {
  double area = 0.0;
  for (std::size_t i = 1; i < frontier.size(); ++i)
    area += (frontier[i - 1].x - frontier[i].x) * 0.5 * (frontier[i - 1].y + frontier[i].y);
  return std::clamp(area, 0.0, 1.0);
}

double mauve_from_histograms(std::vector<double> P, std::vector<double> Q, const MauveConfig& cfg) {
  smooth(P, cfg.smoothing);
  smooth(Q, cfg.smoothing);
  return frontier_area(divergence_frontier(P, Q, cfg.scaling, cfg.grid_points));
}

Quantization kmeans(const Eigen::MatrixXd& X, std::size_t k, std::int64_t seed, int max_iterations) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (k < 1 || k > n) throw std::invalid_argument(fmt::format("kmeans: need 1 <= k <= n, got k={} n={}", k, n));
  Rng rng(static_cast<std::uint64_t>(seed), 0x6d61757665ULL);
  const auto row = [&](std::size_t i) { return X.row(static_cast<Eigen::Index>(i)); };

  Quantization q;
  q.centroids.resize(static_cast<Eigen::Index>(k), X.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (acc > target && d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = static_cast<std::size_t>(rng.below(n));
      }
    }
    q.centroids.row(static_cast<Eigen::Index>(c)) = row(pick);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (row(i) - q.centroids.row(static_cast<Eigen::Index>(c))).squaredNorm());
  }

  q.labels.assign(n, k);
  for (int iter = 0; iter < std::max(1, max_iterations); ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (row(i) - q.centroids.row(static_cast<Eigen::Index>(c))).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (q.labels[i] != best) {
        q.labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), X.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(q.labels[i])) += row(i);
      ++counts[q.labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c)  // an emptied cluster keeps its previous centroid
      if (counts[c] > 0)
        q.centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
  }
  return q;
}

ProxyScore mauve(const EmbeddingMatrix& Xs, const EmbeddingMatrix& Xr, const MauveConfig& cfg, std::int64_t seed) {
  if (Xs.rows() == 0 || Xr.rows() == 0) throw std::invalid_argument("mauve: empty input");
  if (Xs.dim() != Xr.dim())
    throw std::invalid_argument(fmt::format("mauve: dimension mismatch ({} vs {})", Xs.dim(), Xr.dim()));
  const auto n_real = static_cast<std::size_t>(Xr.rows());
  const auto n_syn = static_cast<std::size_t>(Xs.rows());
  const std::size_t bins = cfg.num_bins.value_or(auto_mauve_bins(n_real + n_syn));
  if (bins < 2) throw std::invalid_argument("mauve: need at least 2 bins");
  if (bins > n_real + n_syn)
    throw std::invalid_argument(fmt::format("mauve: {} bins exceed {} points", bins, n_real + n_syn));

  Eigen::MatrixXd U(Xr.rows() + Xs.rows(), Xs.dim());
  U.topRows(Xr.rows()) = Xr.data();
  U.bottomRows(Xs.rows()) = Xs.data();
  const auto q = kmeans(U, bins, seed, cfg.kmeans_iterations);

  std::vector<double> P(bins, 0.0), Q(bins, 0.0);
  for (std::size_t i = 0; i < n_real; ++i) P[q.labels[i]] += 1.0 / static_cast<double>(n_real);
  for (std::size_t i = 0; i < n_syn; ++i) Q[q.labels[n_real + i]] += 1.0 / static_cast<double>(n_syn);
  const double raw = mauve_from_histograms(std::move(P), std::move(Q), cfg);
  return make_score(Metric::mauve, raw,
                    {{"bins", std::to_string(bins)},
                     {"scaling", fmt::format("{}", cfg.scaling)},
                     {"grid_points", std::to_string(cfg.grid_points)},
                     {"seed", std::to_string(seed)},
                     {"n_s", std::to_string(n_syn)},
                     {"m_r", std::to_string(n_real)}});
}

}  // namespace synque
