#include "synque/repmetrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace synque {

namespace {

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    D(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) D(i, j) = D(j, i) = (X.row(i) - X.row(j)).norm();
  }
  return D;
}

struct Nearest {
  std::vector<double> d1;          // distance to nearest medoid
  std::vector<double> d2;          // distance to second nearest medoid
  std::vector<std::size_t> owner;  // row index of nearest medoid
};

Nearest nearest_medoids(const Eigen::MatrixXd& D, const std::vector<std::size_t>& medoids) {
  const auto n = static_cast<std::size_t>(D.rows());
  constexpr double inf = std::numeric_limits<double>::infinity();
  Nearest out{std::vector<double>(n, inf), std::vector<double>(n, inf), std::vector<std::size_t>(n, 0)};
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t m : medoids) {  // medoids ascending: strict < keeps the lowest index on ties
      const double d = D(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j));
      if (d < out.d1[j]) {
        out.d2[j] = out.d1[j];
        out.d1[j] = d;
        out.owner[j] = m;
      } else if (d < out.d2[j]) {
        out.d2[j] = d;
      }
    }
  }
  return out;
}

}  // namespace

MedoidAssignment kmedoids(const Eigen::MatrixXd& X, std::size_t k, std::int64_t /*seed*/) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (k < 1) throw std::invalid_argument("kmedoids: k must be at least 1");
  if (k > n) throw std::invalid_argument(fmt::format("kmedoids: k = {} exceeds n = {}", k, n));
  const Eigen::MatrixXd D = pairwise_distances(X);
  auto dist = [&](std::size_t a, std::size_t b) {
    return D(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  };

  // BUILD
  std::vector<std::size_t> medoids;
  std::vector<char> is_medoid(n, 0);
  {
    std::size_t best = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = D.row(static_cast<Eigen::Index>(i)).sum();
      if (s < best_sum) {
        best_sum = s;
        best = i;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = 1;
  }
  std::vector<double> nearest(n);
  for (std::size_t j = 0; j < n; ++j) nearest[j] = dist(medoids[0], j);
  while (medoids.size() < k) {
    std::size_t best = n;
    double best_gain = -1.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (is_medoid[c]) continue;
      double gain = 0.0;
      for (std::size_t j = 0; j < n; ++j) gain += std::max(0.0, nearest[j] - dist(c, j));
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = 1;
    for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], dist(best, j));
  }
  std::sort(medoids.begin(), medoids.end());

  // SWAP
  const double scale = std::max(1.0, D.sum());
  const double tol = 1e-12 * scale;
  for (int sweep = 0; sweep < 10000; ++sweep) {
    const Nearest near = nearest_medoids(D, medoids);
    double best_delta = std::numeric_limits<double>::infinity();
    std::size_t best_out = 0, best_in = 0;
    // Zero-gain exchange toward a lower index: smallest incoming row, then largest outgoing.
    bool have_tie = false;
    std::size_t tie_out = 0, tie_in = n;
    for (std::size_t m : medoids) {
      for (std::size_t h = 0; h < n; ++h) {
        if (is_medoid[h]) continue;
        double delta = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dh = dist(h, j);
          if (near.owner[j] == m)
            delta += std::min(dh, near.d2[j]) - near.d1[j];
          else if (dh < near.d1[j])
            delta += dh - near.d1[j];
        }
        if (delta < best_delta) {
          best_delta = delta;
          best_out = m;
          best_in = h;
        }
        if (std::abs(delta) <= tol && h < m && (h < tie_in || (h == tie_in && m > tie_out))) {
          have_tie = true;
          tie_in = h;
          tie_out = m;
        }
      }
    }
    if (best_delta < -tol) {
      // fall through with the improving swap
    } else if (have_tie) {
      best_out = tie_out;
      best_in = tie_in;
    } else {
      break;
    }
    is_medoid[best_out] = 0;
    is_medoid[best_in] = 1;
    *std::find(medoids.begin(), medoids.end(), best_out) = best_in;
    std::sort(medoids.begin(), medoids.end());
  }

  MedoidAssignment out;
  out.medoid_indices = medoids;
  out.assignment.assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t pos = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < medoids.size(); ++p) {
      const double d = medoids[p] == j ? -1.0 : dist(medoids[p], j);
      if (d < best) {
        best = d;
        pos = p;
      }
    }
    out.assignment[j] = pos;
    out.total_deviation += dist(medoids[pos], j);
  }
  return out;
}

ProxyScore mdm(const EmbeddingMatrix& X, std::size_t k, std::int64_t seed) {
  const auto result = kmedoids(X.data(), k, seed);
  const double raw = result.total_deviation / static_cast<double>(X.rows());
  return make_score(Metric::mdm, raw,
                    {{"k", std::to_string(k)}, {"seed", std::to_string(seed)}, {"n_s", std::to_string(X.rows())}});
}

}  // namespace synque
