#pragma once

// Straightforward reference implementations used as test oracles. None of these call
// into the library; they trade speed for being obviously correct.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace oracle {

using Row = std::vector<double>;
using Rows = std::vector<Row>;

inline double dot(const Row& a, const Row& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double euclid(const Row& a, const Row& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Biased MMD² by the literal triple double sum.
inline double mmd2(const Rows& s, const Rows& r, const std::function<double(const Row&, const Row&)>& k) {
  double rr = 0, ss = 0, sr = 0;
  for (const auto& a : r)
    for (const auto& b : r) rr += k(a, b);
  for (const auto& a : s)
    for (const auto& b : s) ss += k(a, b);
  for (const auto& a : s)
    for (const auto& b : r) sr += k(a, b);
  const double n = static_cast<double>(s.size()), m = static_cast<double>(r.size());
  return rr / (m * m) + ss / (n * n) - 2.0 * sr / (n * m);
}

struct MedoidOptimum {
  std::vector<std::size_t> medoids;  // lexicographically first optimal set
  double cost = std::numeric_limits<double>::infinity();
  std::size_t optimal_sets = 0;  // number of sets within tolerance of the optimum
};

// Exhaustive search over all C(n, k) medoid sets.
inline MedoidOptimum best_medoids(const Rows& X, std::size_t k) {
  const std::size_t n = X.size();
  MedoidOptimum best;
  std::vector<std::size_t> pick(k);
  std::vector<std::pair<std::vector<std::size_t>, double>> all;
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
    if (depth == k) {
      double cost = 0;
      for (const auto& x : X) {
        double d = std::numeric_limits<double>::infinity();
        for (auto m : pick) d = std::min(d, euclid(x, X[m]));
        cost += d;
      }
      all.emplace_back(pick, cost);
      return;
    }
    for (std::size_t i = start; i < n; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  for (const auto& [set, cost] : all)
    if (cost < best.cost - 1e-12) {
      best.cost = cost;
      best.medoids = set;
    }
  for (const auto& [set, cost] : all)
    if (std::abs(cost - best.cost) <= 1e-9) ++best.optimal_sets;
  return best;
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

// Area under the divergence frontier by dense midpoint integration over lambda. The curve
// (x(l), y(l)) runs from (1, 0) at l = 0 to (0, 1) at l = 1, so area = int y dx = -int y x'(l) dl.
inline double mauve_area(std::vector<double> P, std::vector<double> Q, double c, double smoothing,
                         std::size_t steps = 200000) {
  const auto norm = [&](std::vector<double>& v) {
    double t = 0;
    for (auto& x : v) t += (x += smoothing);
    for (auto& x : v) x /= t;
  };
  norm(P);
  norm(Q);
  const auto point = [&](double l) {
    std::vector<double> R(P.size());
    for (std::size_t i = 0; i < P.size(); ++i) R[i] = l * P[i] + (1 - l) * Q[i];
    return std::pair{std::exp(-c * kl(Q, R)), std::exp(-c * kl(P, R))};
  };
  double area = 0;
  auto prev = std::pair{1.0, 0.0};
  for (std::size_t s = 1; s <= steps; ++s) {
    const double l = static_cast<double>(s) / static_cast<double>(steps);
    const auto cur = s == steps ? std::pair{0.0, 1.0} : point(l);
    area += (prev.first - cur.first) * 0.5 * (prev.second + cur.second);
    prev = cur;
  }
  return area;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n, mb = sb / n;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Rank of v[i] = 1 + #{j : v[j] < v[i]} + (#{j != i : v[j] == v[i]}) / 2.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++less;
      if (j != i && v[j] == v[i]) ++equal;
    }
    r[i] = 1 + less + equal / 2;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(ranks(a), ranks(b));
}

// Best k-subset by total score; among equal totals the subset whose sorted names are
// lexicographically smallest. Returns the chosen names sorted.
inline std::vector<std::string> best_subset(const std::map<std::string, double>& scores, std::size_t k) {
  std::vector<std::string> names;
  for (const auto& [n, _] : scores) names.push_back(n);
  std::vector<std::string> best;
  double best_total = -std::numeric_limits<double>::infinity();
  const std::size_t n = names.size();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
    std::vector<std::string> pick;
    double total = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        pick.push_back(names[i]);
        total += scores.at(names[i]);
      }
    if (total > best_total || (total == best_total && pick < best)) {
      best_total = total;
      best = pick;
    }
  }
  return best;
}

// Nearest-centroid domain classifier on a train/holdout split, returning holdout error.
inline double nearest_centroid_error(const Rows& train_syn, const Rows& train_real, const Rows& hold_syn,
                                     const Rows& hold_real) {
  const auto centroid = [](const Rows& X) {
    Row c(X.front().size(), 0.0);
    for (const auto& x : X)
      for (std::size_t i = 0; i < c.size(); ++i) c[i] += x[i] / static_cast<double>(X.size());
    return c;
  };
  const Row cs = centroid(train_syn), cr = centroid(train_real);
  double wrong = 0;
  for (const auto& x : hold_syn) wrong += euclid(x, cs) < euclid(x, cr) ? 0 : 1;
  for (const auto& x : hold_real) wrong += euclid(x, cr) <= euclid(x, cs) ? 0 : 1;
  return wrong / static_cast<double>(hold_syn.size() + hold_real.size());
}

}  // namespace oracle
