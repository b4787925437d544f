#pragma once

#include "synque/ingest.hpp"
#include "synque/kernels.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace synque {

enum class Metric { mmd2, mdm, pad, mauve, lens, hybrid };

std::string_view to_string(Metric metric);
// Throws std::invalid_argument listing the valid names.
Metric metric_from_string(std::string_view name);
const std::vector<Metric>& all_metrics();

/// One proxy evaluation. `synque_score` is oriented so that higher predicts better
/// downstream task performance; `meta` holds every input needed to recompute it.
struct ProxyScore {
  Metric metric = Metric::mmd2;
  double raw = 0.0;
  double synque_score = 0.0;
  std::map<std::string, std::string> meta;
};

// synque_score = -raw for mmd2 and pad, raw otherwise.
double orient(Metric metric, double raw);
ProxyScore make_score(Metric metric, double raw, std::map<std::string, std::string> meta = {});
nlohmann::json to_json(const ProxyScore& score);

// ---------------------------------------------------------------------------
// MMD²

// Biased V-statistic: mean k(r,r') + mean k(s,s') - 2 mean k(s,r).
double mmd2_raw(const Eigen::MatrixXd& Xs, const Eigen::MatrixXd& Xr, const KernelSpec& spec);
ProxyScore mmd2(const EmbeddingMatrix& Xs, const EmbeddingMatrix& Xr, const KernelSpec& spec);

// ---------------------------------------------------------------------------
// k-medoids and MDM

struct MedoidAssignment {
  std::vector<std::size_t> medoid_indices;  // ascending row indices
  std::vector<std::size_t> assignment;      // per row: position in medoid_indices
  double total_deviation = 0.0;             // sum of distances to own medoid
};

/// PAM: greedy BUILD, then SWAP until no single exchange lowers the total deviation.
/// Ties resolve toward the lowest row index, including zero-gain exchanges that move a
/// medoid to a lower-indexed point. The result does not depend on `seed`; it is kept so
/// the call signature matches the other stochastic proxies and lands in score meta.
MedoidAssignment kmedoids(const Eigen::MatrixXd& X, std::size_t k, std::int64_t seed = 0);

// Mean Euclidean distance from every row to its medoid, computed on the synthetic set only.
ProxyScore mdm(const EmbeddingMatrix& X, std::size_t k, std::int64_t seed = 0);

// ---------------------------------------------------------------------------
// PAD

enum class PadClassifier { logistic, boosted_stumps };

struct PadConfig {
  PadClassifier classifier = PadClassifier::logistic;
  double holdout_fraction = 0.2;
  // logistic regression
  double l2 = 1.0;
  int max_iterations = 100;
  double tolerance = 1e-10;
  // boosted stumps
  int rounds = 100;
  double learning_rate = 0.1;
  int max_bins = 32;
};

nlohmann::json to_json(const PadConfig& cfg);
PadConfig pad_config_from_json(const nlohmann::json& j);

struct PadSplit {
  std::vector<std::size_t> train;    // indices into the stacked [Xs; Xr] matrix
  std::vector<std::size_t> holdout;
};

// Stratified split of n_syn synthetic and n_real real rows; per class
// round(holdout_fraction * n) rows (at least one) go to the holdout.
PadSplit pad_split(std::size_t n_syn, std::size_t n_real, double holdout_fraction, std::int64_t seed);

// Holdout misclassification rate of the configured classifier on a given split.
double pad_holdout_error(const Eigen::MatrixXd& X, const std::vector<int>& labels, const PadSplit& split,
                         const PadConfig& cfg);

// raw = 1 - 2 * holdout error, synthetic labelled 1 and real 0.
ProxyScore pad(const EmbeddingMatrix& Xs, const EmbeddingMatrix& Xr, const PadConfig& cfg, std::int64_t seed);

// ---------------------------------------------------------------------------
// MAUVE

struct MauveConfig {
  std::optional<std::size_t> num_bins;  // nullopt = max(2, (n+m)/20) capped at 128
  double scaling = 5.0;
  std::size_t grid_points = 101;
  double smoothing = 1e-10;
  int kmeans_iterations = 300;
};

nlohmann::json to_json(const MauveConfig& cfg);
MauveConfig mauve_config_from_json(const nlohmann::json& j);

std::size_t auto_mauve_bins(std::size_t total_points);

struct FrontierPoint {
  double x;  // exp(-c KL(Q || R))
  double y;  // exp(-c KL(P || R))
};

// Divergence frontier for histograms P (real) and Q (synthetic) over an interior grid
// lambda_i = i / (G + 1), bracketed by the extreme points (1, 0) and (0, 1).
std::vector<FrontierPoint> divergence_frontier(const std::vector<double>& P, const std::vector<double>& Q,
                                               double scaling, std::size_t grid_points);
// Trapezoid area under a frontier, clamped to [0, 1].
double frontier_area(const std::vector<FrontierPoint>& frontier);
// Smooths, renormalises and returns the frontier area.
double mauve_from_histograms(std::vector<double> P, std::vector<double> Q, const MauveConfig& cfg);

struct Quantization {
  std::vector<std::size_t> labels;
  Eigen::MatrixXd centroids;
};

// Lloyd's k-means with k-means++ seeding drawn from Rng(seed).
Quantization kmeans(const Eigen::MatrixXd& X, std::size_t k, std::int64_t seed, int max_iterations);

ProxyScore mauve(const EmbeddingMatrix& Xs, const EmbeddingMatrix& Xr, const MauveConfig& cfg,
                 std::int64_t seed);

// ---------------------------------------------------------------------------
// Hybrid

// Min-max normalises synque_scores across a candidate pool. A constant pool maps to 0.5.
std::map<std::string, double> minmax_normalize(const std::map<std::string, ProxyScore>& pool);

// alpha * lens + (1 - alpha) * mdm on already-normalised synque_scores.
ProxyScore hybrid(const ProxyScore& lens_normalized, const ProxyScore& mdm_normalized, double alpha);

// Normalises both pools, then blends per dataset.
std::map<std::string, ProxyScore> hybrid_pool(const std::map<std::string, ProxyScore>& lens,
                                              const std::map<std::string, ProxyScore>& mdm, double alpha);

}  // namespace synque
