#pragma once

#include "synque/ingest.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace synque {

enum class KernelFamily { linear, polynomial, rbf, laplacian, sigmoid };

std::string_view to_string(KernelFamily family);
KernelFamily kernel_family_from_string(std::string_view name);

/// Kernel used by MMD². Defaults to the cubic polynomial kernel with coef0 = 1 and
/// gamma = 1/d.
struct KernelSpec {
  KernelFamily family = KernelFamily::polynomial;
  int degree = 3;
  double coef0 = 1.0;
  std::optional<double> gamma;  // nullopt = auto (1/d)

  void validate() const;
  double resolved_gamma(Eigen::Index dim) const;
  // Short human label, e.g. "polynomial(degree=3,coef0=1,gamma=auto)".
  std::string describe() const;
};

nlohmann::json to_json(const KernelSpec& spec);
// Rejects unknown keys and invalid values with ConfigError.
KernelSpec kernel_spec_from_json(const nlohmann::json& j);

// k(x, y) for a single pair; gamma must already be resolved.
double kernel_value(const KernelSpec& spec, double gamma, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                    const Eigen::Ref<const Eigen::RowVectorXd>& y);

// Entry (i, j) = k(X_i, Y_j). Throws std::invalid_argument on dimension mismatch and
// std::domain_error on a non-finite entry.
Eigen::MatrixXd gram(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const KernelSpec& spec);
Eigen::MatrixXd gram(const EmbeddingMatrix& X, const EmbeddingMatrix& Y, const KernelSpec& spec);

}  // namespace synque
