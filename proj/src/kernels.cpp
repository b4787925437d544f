#include "synque/kernels.hpp"

#include "synque/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace synque {

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::linear: return "linear";
    case KernelFamily::polynomial: return "polynomial";
    case KernelFamily::rbf: return "rbf";
    case KernelFamily::laplacian: return "laplacian";
    case KernelFamily::sigmoid: return "sigmoid";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(std::string_view name) {
  for (auto f : {KernelFamily::linear, KernelFamily::polynomial, KernelFamily::rbf,
                 KernelFamily::laplacian, KernelFamily::sigmoid})
    if (to_string(f) == name) return f;
  throw ConfigError(fmt::format(
      "unknown kernel family '{}' (expected linear, polynomial, rbf, laplacian or sigmoid)", name));
}

void KernelSpec::validate() const {
  if (degree < 1) throw ConfigError(fmt::format("kernel degree must be >= 1, got {}", degree));
  if (gamma && !(*gamma > 0.0 && std::isfinite(*gamma)))
    throw ConfigError(fmt::format("kernel gamma must be positive, got {}", *gamma));
  if (!std::isfinite(coef0)) throw ConfigError("kernel coef0 must be finite");
}

double KernelSpec::resolved_gamma(Eigen::Index dim) const {
  return gamma ? *gamma : 1.0 / static_cast<double>(dim);
}

std::string KernelSpec::describe() const {
  const std::string g = gamma ? fmt::format("{}", *gamma) : "auto";
  switch (family) {
    case KernelFamily::linear: return "linear";
    case KernelFamily::polynomial:
      return fmt::format("polynomial(degree={},coef0={},gamma={})", degree, coef0, g);
    case KernelFamily::sigmoid: return fmt::format("sigmoid(coef0={},gamma={})", coef0, g);
    default: return fmt::format("{}(gamma={})", to_string(family), g);
  }
}

nlohmann::json to_json(const KernelSpec& spec) {
  nlohmann::json j{{"family", std::string(to_string(spec.family))},
                   {"degree", spec.degree},
                   {"coef0", spec.coef0}};
  if (spec.gamma)
    j["gamma"] = *spec.gamma;
  else
    j["gamma"] = "auto";
  return j;
}

KernelSpec kernel_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("kernel spec must be a JSON object");
  KernelSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "family") {
      spec.family = kernel_family_from_string(value.get<std::string>());
    } else if (key == "degree") {
      spec.degree = value.get<int>();
    } else if (key == "coef0") {
      spec.coef0 = value.get<double>();
    } else if (key == "gamma") {
      if (value.is_string()) {
        if (value.get<std::string>() != "auto")
          throw ConfigError("kernel gamma must be a positive number or \"auto\"");
        spec.gamma.reset();
      } else {
        spec.gamma = value.get<double>();
      }
    } else {
      throw ConfigError(fmt::format("unknown kernel key '{}'", key));
    }
  }
  spec.validate();
  return spec;
}

double kernel_value(const KernelSpec& spec, double gamma, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                    const Eigen::Ref<const Eigen::RowVectorXd>& y) {
  switch (spec.family) {
    case KernelFamily::linear: return x.dot(y);
    case KernelFamily::polynomial: return std::pow(gamma * x.dot(y) + spec.coef0, spec.degree);
    case KernelFamily::rbf: return std::exp(-gamma * (x - y).squaredNorm());
    case KernelFamily::laplacian: return std::exp(-gamma * (x - y).lpNorm<1>());
    case KernelFamily::sigmoid: return std::tanh(gamma * x.dot(y) + spec.coef0);
  }
  return 0.0;
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const KernelSpec& spec) {
  if (X.cols() != Y.cols())
    throw std::invalid_argument(
        fmt::format("gram: dimension mismatch ({} vs {})", X.cols(), Y.cols()));
  spec.validate();
  const double gamma = spec.resolved_gamma(X.cols());
  Eigen::MatrixXd K(X.rows(), Y.rows());
  switch (spec.family) {
    case KernelFamily::linear:
      K.noalias() = X * Y.transpose();
      break;
    case KernelFamily::polynomial:
      K.noalias() = X * Y.transpose();
      K = ((gamma * K).array() + spec.coef0).pow(spec.degree).matrix();
      break;
    case KernelFamily::sigmoid:
      K.noalias() = X * Y.transpose();
      K = ((gamma * K).array() + spec.coef0).tanh().matrix();
      break;
    case KernelFamily::rbf:
    case KernelFamily::laplacian:
      for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < Y.rows(); ++j) K(i, j) = kernel_value(spec, gamma, X.row(i), Y.row(j));
      break;
  }
  if (!K.allFinite()) throw std::domain_error("gram: kernel produced a non-finite entry");
  return K;
}

Eigen::MatrixXd gram(const EmbeddingMatrix& X, const EmbeddingMatrix& Y, const KernelSpec& spec) {
  return gram(X.data(), Y.data(), spec);
}

}  // namespace synque
