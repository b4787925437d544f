#include "synque/repmetrics.hpp"

#include <fmt/format.h>

#include <stdexcept>

namespace synque {

double mmd2_raw(const Eigen::MatrixXd& Xs, const Eigen::MatrixXd& Xr, const KernelSpec& spec) {
  if (Xs.rows() == 0 || Xr.rows() == 0) throw std::invalid_argument("mmd2: empty input");
  if (Xs.cols() != Xr.cols())
    throw std::invalid_argument(fmt::format("mmd2: dimension mismatch ({} vs {})", Xs.cols(), Xr.cols()));
  const double real_term = gram(Xr, Xr, spec).mean();
  const double syn_term = gram(Xs, Xs, spec).mean();
  const double cross_term = gram(Xs, Xr, spec).mean();
  return real_term + syn_term - 2.0 * cross_term;
}

ProxyScore mmd2(const EmbeddingMatrix& Xs, const EmbeddingMatrix& Xr, const KernelSpec& spec) {
  const double raw = mmd2_raw(Xs.data(), Xr.data(), spec);
  return make_score(Metric::mmd2, raw,
                    {{"kernel", spec.describe()},
                     {"n_s", std::to_string(Xs.rows())},
                     {"m_r", std::to_string(Xr.rows())}});
}

}  // namespace synque
