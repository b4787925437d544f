#include "synque/errors.hpp"
#include "synque/kernels.hpp"
#include "synque/scenariogen.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace synque;

namespace {

KernelSpec family(KernelFamily f) {
  KernelSpec k;
  k.family = f;
  return k;
}

const KernelFamily kAll[] = {KernelFamily::linear, KernelFamily::polynomial, KernelFamily::rbf,
                             KernelFamily::laplacian, KernelFamily::sigmoid};

}  // namespace

TEST_CASE("linear gram of orthonormal rows is the identity") {
  const auto X = testutil::matrix({{1, 0}, {0, 1}});
  const auto G = gram(X, X, family(KernelFamily::linear));
  CHECK(G(0, 0) == 1.0);
  CHECK(G(0, 1) == 0.0);
  CHECK(G(1, 0) == 0.0);
  CHECK(G(1, 1) == 1.0);
}

TEST_CASE("cubic polynomial on scalars") {
  KernelSpec k;
  k.gamma = 1.0;
  const auto x = testutil::matrix({{1}});
  CHECK(gram(x, x, k)(0, 0) == 8.0);
}

TEST_CASE("rbf and laplacian are exactly one at zero distance") {
  KernelSpec k = family(KernelFamily::rbf);
  k.gamma = 1.0;
  const auto X = testutil::wrap(testutil::gaussian(5, 3, 1));
  const auto G = gram(X, X, k);
  for (int i = 0; i < 5; ++i) CHECK(G(i, i) == 1.0);
  const auto L = gram(X, X, family(KernelFamily::laplacian));
  for (int i = 0; i < 5; ++i) CHECK(L(i, i) == 1.0);
}

TEST_CASE("family definitions against hand formulas") {
  const auto X = testutil::matrix({{1, 2}});
  const auto Y = testutil::matrix({{0.5, -1}});
  const double dotxy = 1 * 0.5 + 2 * -1;
  const double g = 0.5;  // auto gamma = 1/d
  CHECK(gram(X, Y, family(KernelFamily::linear))(0, 0) == doctest::Approx(dotxy).epsilon(1e-15));
  CHECK(gram(X, Y, family(KernelFamily::polynomial))(0, 0) == doctest::Approx(std::pow(g * dotxy + 1, 3)));
  CHECK(gram(X, Y, family(KernelFamily::rbf))(0, 0) == doctest::Approx(std::exp(-g * (0.25 + 9))));
  CHECK(gram(X, Y, family(KernelFamily::laplacian))(0, 0) == doctest::Approx(std::exp(-g * (0.5 + 3))));
  CHECK(gram(X, Y, family(KernelFamily::sigmoid))(0, 0) == doctest::Approx(std::tanh(g * dotxy + 1)));
}

TEST_CASE("gram(X, Y) is the transpose of gram(Y, X) for every family") {
  const auto X = testutil::wrap(testutil::gaussian(6, 4, 2));
  const auto Y = testutil::wrap(testutil::gaussian(9, 4, 3));
  for (auto f : kAll) {
    const auto A = gram(X, Y, family(f));
    const auto B = gram(Y, X, family(f));
    CHECK((A - B.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("diagonal equals k(x, x)") {
  const auto X = testutil::wrap(testutil::gaussian(7, 3, 4));
  for (auto f : kAll) {
    const auto spec = family(f);
    const auto G = gram(X, X, spec);
    for (Eigen::Index i = 0; i < 7; ++i)
      CHECK(G(i, i) == doctest::Approx(kernel_value(spec, spec.resolved_gamma(3), X.data().row(i), X.data().row(i))));
  }
}

TEST_CASE("all families finite on scenario fixtures") {
  ScenarioSpec spec;
  spec.n_real = 200;
  spec.candidates = {{"far", ShiftKind::mean_shift, 4.0, 200}, {"wide", ShiftKind::scale, 2.0, 200}};
  const auto sc = generate(spec);
  for (auto f : kAll)
    for (const auto& c : sc.candidates) CHECK(gram(c.embeddings, sc.real.embeddings, family(f)).allFinite());
}

TEST_CASE("errors: dimension mismatch, non-finite output, invalid spec") {
  const auto X = testutil::matrix({{1, 2}});
  const auto Y = testutil::matrix({{1, 2, 3}});
  CHECK_THROWS_AS(gram(X, Y, KernelSpec{}), std::invalid_argument);
  KernelSpec huge;
  huge.degree = 400;
  huge.gamma = 1e3;
  CHECK_THROWS_AS(gram(X, X, huge), std::domain_error);
  KernelSpec bad;
  bad.degree = 0;
  CHECK_THROWS(bad.validate());
  bad = KernelSpec{};
  bad.gamma = -1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("kernel spec json") {
  const auto j = nlohmann::json::parse(R"({"family":"polynomial","degree":3,"coef0":1.0,"gamma":"auto"})");
  const auto k = kernel_spec_from_json(j);
  CHECK(k.family == KernelFamily::polynomial);
  CHECK(k.degree == 3);
  CHECK(!k.gamma.has_value());
  CHECK(kernel_spec_from_json(to_json(k)).describe() == k.describe());
  CHECK(k.resolved_gamma(8) == 0.125);
  CHECK_THROWS_AS(kernel_spec_from_json(nlohmann::json::parse(R"({"family":"poly"})")), ConfigError);
  CHECK_THROWS_AS(kernel_spec_from_json(nlohmann::json::parse(R"({"family":"rbf","sigma":1})")), ConfigError);
  const auto lap = kernel_spec_from_json(nlohmann::json::parse(R"({"family":"laplacian","gamma":0.5})"));
  CHECK(lap.family == KernelFamily::laplacian);
  CHECK(*lap.gamma == 0.5);
}
