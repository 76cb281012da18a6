#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "formfactor/metrics.hpp"
#include "formfactor/radam.hpp"
#include "test_util.hpp"

namespace ff = formfactor;

namespace {

// Scalar RAdam transcribed from the published algorithm.
struct ScalarRAdam {
  double lr, b1, b2, eps, threshold;
  bool rectify;
  double m = 0, v = 0;
  int t = 0;

  double step(double theta, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double m_hat = m / (1 - std::pow(b1, t));
    const double rho_inf = 2 / (1 - b2) - 1;
    const double rho = rho_inf - 2 * t * std::pow(b2, t) / (1 - std::pow(b2, t));
    if (rho > threshold) {
      const double v_hat_sqrt = std::sqrt(v / (1 - std::pow(b2, t)));
      const double r = rectify ? std::sqrt((rho - 4) * (rho - 2) * rho_inf / ((rho_inf - 4) * (rho_inf - 2) * rho)) : 1.0;
      return theta - lr * r * m_hat / (v_hat_sqrt + eps);
    }
    return theta - lr * m_hat;
  }
};

ff::ScorerParams<double> tiny_params(std::uint64_t seed) {
  ff::ScorerDims dims{3, 2, 3};
  return ff::init_params<double>(seed, 4, 2, dims);
}

ff::ScorerParams<double> random_like(const ff::ScorerParams<double>& p, std::mt19937_64& g, double scale) {
  auto out = p;
  std::normal_distribution<double> n(0, scale);
  ff::ScorerParams<double>::visit(out, [&](std::string_view, ff::Matrix<double>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(g);
  });
  return out;
}

void check_against_scalar(const ff::RAdamOptions& opt, int steps) {
  std::mt19937_64 g(99);
  auto params = tiny_params(5);
  auto state = ff::OptimizerState<double>::for_params(params);
  // One scalar oracle per entry of every tensor, in visit order.
  std::vector<ScalarRAdam> oracles;
  std::vector<double> thetas;
  ff::ScorerParams<double>::visit(params, [&](std::string_view, const ff::Matrix<double>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      oracles.push_back({opt.learning_rate, opt.beta1, opt.beta2, opt.epsilon, opt.threshold, opt.rectify});
      thetas.push_back(m.data()[i]);
    }
  });
  for (int s = 0; s < steps; ++s) {
    // Gradient scale varies so v and m do not stay proportional.
    auto grad = random_like(params, g, s % 3 == 0 ? 1.0 : 0.01);
    ff::radam_step(params, grad, state, opt);
    std::size_t k = 0;
    ff::ScorerParams<double>::visit(grad, [&](std::string_view, const ff::Matrix<double>& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i, ++k) thetas[k] = oracles[k].step(thetas[k], m.data()[i]);
    });
    k = 0;
    ff::ScorerParams<double>::visit(params, [&](std::string_view name, const ff::Matrix<double>& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i, ++k)
        ASSERT_NEAR(m.data()[i], thetas[k], 1e-10) << name << " step " << s + 1;
    });
  }
  EXPECT_EQ(state.step, static_cast<std::uint64_t>(steps));
}

}  // namespace

TEST(RAdam, MatchesScalarOracleOverTenSteps) {
  ff::RAdamOptions opt;
  check_against_scalar(opt, 10);
  opt.learning_rate = 0.05;
  check_against_scalar(opt, 10);
}

TEST(RAdam, AdaptiveStepEngagesAfterWarmup) {
  ff::RAdamOptions opt;
  EXPECT_FALSE(ff::radam_coefficients(1, opt).adaptive);
  EXPECT_FALSE(ff::radam_coefficients(4, opt).adaptive);  // rho_4 ~ 3.997
  EXPECT_TRUE(ff::radam_coefficients(5, opt).adaptive);   // rho_5 ~ 4.996
  check_against_scalar(opt, 12);
}

TEST(RAdam, DegeneratesToAdam) {
  ff::RAdamOptions opt;
  opt.rectify = false;
  opt.threshold = -std::numeric_limits<double>::infinity();
  // Straight bias-corrected Adam.
  std::mt19937_64 g(7);
  auto params = tiny_params(3);
  auto state = ff::OptimizerState<double>::for_params(params);
  double theta = params.query(0, 0), m = 0, v = 0;
  for (int t = 1; t <= 20; ++t) {
    auto grad = random_like(params, g, 0.5);
    ff::radam_step(params, grad, state, opt);
    const double gq = grad.query(0, 0);
    m = 0.9 * m + 0.1 * gq;
    v = 0.999 * v + 0.001 * gq * gq;
    theta -= 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    ASSERT_NEAR(params.query(0, 0), theta, 1e-12);
  }
}

TEST(RAdam, ZeroGradientLeavesParametersUnchanged) {
  auto params = tiny_params(1);
  const auto before = params;
  auto state = ff::OptimizerState<double>::for_params(params);
  const auto zero = ff::ScorerParams<double>::zeros(params.dims, params.vocab_size(), params.num_fields());
  for (int t = 0; t < 20; ++t) ff::radam_step(params, zero, state, {});
  EXPECT_TRUE(params == before);
}

TEST(RAdam, StepCountAndShapes) {
  auto params = tiny_params(1);
  auto state = ff::OptimizerState<double>::for_params(params);
  std::mt19937_64 g(1);
  for (int t = 0; t < 3; ++t) ff::radam_step(params, random_like(params, g, 1), state, {});
  EXPECT_EQ(state.step, 3u);
  ff::ScorerParams<double>::visit_pair(params, state.first_moment, [](std::string_view, const auto& a, const auto& b) {
    EXPECT_EQ(a.rows(), b.rows());
    EXPECT_EQ(a.cols(), b.cols());
  });
  ff::ScorerParams<double>::visit_pair(params, state.second_moment, [](std::string_view, const auto& a, const auto& b) {
    EXPECT_EQ(a.rows(), b.rows());
    EXPECT_EQ(a.cols(), b.cols());
  });
}

TEST(RAdam, RejectsNonFiniteAndMismatchedGradients) {
  auto params = tiny_params(1);
  auto state = ff::OptimizerState<double>::for_params(params);
  auto bad = ff::ScorerParams<double>::zeros(params.dims, params.vocab_size(), params.num_fields());
  bad.key(0, 0) = std::nan("");
  EXPECT_THROW(ff::radam_step(params, bad, state, {}), ff::NumericError);
  auto wrong = ff::ScorerParams<double>::zeros(params.dims, params.vocab_size() + 1, params.num_fields());
  EXPECT_THROW(ff::radam_step(params, wrong, state, {}), ff::ShapeError);
  EXPECT_EQ(state.step, 0u);
}

// ---------------------------------------------------------------------------

namespace {

double auc_pairs(const std::vector<ff::ScoreLabel>& d) {
  double wins = 0;
  double pairs = 0;
  for (const auto& p : d)
    if (p.positive)
      for (const auto& n : d)
        if (!n.positive) {
          pairs += 1;
          wins += p.score > n.score ? 1.0 : (p.score == n.score ? 0.5 : 0.0);
        }
  return wins / pairs;
}

}  // namespace

TEST(RocAuc, TrivialCases) {
  EXPECT_DOUBLE_EQ(ff::roc_auc({{0.1, false}, {0.2, false}, {0.8, true}, {0.9, true}}), 1.0);
  EXPECT_DOUBLE_EQ(ff::roc_auc({{0.5, false}, {0.5, true}, {0.5, true}}), 0.5);
  EXPECT_THROW(ff::roc_auc({{0.5, true}, {0.6, true}}), ff::DataError);
  EXPECT_THROW(ff::roc_auc({}), ff::DataError);
}

TEST(RocAuc, MatchesQuadraticPairCountExactly) {
  std::mt19937_64 g(2024);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ff::ScoreLabel> d;
    const int n = 2 + static_cast<int>(g() % 120);
    for (int i = 0; i < n; ++i) d.push_back({static_cast<double>(g() % 17) / 16.0, (g() & 1) != 0});
    d[0].positive = true;
    d[1].positive = false;
    EXPECT_DOUBLE_EQ(ff::roc_auc(d), auc_pairs(d)) << "trial " << trial;
  }
}

TEST(MedianOverSeeds, Examples) {
  auto a = ff::median_over_seeds({0.2});
  EXPECT_DOUBLE_EQ(a.median, 0.2);
  EXPECT_DOUBLE_EQ(a.min, 0.2);
  EXPECT_DOUBLE_EQ(a.max, 0.2);
  auto b = ff::median_over_seeds({0.1, 0.3});
  EXPECT_DOUBLE_EQ(b.median, 0.2);
  EXPECT_DOUBLE_EQ(b.min, 0.1);
  EXPECT_DOUBLE_EQ(b.max, 0.3);
  EXPECT_THROW(ff::median_over_seeds({}), ff::DataError);
}

TEST(MedianOverSeeds, SortRecount) {
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int n : {10, 11}) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(u(g));
    auto s = ff::median_over_seeds(v);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const double expect = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2;
    EXPECT_DOUBLE_EQ(s.median, expect);
    EXPECT_DOUBLE_EQ(s.min, sorted.front());
    EXPECT_DOUBLE_EQ(s.max, sorted.back());
  }
}
