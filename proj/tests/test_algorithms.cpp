#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "c2eden/algorithms/baselines.hpp"
#include "c2eden/algorithms/c2eden_run.hpp"
#include "c2eden/algorithms/descent_check.hpp"
#include "c2eden/algorithms/run.hpp"
#include "c2eden/algorithms/schedule.hpp"
#include "c2eden/algorithms/stationarity.hpp"
#include "test_util.hpp"

using namespace c2eden;

namespace {

// f(x) = 1/2 ||x||^2 through a shard whose data term vanishes.
std::vector<ClientShard> half_norm_squared(Index d, std::size_t n = 1) {
  std::vector<ClientShard> out;
  for (std::size_t i = 0; i < n; ++i)
    out.emplace_back(FeatureMatrix::Zero(2, d), Vec::Zero(2), 1.0, Regularizer::L2, Loss::Squared);
  return out;
}

// Least squares with a prescribed spectrum: f(x) = 1/2 sum_j s_j (x_j - 1)^2.
std::vector<ClientShard> diagonal_quadratic(const std::vector<double>& spectrum) {
  const Index d = static_cast<Index>(spectrum.size());
  FeatureMatrix a = FeatureMatrix::Zero(d, d);
  Vec b(d);
  for (Index j = 0; j < d; ++j) {
    a(j, j) = std::sqrt(spectrum[static_cast<std::size_t>(j)] * static_cast<double>(d));
    b[j] = a(j, j);
  }
  return {ClientShard(a, b, 0.0, Regularizer::L2, Loss::Squared)};
}

RunConfig cfg_for(Method m, std::uint32_t K) {
  RunConfig c;
  c.method = m;
  c.K = K;
  c.grad_tol = 0.0;
  return c;
}

std::vector<ClientShard> toy_shards(std::uint32_t n, double lambda, Regularizer reg) {
  return partition(test::toy(), n, 1, lambda, reg);
}

}  // namespace

TEST(Tau, Examples) {
  for (std::int64_t d : {1, 3, 10}) {
    EXPECT_EQ(tau(d, d), 0);
    EXPECT_EQ(tau(2 * d, d), d);
    EXPECT_EQ(tau(3 * d - 1, d), d);
  }
  EXPECT_EQ(tau(2 * 10 + 3, 10), 10);
  EXPECT_THROW(tau(2, 3), Error);
  EXPECT_THROW(tau(5, 0), Error);
}

TEST(HExponent, Examples) {
  for (std::int64_t d : {1, 2, 7, 20}) {
    EXPECT_DOUBLE_EQ(h_exponent(d, d), 1.0);
    EXPECT_DOUBLE_EQ(h_exponent(2 * d, d), 1.0);
  }
  EXPECT_THROW(h_exponent(0, 3), Error);
}

TEST(HExponent, MonotoneWithinEpochsAndAcrossEpochStarts) {
  for (std::int64_t d = 1; d <= 20; ++d) {
    for (std::int64_t k = d; k < 50 * d; ++k)
      if ((k + 1) % d != 0) {
        EXPECT_LE(h_exponent(k, d), h_exponent(k + 1, d)) << "d=" << d << " k=" << k;
      }
    for (std::int64_t t = 1; t < 49; ++t) EXPECT_LE(h_exponent(t * d, d), h_exponent((t + 1) * d, d));
  }
}

TEST(HExponent, DropsAfterOddEpochs) {
  // The sequence is not monotone across an odd-to-even epoch boundary.
  for (std::int64_t d = 2; d <= 20; ++d) {
    EXPECT_DOUBLE_EQ(h_exponent(4 * d - 1, d), 2.0 * static_cast<double>(d));
    EXPECT_DOUBLE_EQ(h_exponent(4 * d, d), 1.0 + static_cast<double>(d));
    EXPECT_GT(h_exponent(4 * d - 1, d), h_exponent(4 * d, d));
  }
  for (std::int64_t k = 1; k < 200; ++k) EXPECT_LE(h_exponent(k, 1), h_exponent(k + 1, 1));  // d = 1 is fine
}

TEST(Gamma, Examples) {
  EXPECT_EQ(gamma_from(0.0, 0.0, 1.0), 0.0);
  EXPECT_EQ(gamma_from(0.0, 3.0, 1.0), 0.0);
  for (double M : {0.5, 2.0, 30.0})
    for (double c : {0.1, 1.0, 2.0}) {
      const double lam = -6.0 * std::pow(M, 2.0 / 3.0) * c;
      EXPECT_NEAR(gamma_from(0.0, lam, M), c * c * c / 3.0, 1e-12 * (1 + c * c * c));
    }
  EXPECT_NEAR(gamma_from(2.0, 1.0, 1.0), std::pow(2.0, 1.5) / (72.0 * std::sqrt(2.0)), 1e-16);
  EXPECT_THROW(gamma_from(1.0, 1.0, 0.0), Error);
}

TEST(Gamma, NonNegativeAndZeroExactlyAtSecondOrderPoints) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 1000; ++t) {
    const double g = std::abs(nd(rng)) * (t % 3 == 0 ? 0.0 : 1.0);
    const double l = nd(rng);
    const double v = gamma_from(g, l, 1.0 + std::abs(nd(rng)));
    EXPECT_GE(v, 0.0);
    EXPECT_EQ(v == 0.0, g == 0.0 && l >= 0.0);
  }
}

TEST(Stationarity, Report) {
  auto r = check_stationarity(1e-5, -1e-3, 1e-4, 1e-2, 17);
  EXPECT_TRUE(r.is_fosp);
  EXPECT_TRUE(r.is_sosp);
  EXPECT_EQ(*r.witness, 17);
  r = check_stationarity(1e-5, -1e-1, 1e-4, 1e-2, 17);
  EXPECT_TRUE(r.is_fosp);
  EXPECT_FALSE(r.is_sosp);
  EXPECT_FALSE(r.witness);
  EXPECT_FALSE(check_stationarity(1.0, 1.0, 1e-4, 1e-2).is_fosp);
}

TEST(LipschitzBound, DominatesObservedHessianVariation) {
  std::mt19937_64 rng(2);
  for (auto reg : {Regularizer::L2, Regularizer::SmoothNonconvex}) {
    const std::vector<ClientShard> shards{test::random_shard(rng, 40, 5, 0.5, reg),
                                          test::random_shard(rng, 40, 5, 0.5, reg)};
    const double L = hessian_lipschitz_bound(shards);
    for (int t = 0; t < 200; ++t) {
      const Vec x = test::random_vec(rng, 5, 2.0);
      const Vec y = x + test::random_vec(rng, 5, 0.05);
      const Eigen::MatrixXd diff = global_hessian(shards, x).dense() - global_hessian(shards, y).dense();
      EXPECT_LE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(diff).eigenvalues().cwiseAbs().maxCoeff(),
                L * (x - y).norm() * (1 + 1e-9));
    }
  }
  Dataset ds;
  ds.d = 2;
  ds.rows = {{{0, 3.0}, {1, 4.0}}, {{0, 1.0}}};
  ds.labels = {1, -1};
  EXPECT_NEAR(hessian_lipschitz_bound(ds, 0.0, Regularizer::L2), 125.0 / (6.0 * std::sqrt(3.0)), 1e-12);
  EXPECT_NEAR(hessian_lipschitz_bound(ds, 1.0, Regularizer::SmoothNonconvex),
              125.0 / (6.0 * std::sqrt(3.0)) + 4.67, 1e-12);
}

TEST(NonconvexThirdDerivative, ConstantBoundsTheSup) {
  double worst = 0.0;
  for (double x = -5; x <= 5; x += 1e-5) {
    const double q = 1 + x * x;
    worst = std::max(worst, std::abs(24 * x * (x * x - 1) / (q * q * q * q)));
  }
  EXPECT_LE(worst, kNonconvexThirdDerivMax);
  EXPECT_GT(worst, 4.66);
}

TEST(Gd, OneStepOnHalfNormSquared) {
  auto cfg = cfg_for(Method::GD, 5);
  cfg.eta = 1.0;
  cfg.x0 = Vec::Constant(3, 2.0);
  cfg.grad_tol = 1e-12;
  const auto t = run_gd(cfg, half_norm_squared(3));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.iterates[1].norm(), 0.0);
  EXPECT_TRUE(t.stopped_early);
}

TEST(Gd, SmallStepDecreasesValue) {
  const auto shards = toy_shards(3, 1e-3, Regularizer::SmoothNonconvex);
  auto cfg = cfg_for(Method::GD, 30);
  cfg.eta = 0.1;
  const auto t = run_gd(cfg, shards);
  for (std::size_t k = 1; k < t.rows.size(); ++k) EXPECT_LT(t.rows[k].f, t.rows[k - 1].f);
}

TEST(Gd, LedgerCounts) {
  const auto shards = toy_shards(4, 1e-3, Regularizer::L2);
  auto cfg = cfg_for(Method::GD, 25);
  const auto t = run_gd(cfg, shards);
  EXPECT_EQ(t.ledger.total().up_scalars, 25u * 4u * 10u);
  EXPECT_EQ(t.ledger.total().down_scalars, 25u * 10u);
  EXPECT_EQ(t.rows.back().up_scalars, 25u * 4u * 10u);
}

TEST(Gd, DivergenceIsFlagged) {
  auto cfg = cfg_for(Method::GD, 3000);
  cfg.eta = 3.0;  // x <- -2x
  cfg.x0 = Vec::Ones(2);
  const auto t = run_gd(cfg, half_norm_squared(2));
  EXPECT_TRUE(t.divergent);
  EXPECT_LT(t.rows.size(), 3001u);
}

TEST(Agd, ZeroMomentumIsGd) {
  const auto shards = toy_shards(2, 1e-3, Regularizer::SmoothNonconvex);
  auto cfg = cfg_for(Method::AGD, 40);
  cfg.beta = 0.0;
  cfg.eta = 0.5;
  EXPECT_EQ(trace_csv(run_agd(cfg, shards)), trace_csv(run_gd(cfg, shards)));
}

TEST(Agd, BeatsGdOnIllConditionedQuadratic) {
  const auto shards = diagonal_quadratic({1.0, 0.1, 0.01, 0.001});
  const double L = 1.0, mu = 0.001;
  auto gd = cfg_for(Method::GD, 20000);
  gd.eta = 1.0 / L;
  gd.grad_tol = 1e-8;
  auto agd = gd;
  agd.method = Method::AGD;
  agd.beta = (std::sqrt(L / mu) - 1) / (std::sqrt(L / mu) + 1);
  const auto rg = run_gd(gd, shards).rounds_to(1e-8);
  const auto ra = run_agd(agd, shards).rounds_to(1e-8);
  ASSERT_TRUE(rg && ra);
  EXPECT_LT(*ra, *rg);
}

TEST(Agd, RejectsBadMomentum) {
  auto cfg = cfg_for(Method::AGD, 5);
  cfg.beta = 1.0;
  EXPECT_THROW(run_agd(cfg, half_norm_squared(2)), Error);
}

TEST(Giant, SingleClientIsNewton) {
  const auto shards = toy_shards(1, 1e-2, Regularizer::L2);
  auto cfg = cfg_for(Method::GIANT, 2);
  cfg.warmup_gd_steps = 0;
  std::mt19937_64 rng(3);
  cfg.x0 = test::random_vec(rng, 10, 0.2);
  const auto t = run_giant(cfg, shards);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1].k, 2);
  const Vec newton = *cfg.x0 - solve_spd(global_hessian(shards, *cfg.x0), global_gradient(shards, *cfg.x0));
  EXPECT_LE((t.iterates[1] - newton).norm(), 1e-12);
}

TEST(Giant, IdenticalShardsGiveNewton) {
  const auto one = toy_shards(1, 1e-2, Regularizer::L2);
  const std::vector<ClientShard> many(5, one[0]);
  auto cfg = cfg_for(Method::GIANT, 2);
  cfg.warmup_gd_steps = 0;
  const auto t = run_giant(cfg, many);
  const Vec newton = -solve_spd(global_hessian(one, Vec::Zero(10)), global_gradient(one, Vec::Zero(10)));
  EXPECT_LE((t.iterates[1] - newton).norm(), 1e-12);
}

TEST(Giant, LedgerAndWarmup) {
  const auto shards = toy_shards(4, 1e-2, Regularizer::L2);
  auto cfg = cfg_for(Method::GIANT, 27);
  cfg.warmup_gd_steps = 5;
  cfg.eta = 0.5;
  const auto t = run_giant(cfg, shards);
  // 5 GD rounds, then 11 two-round iterations; the last odd round is unused.
  EXPECT_EQ(t.rows.back().k, 27);
  EXPECT_EQ(t.rows.size(), 1u + 5u + 11u);
  EXPECT_EQ(t.ledger.total().up_scalars, 27u * 4u * 10u);
  EXPECT_EQ(t.ledger.total().down_scalars, 27u * 10u);
}

TEST(Giant, IndefiniteLocalHessianNamesClient) {
  std::mt19937_64 rng(4);
  const std::vector<ClientShard> shards{test::random_shard(rng, 30, 3, 0.0, Regularizer::L2),
                                        test::random_shard(rng, 30, 3, 5.0, Regularizer::SmoothNonconvex)};
  auto cfg = cfg_for(Method::GIANT, 4);
  cfg.warmup_gd_steps = 0;
  cfg.x0 = Vec::Ones(3);
  try {
    run_giant(cfg, shards);
    FAIL() << "expected NotPositiveDefinite";
  } catch (const NotPositiveDefinite& e) {
    EXPECT_NE(std::string(e.what()).find("client 1"), std::string::npos) << e.what();
  }
}

TEST(Lcrn, SingleClientIsCubicNewton) {
  const auto shards = toy_shards(1, 1e-3, Regularizer::SmoothNonconvex);
  auto cfg = cfg_for(Method::LCRN, 6);
  cfg.M = 10.0;
  const auto t = run_lcrn(cfg, shards);
  Vec x = Vec::Zero(10);
  for (std::size_t k = 1; k < t.iterates.size(); ++k) {
    x = solve_cubic(CubicModel{global_gradient(shards, x), global_hessian(shards, x), 10.0, x}).y;
    EXPECT_LE((t.iterates[k] - x).norm(), 1e-12);
  }
}

TEST(Lcrn, IdenticalShardsAndLedger) {
  const auto one = toy_shards(1, 1e-3, Regularizer::L2);
  const std::vector<ClientShard> many(3, one[0]);
  auto cfg = cfg_for(Method::LCRN, 4);
  cfg.M = 1.0;
  const auto a = run_lcrn(cfg, one), b = run_lcrn(cfg, many);
  for (std::size_t k = 0; k < a.iterates.size(); ++k) EXPECT_LE((a.iterates[k] - b.iterates[k]).norm(), 1e-12);
  EXPECT_EQ(b.ledger.total().up_scalars, 4u * 3u * 10u);
  EXPECT_EQ(b.ledger.total().down_scalars, 4u * 10u);
  cfg.M = 0.0;
  EXPECT_THROW(run_lcrn(cfg, one), Error);
}

TEST(AllMethods, StationaryPointIsFixed) {
  // Least squares with zero labels is minimized at x = 0.
  std::mt19937_64 rng(5);
  FeatureMatrix a(12, 3);
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 3; ++j) a(i, j) = std::normal_distribution<double>()(rng);
  const std::vector<ClientShard> shards(2, ClientShard(a, Vec::Zero(12), 0.1, Regularizer::L2, Loss::Squared));
  for (Method m : {Method::C2EDEN, Method::NewtonC2EDEN, Method::GD, Method::AGD, Method::GIANT, Method::LCRN}) {
    auto cfg = cfg_for(m, 9);
    cfg.warmup_gd_steps = 2;
    const auto t = run_method(cfg, shards);
    for (const auto& x : t.iterates) EXPECT_EQ(x.norm(), 0.0) << to_string(m);
  }
}

TEST(C2eden, LedgerLawAndTraceShape) {
  const auto shards = toy_shards(4, 1e-3, Regularizer::L2);
  auto cfg = cfg_for(Method::C2EDEN, 60);
  const auto t = run_c2eden(cfg, shards);
  ASSERT_EQ(t.rows.size(), 61u);
  EXPECT_EQ(t.rows.back().up_scalars, 4u * 100u + 2u * 4u * 10u * 50u);
  EXPECT_EQ(t.rows.back().down_scalars, 10u * 50u);
  for (std::size_t k = 1; k < t.rows.size(); ++k) {
    EXPECT_EQ(t.rows[k].k, static_cast<std::int64_t>(k));
    EXPECT_GE(t.rows[k].up_scalars, t.rows[k - 1].up_scalars);
  }
  for (std::size_t k = 0; k <= 10; ++k) EXPECT_NEAR(t.rows[k].f, std::log(2.0), 4e-14);
}

TEST(C2eden, NewtonModeConvergesFastOnStronglyConvex) {
  const auto shards = toy_shards(2, 1e-2, Regularizer::L2);
  auto cfg = cfg_for(Method::NewtonC2EDEN, 80);
  cfg.grad_tol = 1e-12;
  const auto t = run_c2eden(cfg, shards);
  EXPECT_TRUE(t.stopped_early);
  EXPECT_LE(t.rows.back().grad_norm, 1e-12);
}

TEST(C2eden, NewtonSwitchLatches) {
  const auto shards = toy_shards(2, 1e-2, Regularizer::L2);
  struct Watch : protocol::RoundObserver {
    std::vector<std::pair<double, bool>> steps;
    void on_step(const protocol::StepEvent& e) override { steps.emplace_back(e.g.norm(), e.newton); }
  } watch;
  auto cfg = cfg_for(Method::C2EDEN, 60);
  cfg.M = 1.0;
  cfg.newton_switch_grad = 1e-2;
  run_c2eden(cfg, shards, &watch);
  bool seen = false;
  for (const auto& [g, newton] : watch.steps) {
    if (g <= 1e-2) seen = true;
    EXPECT_EQ(newton, seen);
  }
  EXPECT_TRUE(seen);
}

TEST(C2eden, RejectsShortRuns) {
  const auto shards = toy_shards(2, 1e-2, Regularizer::L2);
  EXPECT_THROW(run_c2eden(cfg_for(Method::C2EDEN, 10), shards), Error);
  EXPECT_THROW(run_c2eden(cfg_for(Method::GD, 20), shards), Error);  // wrong method
}

TEST(DescentCheck, QuadraticWithZeroLipschitzAndNegativeControl) {
  std::mt19937_64 rng(6);
  FeatureMatrix a(30, 4);
  for (Index i = 0; i < 30; ++i)
    for (Index j = 0; j < 4; ++j) a(i, j) = std::normal_distribution<double>()(rng);
  const std::vector<ClientShard> shards{
      ClientShard(a, test::random_vec(rng, 30), 0.1, Regularizer::L2, Loss::Squared)};
  auto cfg = cfg_for(Method::C2EDEN, 20);
  cfg.M = 1.0;
  const auto t = run_c2eden(cfg, shards);
  EXPECT_EQ(hessian_lipschitz_bound(shards), 0.0);
  const auto checks = check_descent_inequality(t.iterates, 4, 0.0, 1.0, shards);
  ASSERT_EQ(checks.size(), 16u);
  for (const auto& c : checks) EXPECT_TRUE(c.ok) << "k=" << c.k;

  auto bad = t.iterates;
  bad[6] = bad[5] + 10.0 * (bad[6] - bad[5]);  // overshoot one step
  const auto broken = check_descent_inequality(bad, 4, 0.0, 1.0, shards);
  EXPECT_FALSE(broken[1].ok);
}

TEST(AverageBound, HoldsOnSmallRun) {
  const auto shards = toy_shards(2, 1e-3, Regularizer::SmoothNonconvex);
  const double L = hessian_lipschitz_bound(shards);
  auto cfg = cfg_for(Method::C2EDEN, 60);
  cfg.M = 12.0 * 10 * L;
  const auto t = run_c2eden(cfg, shards);
  const auto r = check_average_bound(t.iterates, 10, cfg.M, shards);
  EXPECT_TRUE(r.ok) << r.min_gamma << " vs " << r.bound;
}

TEST(Contraction, ChecksProductRule) {
  const std::vector<double> g{1e-1, 1e-1, 1e-2, 1e-3, 1e-6, 1e-9};
  const auto c = check_contraction(g, 1, 0.0, 1.0, std::sqrt(3.0), 1, 5);
  ASSERT_EQ(c.size(), 4u);
  for (const auto& r : c) EXPECT_TRUE(r.ok) << r.k;
  const std::vector<double> slow{1e-1, 1e-1, 9e-2, 8e-2};
  EXPECT_FALSE(check_contraction(slow, 1, 0.0, 1.0, std::sqrt(3.0), 1, 3)[0].ok);
}
