#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "treeshape/registration.hpp"

using namespace treeshape;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

SrvfTree random_srvft(std::mt19937_64& rng, int laterals) {
  return tree_to_srvft(fixtures::random_root(rng, laterals));
}

std::pair<SrvfTree, SrvfTree> random_augmented_pair(std::mt19937_64& rng, int na, int nb) {
  auto [a, b] = augment_pair(fixtures::random_root(rng, na, "a"), fixtures::random_root(rng, nb, "b"));
  return {tree_to_srvft(a), tree_to_srvft(b)};
}

SrvfTree rotated(const SrvfTree& q, const Eigen::Matrix2d& o) {
  SrvfTree out = q;
  out.main = rotate(q.main, o);
  for (auto& l : out.laterals) l.q = rotate(l.q, o);
  return out;
}

Srvf constant_srvf(int n, const Eigen::Vector2d& v) {
  Srvf q{Eigen::Matrix2Xd(2, n)};
  q.samples.colwise() = v;
  return q;
}

/// q of the straight unit segment traversed with speed 2t.
Srvf quadratic_line(int n) {
  Srvf q{Eigen::Matrix2Xd::Zero(2, n)};
  for (int i = 0; i < n; ++i) q.samples(0, i) = std::sqrt(2.0 * i / (n - 1));
  return q;
}

double brute_force_assignment(const Eigen::MatrixXd& c) {
  std::vector<int> p(static_cast<std::size_t>(c.rows()));
  std::iota(p.begin(), p.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (Eigen::Index k = 0; k < c.rows(); ++k) s += c(k, p[static_cast<std::size_t>(k)]);
    best = std::min(best, s);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

}  // namespace

// --- rotation ---------------------------------------------------------------

TEST(OptimalRotation, RecoversThirtyDegrees) {
  std::mt19937_64 rng(21);
  const auto a = random_srvft(rng, 3);
  const auto b = rotated(a, rotation_matrix(30 * kDeg));
  const auto est = optimal_rotation(a, b, {}, Weights{});
  EXPECT_FALSE(est.degenerate);
  EXPECT_NEAR(std::atan2(est.rotation(1, 0), est.rotation(0, 0)), -30 * kDeg, 1e-6);
  EXPECT_NEAR(est.rotation.determinant(), 1.0, 1e-12);
}

TEST(OptimalRotation, IdentityForEqualTrees) {
  std::mt19937_64 rng(22);
  const auto a = random_srvft(rng, 2);
  const auto est = optimal_rotation(a, a, {}, Weights{});
  EXPECT_LT((est.rotation - Eigen::Matrix2d::Identity()).norm(), 1e-12);
}

TEST(OptimalRotation, StraightLineClosedForm) {
  for (double theta : {-2.5, -1.0, 0.3, 1.2, 3.0}) {
    SrvfTree a, b;
    a.main = constant_srvf(100, {1.0, 0.0});
    b.main = constant_srvf(100, {std::cos(theta), std::sin(theta)});
    const auto est = optimal_rotation(a, b, {}, Weights{});
    EXPECT_NEAR(std::remainder(std::atan2(est.rotation(1, 0), est.rotation(0, 0)) + theta, 2 * std::numbers::pi), 0.0,
                1e-12);
  }
}

TEST(OptimalRotation, DegenerateFlagged) {
  SrvfTree a, b;
  a.main = Srvf::zero(20);
  b.main = Srvf::zero(20);
  const auto est = optimal_rotation(a, b, {}, Weights{});
  EXPECT_TRUE(est.degenerate);
  EXPECT_EQ(est.rotation, Eigen::Matrix2d::Identity());
}

TEST(OptimalRotation, BeatsAnyOtherAngle) {
  std::mt19937_64 rng(23);
  const Weights w{};
  for (int trial = 0; trial < 10; ++trial) {
    const auto [a, b] = random_augmented_pair(rng, 2, 3);
    const auto est = optimal_rotation(a, b, {}, w);
    auto cost = [&](const Eigen::Matrix2d& o) {
      Registration r = Registration::identity(a.main.size(), a.laterals.size());
      r.rotation = o;
      return preshape_dissimilarity_sq(a, apply_registration(b, r), w);
    };
    const double best = cost(est.rotation);
    for (int k = 0; k < 360; ++k) EXPECT_LE(best, cost(rotation_matrix(k * kDeg)) + 1e-12);
  }
}

// --- reparameterization -----------------------------------------------------

TEST(Reparam, EqualCurvesGiveIdentity) {
  std::mt19937_64 rng(24);
  const auto q = to_srvf(fixtures::random_branch(rng), 100);
  const auto g = optimal_reparam_main(q, q);
  EXPECT_TRUE(g.is_identity(1.0 / 100));
  EXPECT_NEAR(l2_dist_sq(q, reparameterize(q, g)), 0.0, 1e-20);
}

TEST(Reparam, RecoversSquareWithinGrid) {
  // q1 traversed at speed 2t, q2 at unit speed: (q2 o gamma) sqrt(gamma') = q1
  // for gamma = t^2.
  const int n = 100;
  const auto g = optimal_reparam_main(quadratic_line(n), constant_srvf(n, {1, 0}), 5);
  for (int i = 0; i < n; ++i) {
    const double t = double(i) / (n - 1);
    EXPECT_NEAR(g.values[static_cast<std::size_t>(i)], t * t, 2.0 / n) << "t=" << t;
  }
}

TEST(Reparam, RecoversSquareRootWithinGrid) {
  // Roles swapped: q1 unit speed, q2 at speed 2t gives gamma = sqrt(t). The
  // infinite slope at 0 is outside the slope band, so only t >= 0.2 is checked.
  const int n = 100;
  const auto g = optimal_reparam_main(constant_srvf(n, {1, 0}), quadratic_line(n), 5);
  for (int i = 20; i < n; ++i) {
    const double t = double(i) / (n - 1);
    EXPECT_NEAR(g.values[static_cast<std::size_t>(i)], std::sqrt(t), 2.0 / n) << "t=" << t;
  }
}

TEST(Reparam, DefaultSlopeBandErrorFloor) {
  // With slopes >= 1/3, gamma(t) >= t/3, which misses t^2 by up to 1/36.
  const int n = 100;
  const auto g = optimal_reparam_main(quadratic_line(n), constant_srvf(n, {1, 0}));
  for (int i = 0; i < n; ++i) {
    const double t = double(i) / (n - 1);
    EXPECT_GE(g.values[static_cast<std::size_t>(i)], t / 3 - 1e-12);
    EXPECT_NEAR(g.values[static_cast<std::size_t>(i)], t * t, 1.0 / 36 + 2.0 / n);
  }
}

TEST(Reparam, NeverWorseThanIdentity) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 100; ++trial) {
    const auto q1 = to_srvf(fixtures::random_branch(rng), 100);
    const auto q2 = to_srvf(fixtures::random_branch(rng), 100);
    const auto g = optimal_reparam_main(q1, q2);
    EXPECT_LE(l2_dist_sq(q1, reparameterize(q2, g)), l2_dist_sq(q1, q2));
    EXPECT_EQ(g.values.front(), 0.0);
    EXPECT_EQ(g.values.back(), 1.0);
    EXPECT_TRUE(std::is_sorted(g.values.begin(), g.values.end()));
  }
}

TEST(Gamma, InverseAndDerivative) {
  const int n = 101;
  Gamma g;
  for (int i = 0; i < n; ++i) g.values.push_back(std::pow(double(i) / (n - 1), 2));
  EXPECT_NEAR(g.inverse(0.25), 0.5, 1e-12);
  EXPECT_NEAR(g(0.5), 0.25, 1e-12);
  for (double s : {0.0, 0.1, 0.37, 0.81, 1.0}) EXPECT_NEAR(g(g.inverse(s)), s, 1e-12);
  const auto d = g.derivative();
  for (int i = 1; i + 1 < n; ++i) EXPECT_NEAR(d[static_cast<std::size_t>(i)], 2.0 * i / (n - 1), 1e-12);
  EXPECT_TRUE(Gamma::identity(7).is_identity());
  EXPECT_FALSE(g.is_identity(1e-3));
}

// --- group action -----------------------------------------------------------

TEST(ApplyRegistration, IdentityLeavesTreeUnchanged) {
  std::mt19937_64 rng(26);
  const auto b = random_srvft(rng, 3);
  const auto out = apply_registration(b, Registration::identity(b.main.size(), 3));
  EXPECT_EQ(out.main.samples, b.main.samples);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(out.laterals[k].q.samples, b.laterals[k].q.samples);
    EXPECT_EQ(out.laterals[k].s, b.laterals[k].s);
  }
}

TEST(ApplyRegistration, RotationThenInverse) {
  std::mt19937_64 rng(27);
  const auto b = random_srvft(rng, 3);
  Registration r = Registration::identity(b.main.size(), 3);
  r.rotation = rotation_matrix(0.7);
  const auto once = apply_registration(b, r);
  for (std::size_t k = 0; k < 3; ++k)
    EXPECT_NEAR(l2_norm_sq(once.laterals[k].q), l2_norm_sq(b.laterals[k].q), 1e-12);
  EXPECT_NEAR(l2_norm_sq(once.main), l2_norm_sq(b.main), 1e-12);
  r.rotation = rotation_matrix(-0.7);
  const auto back = apply_registration(once, r);
  EXPECT_LT((back.main.samples - b.main.samples).cwiseAbs().maxCoeff(), 1e-9);
  for (std::size_t k = 0; k < 3; ++k)
    EXPECT_LT((back.laterals[k].q.samples - b.laterals[k].q.samples).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ApplyRegistration, AttachmentRemap) {
  SrvfTree b;
  b.main = constant_srvf(101, {1, 0});
  b.laterals.push_back({constant_srvf(50, {0, 1}), 0.25});
  Registration r = Registration::identity(101, 1);
  for (int i = 0; i < 101; ++i) r.gamma.values[static_cast<std::size_t>(i)] = std::pow(i / 100.0, 2);
  EXPECT_NEAR(apply_registration(b, r).laterals[0].s, 0.5, 1e-12);
  EXPECT_EQ(apply_registration(b, r, false).laterals[0].s, 0.25);
}

TEST(ApplyRegistration, AssignmentReorders) {
  std::mt19937_64 rng(28);
  const auto b = random_srvft(rng, 3);
  Registration r = Registration::identity(b.main.size(), 3);
  r.assignment = {2, 0, 1};
  const auto out = apply_registration(b, r);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(out.laterals[k].q.samples, b.laterals[r.assignment[k]].q.samples);
    EXPECT_EQ(out.laterals[k].s, b.laterals[r.assignment[k]].s);
  }
  r.assignment = {0, 1};
  EXPECT_THROW(apply_registration(b, r), LayoutError);
}

// --- lateral correspondence -------------------------------------------------

TEST(MatchLaterals, HungarianEqualsBruteForce) {
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> count(0, 3);
  const Weights w{};
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int na = count(rng), nb = std::min(count(rng), 6 - na);
    if (na + nb == 0) continue;
    const auto [a, b] = random_augmented_pair(rng, na, nb);
    ASSERT_LE(a.laterals.size(), 6u);
    const auto c = lateral_cost_matrix(a, b, w);
    const auto sol = solve_assignment(c);
    EXPECT_EQ(sol.cost, brute_force_assignment(c));
    double s = 0.0;
    for (Eigen::Index k = 0; k < c.rows(); ++k) s += c(k, static_cast<Eigen::Index>(sol.row_to_col[static_cast<std::size_t>(k)]));
    EXPECT_EQ(s, sol.cost);
    ++checked;
  }
  EXPECT_GT(checked, 150);
}

TEST(MatchLaterals, RandomMatricesAgainstBruteForce) {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 6;
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = trial % 3 == 0 ? std::floor(u(rng)) : u(rng);
    const auto sol = solve_assignment(c);
    EXPECT_EQ(sol.cost, brute_force_assignment(c));
    auto cols = sol.row_to_col;
    std::sort(cols.begin(), cols.end());
    for (int j = 0; j < n; ++j) EXPECT_EQ(cols[static_cast<std::size_t>(j)], static_cast<std::size_t>(j));
  }
}

TEST(MatchLaterals, IdenticalTreesCostZero) {
  std::mt19937_64 rng(31);
  const auto a = random_srvft(rng, 4);
  const auto c = lateral_cost_matrix(a, a, Weights{});
  EXPECT_EQ(solve_assignment(c).cost, 0.0);
  const auto pi = match_laterals(a, a, Weights{});
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(pi[k], k);
}

TEST(MatchLaterals, OrderPreservingPair) {
  SrvfTree a, b;
  a.main = b.main = constant_srvf(20, {0, -1});
  const auto shape = constant_srvf(10, {1, 0});
  a.laterals = {{shape, 0.2}, {shape, 0.8}};
  b.laterals = {{shape, 0.75}, {shape, 0.25}};
  const auto pi = match_laterals(a, b, Weights{0.02, 1.0, 1.0});
  EXPECT_EQ(pi, (std::vector<std::size_t>{1, 0}));
  EXPECT_THROW(solve_assignment(Eigen::MatrixXd(2, 3)), LayoutError);
}

TEST(MatchLaterals, EmptyIsFine) {
  const auto sol = solve_assignment(Eigen::MatrixXd(0, 0));
  EXPECT_TRUE(sol.row_to_col.empty());
  EXPECT_EQ(sol.cost, 0.0);
}

// --- full registration ------------------------------------------------------

TEST(Register, RotationAndShuffleRecovered) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_srvft(rng, 5);
    auto b = rotated(a, rotation_matrix(ang(rng)));
    std::shuffle(b.laterals.begin(), b.laterals.end(), rng);
    const auto r = register_trees(a, b, Weights{});
    EXPECT_LT(r.cost, 1e-6) << "trial " << trial;
  }
}

TEST(Register, EqualTreesCostZero) {
  std::mt19937_64 rng(33);
  const auto a = random_srvft(rng, 3);
  const auto r = register_trees(a, a, Weights{});
  EXPECT_EQ(r.cost, 0.0);
  ASSERT_FALSE(r.cost_history.empty());
  EXPECT_EQ(r.cost_history.front(), 0.0);
}

TEST(Register, MonotoneDescentAndBelowIdentity) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 15; ++trial) {
    const Weights w{0.02 + 0.1 * (trial % 3), 1.0, 0.5 + trial % 2};
    const auto [a, b] = random_augmented_pair(rng, 1 + trial % 3, 2);
    const auto r = register_trees(a, b, w);
    const double id = preshape_dissimilarity_sq(a, b, w);
    EXPECT_LE(r.cost, id);
    for (std::size_t i = 1; i < r.cost_history.size(); ++i) EXPECT_LE(r.cost_history[i], r.cost_history[i - 1]);
    EXPECT_NEAR(r.cost, preshape_dissimilarity_sq(a, apply_registration(b, r, false), w), 1e-12 * std::max(1.0, r.cost));
    EXPECT_LE(r.cost_history.size(), 11u);
    EXPECT_NEAR(r.rotation.determinant(), 1.0, 1e-12);
  }
}

TEST(Register, RemappedAttachments) {
  std::mt19937_64 rng(38);
  RegistrationOptions opts;
  opts.remap_attachments = true;
  for (int trial = 0; trial < 15; ++trial) {
    const Weights w{};
    const auto [a, b] = random_augmented_pair(rng, 1 + trial % 3, 2);
    const auto r = register_trees(a, b, w, opts);
    EXPECT_LE(r.cost, preshape_dissimilarity_sq(a, b, w));
    for (std::size_t i = 1; i < r.cost_history.size(); ++i) EXPECT_LE(r.cost_history[i], r.cost_history[i - 1]);
    EXPECT_NEAR(r.cost, preshape_dissimilarity_sq(a, apply_registration(b, r, true), w), 1e-12 * std::max(1.0, r.cost));
  }
}

TEST(Reparam, PinnedSearchNeverWorseThanIdentity) {
  std::mt19937_64 rng(39);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto q1 = to_srvf(fixtures::random_branch(rng), 60);
    const auto q2 = to_srvf(fixtures::random_branch(rng), 60);
    std::vector<AttachmentPin> pins;
    for (int k = 0; k < 3; ++k) pins.push_back({u(rng), u(rng), 1.0});
    auto total = [&](const Gamma& g) {
      double e = 0.02 * l2_dist_sq(q1, reparameterize(q2, g));
      for (const auto& p : pins) e += std::pow(p.fixed_s - g.inverse(p.moving_s), 2);
      return e;
    };
    const auto g = optimal_reparam_main(q1, q2, 3, pins, 0.02);
    EXPECT_LE(total(g), total(Gamma::identity(60)) + 1e-15);
  }
  // A single pin and no shape term: gamma^-1 moves the pin onto its target.
  const Srvf flat = Srvf::zero(101);
  const auto g = optimal_reparam_main(flat, flat, 3, {{0.5, 0.3, 1.0}}, 0.0);
  EXPECT_NEAR(g.inverse(0.3), 0.5, 1e-9);
}

TEST(Register, RotationInvariantCost) {
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  for (int trial = 0; trial < 10; ++trial) {
    const auto [a, b] = random_augmented_pair(rng, 2, 2);
    const double c0 = register_trees(a, b, Weights{}).cost;
    const double c1 = register_trees(a, rotated(b, rotation_matrix(ang(rng))), Weights{}).cost;
    EXPECT_NEAR(c0, c1, 1e-6);
  }
}

TEST(Register, MismatchedLayoutsThrow) {
  std::mt19937_64 rng(36);
  const auto a = random_srvft(rng, 2), b = random_srvft(rng, 3);
  EXPECT_THROW(register_trees(a, b, Weights{}), LayoutError);
  EXPECT_THROW(register_trees(a, a, Weights{-1.0, 1.0, 1.0}), ValidationError);
}

TEST(Register, JsonDump) {
  std::mt19937_64 rng(37);
  const auto a = random_srvft(rng, 2);
  const auto b = rotated(a, rotation_matrix(0.4));
  const auto r = register_trees(a, b, Weights{});
  const auto j = registration_to_json(r);
  EXPECT_NEAR(j.at("angle").get<double>(), -0.4, 1e-6);
  EXPECT_EQ(j.at("assignment").size(), 2u);
  EXPECT_EQ(j.at("gamma").size(), 100u);
  EXPECT_TRUE(j.contains("cost"));
  const auto back = registration_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.rotation, r.rotation);
  EXPECT_EQ(back.gamma.values, r.gamma.values);
  EXPECT_EQ(back.assignment, r.assignment);
  EXPECT_EQ(back.cost, r.cost);
  EXPECT_EQ(back.cost_history, r.cost_history);
  auto bad = j;
  bad["assignment"] = {0, 0};
  EXPECT_THROW(registration_from_json(bad), ParseError);
  bad = j;
  bad["gamma"] = {0.0, 0.7, 0.5, 1.0};
  EXPECT_THROW(registration_from_json(bad), ParseError);
  bad = j;
  bad.erase("rotation");
  EXPECT_THROW(registration_from_json(bad), ParseError);
}
