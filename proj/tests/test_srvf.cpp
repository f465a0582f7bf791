#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "treeshape/srvf.hpp"
#include "treeshape/tree_io.hpp"

using namespace treeshape;

namespace {

Branch segment(Point2 a, Point2 b) { return Branch{{a, b}, false}; }

Branch half_circle(int points) {
  Branch b;
  for (int i = 0; i < points; ++i) {
    const double th = std::numbers::pi * i / (points - 1);
    b.points.emplace_back(std::cos(th), std::sin(th));
  }
  return b;
}

double max_point_error(const Branch& a, const Branch& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.points.size(); ++i) e = std::max(e, (a.points[i] - b.points[i]).norm());
  return e;
}

}  // namespace

TEST(ToSrvf, UnitSpeedLine) {
  const auto q = to_srvf(segment({0, 0}, {1, 0}), 100);
  ASSERT_EQ(q.size(), 100);
  for (int i = 0; i < q.size(); ++i) {
    EXPECT_NEAR(q.samples(0, i), 1.0, 1e-12);
    EXPECT_NEAR(q.samples(1, i), 0.0, 1e-12);
  }
}

TEST(ToSrvf, DoubleSpeedLine) {
  const auto q = to_srvf(segment({0, 0}, {2, 0}), 64);
  for (int i = 0; i < q.size(); ++i) {
    EXPECT_NEAR(q.samples(0, i), std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(q.samples(1, i), 0.0, 1e-12);
  }
}

TEST(ToSrvf, VirtualBranchIsZero) {
  const auto q = to_srvf(Branch::make_virtual({0.3, -0.2}), 50);
  ASSERT_EQ(q.size(), 50);
  EXPECT_EQ(q.samples.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(is_null(q));
}

TEST(ToSrvf, VanishingDerivativeMapsToZero) {
  const Eigen::Matrix2Xd v = Eigen::Matrix2Xd::Constant(2, 4, 1e-14);
  EXPECT_EQ(velocity_to_srvf(v).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ToSrvf, LengthIdentity) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto b = fixtures::random_branch(rng, 1000);
    for (auto& p : b.points) p *= 0.2 + 3.0 * trial / 20.0;
    const auto q = to_srvf(b, 100);
    EXPECT_NEAR(l2_norm_sq(q), b.length(), 1e-3 * b.length());
  }
}

TEST(ToSrvf, TranslationInvariance) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto b = fixtures::random_branch(rng, 300);
    Branch moved = b;
    const Point2 c(10.0 * trial - 40.0, 3.5 * trial);
    for (auto& p : moved.points) p += c;
    const auto q1 = to_srvf(b, 100), q2 = to_srvf(moved, 100);
    // Equal up to floating-point cancellation in the shifted coordinates.
    EXPECT_LT((q1.samples - q2.samples).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ToSrvf, RotationEquivariance) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  for (int trial = 0; trial < 20; ++trial) {
    const auto b = fixtures::random_branch(rng, 300);
    const Eigen::Matrix2d o = rotation_matrix(ang(rng));
    Branch rb = b;
    for (auto& p : rb.points) p = o * p;
    const auto q1 = to_srvf(b, 100), q2 = to_srvf(rb, 100);
    EXPECT_LT((o * q1.samples - q2.samples).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(FromSrvf, ConstantUnit) {
  Srvf q{Eigen::Matrix2Xd(2, 11)};
  q.samples.row(0).setOnes();
  q.samples.row(1).setZero();
  const auto b = from_srvf(q, {0, 0});
  ASSERT_EQ(b.points.size(), 11u);
  for (int i = 0; i < 11; ++i) EXPECT_NEAR((b.points[static_cast<std::size_t>(i)] - Point2(i / 10.0, 0)).norm(), 0, 1e-12);
}

TEST(FromSrvf, ConstantRootTwo) {
  Srvf q{Eigen::Matrix2Xd(2, 21)};
  q.samples.row(0).setConstant(std::sqrt(2.0));
  q.samples.row(1).setZero();
  const auto b = from_srvf(q, {0, 0});
  EXPECT_NEAR((b.points.back() - Point2(2, 0)).norm(), 0, 1e-12);
  EXPECT_NEAR(b.length(), 2.0, 1e-12);
}

TEST(FromSrvf, HalfCircleRoundTrip) {
  const auto arc = half_circle(2000);
  const auto q = to_srvf(arc, 100);
  const auto back = from_srvf(q, arc.start());
  // Analytic arc at the same uniform parameters.
  double err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double th = std::numbers::pi * i / 99.0;
    err = std::max(err, (back.points[static_cast<std::size_t>(i)] - Point2(std::cos(th), std::sin(th))).norm());
  }
  EXPECT_LT(err, 1e-2);
}

TEST(FromSrvf, RoundTripRelativeError) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const auto b = resample_branch(fixtures::random_branch(rng, 2000), 100);
    const auto back = from_srvf(to_srvf(b, 100), b.start());
    EXPECT_LT(max_point_error(b, back), 1e-3 * b.length());
  }
}

TEST(FromSrvf, RoundTripConverges) {
  const auto arc = half_circle(20000);
  std::vector<double> errs;
  for (int n : {25, 50, 100, 200}) {
    const auto r = resample_branch(arc, n);
    errs.push_back(max_point_error(r, from_srvf(to_srvf(arc, n), arc.start())));
  }
  for (std::size_t i = 1; i < errs.size(); ++i) EXPECT_GE(std::log2(errs[i - 1] / errs[i]), 1.0);
}

TEST(L2, Examples) {
  Srvf a{Eigen::Matrix2Xd(2, 30)}, b{Eigen::Matrix2Xd(2, 30)};
  a.samples.row(0).setOnes();
  a.samples.row(1).setZero();
  b.samples.row(0).setConstant(std::sqrt(2.0));
  b.samples.row(1).setZero();
  EXPECT_EQ(l2_dist_sq(a, a), 0.0);
  EXPECT_NEAR(l2_dist_sq(a, b), 0.171573, 1e-6);
  EXPECT_NEAR(l2_dist_sq(a, b), std::pow(std::sqrt(2.0) - 1.0, 2), 1e-14);
}

TEST(L2, SymmetricAndQuadratic) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q1 = to_srvf(fixtures::random_branch(rng, 300), 60);
    const auto q2 = to_srvf(fixtures::random_branch(rng, 300), 60);
    const double d = l2_dist_sq(q1, q2);
    EXPECT_DOUBLE_EQ(d, l2_dist_sq(q2, q1));
    EXPECT_GT(d, 0.0);
    const double c = 0.5 + trial;
    EXPECT_NEAR(l2_dist_sq(Srvf{c * q1.samples}, Srvf{c * q2.samples}), c * c * d, 1e-12 * c * c * d);
  }
}

TEST(L2, TrapezoidAgainstDirectSum) {
  std::mt19937_64 rng(16);
  const auto q1 = to_srvf(fixtures::random_branch(rng, 300), 40);
  const auto q2 = to_srvf(fixtures::random_branch(rng, 300), 40);
  double direct = 0.0;
  for (int i = 0; i < 40; ++i) {
    const double w = (i == 0 || i == 39) ? 0.5 / 39 : 1.0 / 39;
    direct += w * (q1.samples.col(i) - q2.samples.col(i)).squaredNorm();
  }
  EXPECT_NEAR(l2_dist_sq(q1, q2), direct, 1e-14);
}

TEST(L2, MismatchedCountsThrow) {
  EXPECT_THROW(l2_dist_sq(Srvf::zero(10), Srvf::zero(11)), LayoutError);
}

TEST(SrvfTree, NoLaterals) {
  fixtures::RootSpec spec;
  const auto q = tree_to_srvft(fixtures::make_root(spec));
  EXPECT_TRUE(q.laterals.empty());
  EXPECT_EQ(q.main.size(), 100);
}

TEST(SrvfTree, VirtualLateral) {
  fixtures::RootSpec spec;
  auto tree = fixtures::make_root(spec);
  tree.laterals.push_back({0.5, Branch::make_virtual(tree.main.evaluate(0.5))});
  const auto q = tree_to_srvft(tree);
  ASSERT_EQ(q.laterals.size(), 1u);
  EXPECT_EQ(q.laterals[0].s, 0.5);
  EXPECT_EQ(q.laterals[0].q.size(), 50);
  EXPECT_TRUE(is_null(q.laterals[0].q));
  EXPECT_EQ(q.anchor, tree.main.points.front());

  const auto back = srvft_to_tree(q);
  ASSERT_EQ(back.laterals.size(), 1u);
  EXPECT_TRUE(back.laterals[0].branch.is_virtual);
  EXPECT_NEAR((back.laterals[0].branch.start() - back.main.evaluate(0.5)).norm(), 0, 1e-9);
  EXPECT_NO_THROW(validate(back));
}

TEST(SrvfTree, RoundTrip) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto tree = resample_tree(fixtures::random_root(rng, 4), {});
    std::vector<std::size_t> src;
    const auto back = srvft_to_tree(tree_to_srvft(tree), &src);
    EXPECT_NO_THROW(validate(back));
    ASSERT_EQ(back.laterals.size(), tree.laterals.size());
    EXPECT_LT(max_point_error(back.main, tree.main), 1e-3 * tree.main.length());
    for (std::size_t k = 0; k < tree.laterals.size(); ++k) {
      EXPECT_EQ(src[k], k);
      EXPECT_NEAR(back.laterals[k].t, tree.laterals[k].t, 1e-3);
      EXPECT_LT(max_point_error(back.laterals[k].branch, tree.laterals[k].branch), 2e-3 * tree.main.length());
    }
  }
}

TEST(SrvfTree, JsonRoundTrip) {
  std::mt19937_64 rng(18);
  const auto q = tree_to_srvft(fixtures::random_root(rng, 3));
  const auto back = srvft_from_json(nlohmann::json::parse(srvft_to_json(q).dump()));
  EXPECT_EQ(back.anchor, q.anchor);
  EXPECT_EQ(back.main.samples, q.main.samples);
  ASSERT_EQ(back.laterals.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(back.laterals[k].s, q.laterals[k].s);
    EXPECT_EQ(back.laterals[k].q.samples, q.laterals[k].q.samples);
  }
  EXPECT_THROW(srvft_from_json(nlohmann::json::parse(R"({"anchor":[0,0]})")), ParseError);
}
