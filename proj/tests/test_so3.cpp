#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "loopwbc/errors.hpp"
#include "loopwbc/so3.hpp"
#include "oracles.hpp"

using namespace loopwbc;

TEST_CASE("skew of zero is the zero matrix") {
  CHECK(so3::skew(Vec3::Zero()).isZero(0.0));
}

TEST_CASE("skew acts as cross product") {
  CHECK((so3::skew(Vec3(0, 0, 1)) * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() ==
        doctest::Approx(0.0).epsilon(1e-15));

  std::mt19937 rng(7);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 v(d(rng), d(rng), d(rng));
    const Vec3 w(d(rng), d(rng), d(rng));
    CHECK((so3::skew(v) * w - v.cross(w)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("skew is exactly antisymmetric") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    const Vec3 v(d(rng), d(rng), d(rng));
    const Mat3 m = so3::skew(v);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) CHECK(m(r, c) == -m(c, r));
  }
}

TEST_CASE("exp_map of zero is the identity") {
  CHECK((so3::exp_map(Vec3::Zero()) - Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("exp_map quarter turn about z") {
  const Mat3 r = so3::exp_map(Vec3(0, 0, M_PI / 2));
  CHECK((r * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-14);
}

TEST_CASE("exp_map matches truncated series") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (int i = 0; i < 200; ++i) {
    const Vec3 w(d(rng), d(rng), d(rng));
    const MatX ref = oracles::expm_series(so3::skew(w));
    CHECK((so3::exp_map(w) - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("exp_map inverse and composition about a fixed axis") {
  std::mt19937 rng(10);
  std::uniform_real_distribution<double> d(-1.4, 1.4);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a(d(rng), d(rng), d(rng));
    CHECK((so3::exp_map(a) * so3::exp_map(-a) - Mat3::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-14);
    const double s = d(rng), t = d(rng);
    const Mat3 lhs = so3::exp_map(Vec3(0, 0, s)) * so3::exp_map(Vec3(0, 0, t));
    const Mat3 rhs = so3::exp_map(Vec3(0, 0, s + t));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("exp_map yields valid rotations and polar projection repairs") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const Mat3 r = so3::exp_map(Vec3(d(rng), d(rng), d(rng)) * 0.5);
    CHECK(so3::is_rotation(r));
    Mat3 noisy = r;
    noisy(0, 1) += 1e-6;
    const Mat3 fixed = so3::project_rotation(noisy);
    CHECK(so3::is_rotation(fixed));
    CHECK((fixed - r).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("atan2_gradient at the axis points") {
  auto [da, db] = so3::atan2_gradient(0.0, 1.0);
  CHECK(da == doctest::Approx(1.0));
  CHECK(db == doctest::Approx(0.0));
  auto [da2, db2] = so3::atan2_gradient(1.0, 0.0);
  CHECK(da2 == doctest::Approx(0.0));
  CHECK(db2 == doctest::Approx(-1.0));
}

TEST_CASE("atan2_gradient matches central differences") {
  const double h = 1e-7;
  auto fd = [&](double a, double b) {
    return std::pair<double, double>(
        (std::atan2(a + h, b) - std::atan2(a - h, b)) / (2 * h),
        (std::atan2(a, b + h) - std::atan2(a, b - h)) / (2 * h));
  };
  {
    auto [da, db] = so3::atan2_gradient(0.3, 0.7);
    auto [fa, fb] = fd(0.3, 0.7);
    CHECK(std::abs(da - fa) < 1e-6);
    CHECK(std::abs(db - fb) < 1e-6);
  }
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  int checked = 0;
  while (checked < 1000) {
    const double a = d(rng), b = d(rng);
    if (a * a + b * b < 1e-4) continue;  // keep away from the fd-noise region
    auto [da, db] = so3::atan2_gradient(a, b);
    auto [fa, fb] = fd(a, b);
    CHECK(std::abs(da - fa) < 1e-6);
    CHECK(std::abs(db - fb) < 1e-6);
    ++checked;
  }
}

TEST_CASE("atan2_gradient degenerate direction") {
  CHECK_THROWS_AS(so3::atan2_gradient(1e-8, 1e-8), DegenerateDirection);
}
