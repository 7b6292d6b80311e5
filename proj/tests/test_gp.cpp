#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "npglm/errors.hpp"
#include "npglm/gp.hpp"
#include "npglm/rng.hpp"

using namespace npglm;

TEST_CASE("kernel entries match the closed form", "[gp]") {
  const Eigen::MatrixXd k = build_kernel_matrix({1.0, 2.0, 36.0}, 0.02);
  REQUIRE(k(0, 0) == 1.0);
  REQUIRE(k(1, 1) == 1.0);
  REQUIRE(k(0, 1) == Catch::Approx(0.98019867330675530222).epsilon(1e-15));
  REQUIRE(k(1, 0) == k(0, 1));
  // Opposite ends of the study grid: 35 years apart.
  REQUIRE(k(0, 2) == Catch::Approx(2.2897348456455528941e-11).epsilon(1e-12));
  REQUIRE((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kernel construction validates its inputs", "[gp]") {
  REQUIRE_THROWS_AS(build_kernel_matrix({1.0, 2.0}, 0.0), InvalidParameter);
  REQUIRE_THROWS_AS(build_kernel_matrix({1.0, 2.0}, -0.5), InvalidParameter);
  REQUIRE_THROWS_AS(build_kernel_matrix({1.0, 2.0, 2.0}, 0.02), InvalidParameter);
  REQUIRE(build_kernel_matrix({}, 0.02).rows() == 0);
}

TEST_CASE("zero weights recover the prior", "[gp]") {
  const std::vector<double> grid = {1.0, 2.0, 3.0};
  const Eigen::MatrixXd kernel = build_kernel_matrix(grid, 0.02);
  FunctionalStats st{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};
  RngStream rng(61, 0);
  const int n = 100000;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd f = sample_gp_conditional(kernel, st, rng);
    mean += f;
    cov += f * f.transpose();
  }
  mean /= n;
  cov = cov / n - mean * mean.transpose();
  REQUIRE(mean.cwiseAbs().maxCoeff() < 0.02);
  REQUIRE((cov - kernel).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("weighted update matches the direct precision formula", "[gp]") {
  // Independent oracle: invert (W + K^{-1}) directly and compare the sample
  // moments of the inverse-free update against it.
  const std::vector<double> grid = {1.0, 5.0, 9.0};
  const Eigen::MatrixXd kernel = build_kernel_matrix(grid, 0.02);
  FunctionalStats st{Eigen::VectorXd(3), Eigen::VectorXd(3)};
  st.w << 2.0, 0.5, 4.0;
  st.z << 1.0, -2.0, 0.5;

  const Eigen::MatrixXd direct =
      (Eigen::MatrixXd(st.w.asDiagonal()) + kernel.inverse()).inverse();
  const Eigen::VectorXd direct_mean = direct * st.z;

  RngStream rng(62, 0);
  const int n = 200000;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd f = sample_gp_conditional(kernel, st, rng);
    mean += f;
    cov += f * f.transpose();
  }
  mean /= n;
  cov = cov / n - mean * mean.transpose();
  REQUIRE((mean - direct_mean).cwiseAbs().maxCoeff() < 0.01);
  REQUIRE((cov - direct).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("observations only sharpen their own level", "[gp]") {
  // A huge weight on one cell pins that coordinate near z/w while leaving
  // distant coordinates essentially at prior scale.
  const std::vector<double> grid = {1.0, 30.0};
  const Eigen::MatrixXd kernel = build_kernel_matrix(grid, 0.02);
  FunctionalStats st{Eigen::VectorXd(2), Eigen::VectorXd(2)};
  st.w << 1e6, 0.0;
  st.z << 2e6, 0.0;  // pins f(1) near 2
  RngStream rng(63, 0);
  double s0 = 0.0, ss1 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd f = sample_gp_conditional(kernel, st, rng);
    s0 += f[0];
    ss1 += f[1] * f[1];
  }
  REQUIRE(s0 / n == Catch::Approx(2.0).margin(0.01));
  REQUIRE(ss1 / n == Catch::Approx(1.0).epsilon(0.05));  // still prior variance
}

TEST_CASE("statistic shapes are enforced", "[gp]") {
  const Eigen::MatrixXd kernel = build_kernel_matrix({1.0, 2.0}, 0.02);
  FunctionalStats st{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};
  RngStream rng(1, 0);
  REQUIRE_THROWS_AS(sample_gp_conditional(kernel, st, rng), ShapeMismatch);
  FunctionalStats empty{Eigen::VectorXd(), Eigen::VectorXd()};
  REQUIRE(sample_gp_conditional(Eigen::MatrixXd(), empty, rng).size() == 0);
}

TEST_CASE("conditional mean reproduces grid values and decays", "[gp]") {
  const std::vector<double> grid = {1.0, 2.0, 3.0, 4.0};
  Eigen::VectorXd f(4);
  f << 0.5, -0.2, 0.1, 0.9;
  const Eigen::VectorXd at_grid = gp_predict_mean(grid, f, 0.02, grid);
  REQUIRE((at_grid - f).cwiseAbs().maxCoeff() < 1e-4);  // jitter-limited
  const Eigen::VectorXd far = gp_predict_mean(grid, f, 0.02, {200.0});
  REQUIRE(std::abs(far[0]) < 1e-8);
  REQUIRE_THROWS_AS(gp_predict_mean(grid, Eigen::VectorXd::Zero(2), 0.02, {1.0}),
                    ShapeMismatch);
}
