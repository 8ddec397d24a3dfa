#include <cmath>

#include <gtest/gtest.h>

#include "sinsim/errors.hpp"
#include "sinsim/losses.hpp"
#include "sinsim/numerics.hpp"
#include "test_support.hpp"

namespace sinsim {
namespace {

using testing::central_difference;
using testing::random_matrix;
using testing::reference_nt_xent;
using testing::relative_error;

using testing::resolved_entropic_value;

TEST(NtXent, OrthonormalClosedForm) {
  const Matrix z = Matrix::from_rows({{1, 0}, {0, 1}});
  const double tau = 0.5;
  const double expected = -std::log(std::exp(1 / tau) / (std::exp(1 / tau) + 2.0));
  EXPECT_NEAR(nt_xent(z, z, {tau}).value, expected, 1e-14);
  EXPECT_NEAR(expected, 0.2395, 5e-5);
}

TEST(NtXent, SharperTemperatureLowersLossForOrthogonalPairs) {
  const Matrix z = Matrix::identity(4);
  double prev = std::numeric_limits<double>::infinity();
  for (double tau : {2.0, 1.0, 0.5, 0.2, 0.1}) {
    const double v = nt_xent(z, z, {tau}).value;
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(NtXent, MatchesReferenceImplementation) {
  for (int inst = 0; inst < 10; ++inst) {
    Rng rng(inst);
    const Matrix z1 = random_matrix(4, 8, rng);
    const Matrix z2 = random_matrix(4, 8, rng);
    for (double tau : {0.1, 0.5, 1.0}) {
      EXPECT_NEAR(nt_xent(z1, z2, {tau}).value, reference_nt_xent(z1, z2, tau), 1e-12);
    }
  }
}

TEST(NtXent, PermutationEquivariance) {
  Rng rng(1);
  const Matrix z1 = random_matrix(5, 4, rng);
  const Matrix z2 = random_matrix(5, 4, rng);
  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  Matrix p1(5, 4), p2(5, 4);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 4; ++k) {
      p1(i, k) = z1(perm[i], k);
      p2(i, k) = z2(perm[i], k);
    }
  const Vector a = nt_xent_per_anchor(z1, z2, {0.5});
  const Vector b = nt_xent_per_anchor(p1, p2, {0.5});
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(b[i], a[perm[i]], 1e-12);
    EXPECT_NEAR(b[i + 5], a[perm[i] + 5], 1e-12);
  }
  EXPECT_NEAR(nt_xent(p1, p2, {0.5}).value, nt_xent(z1, z2, {0.5}).value, 1e-12);
}

TEST(NtXent, ScaleInvariance) {
  Rng rng(2);
  const Matrix z1 = random_matrix(6, 5, rng);
  const Matrix z2 = random_matrix(6, 5, rng);
  const double v = nt_xent(z1, z2, {0.5}).value;
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    EXPECT_NEAR(nt_xent(scale(z1, c), scale(z2, c), {0.5}).value, v, 1e-12);
  }
}

TEST(NtXent, GradientMatchesFiniteDifferences) {
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(100 + inst);
    const std::size_t n = 4 + inst % 5;
    const Matrix z1 = random_matrix(n, 8, rng);
    const Matrix z2 = random_matrix(n, 8, rng);
    const NtXentSettings s{0.5};
    const LossValue lv = nt_xent(z1, z2, s);
    const Matrix fd1 = central_difference([&](const Matrix& x) { return nt_xent(x, z2, s).value; }, z1, 1e-5);
    const Matrix fd2 = central_difference([&](const Matrix& x) { return nt_xent(z1, x, s).value; }, z2, 1e-5);
    EXPECT_LE(relative_error(*lv.grad_z1, fd1), 1e-5);
    EXPECT_LE(relative_error(*lv.grad_z2, fd2), 1e-5);
  }
}

TEST(NtXent, RejectsBadInput) {
  EXPECT_THROW(nt_xent(Matrix(1, 3, 1.0), Matrix(1, 3, 1.0), {}), DomainError);
  EXPECT_THROW(nt_xent(Matrix(2, 3, 1.0), Matrix(3, 3, 1.0), {}), DimensionError);
  Matrix z(2, 2, 1.0);
  z(1, 0) = z(1, 1) = 0.0;
  EXPECT_THROW(nt_xent(z, Matrix(2, 2, 1.0), {}), DomainError);
  EXPECT_THROW(nt_xent(Matrix(2, 2, 1.0), Matrix(2, 2, 1.0), {0.0}), DomainError);
}

TEST(SinkhornLoss, SinglePointIdenticalViews) {
  const Matrix h = Matrix::from_rows({{0.3, -1.2}});
  const LossValue lv = sinkhorn_loss(h, h, {});
  EXPECT_EQ(lv.value, 0.0);
  EXPECT_EQ(max_abs(*lv.grad_h1), 0.0);
  EXPECT_EQ(max_abs(*lv.grad_h2), 0.0);
}

TEST(SinkhornLoss, TranslationCostsSquaredShift) {
  Rng rng(3);
  const Matrix h1 = random_matrix(6, 3, rng, 3.0);
  const Vector v = {0.2, -0.1, 0.15};
  Matrix h2 = h1;
  add_row_vector(h2, v);
  const LossValue lv = sinkhorn_loss(h1, h2, {1e-3, 1000000, 1e-10});
  EXPECT_NEAR(lv.value, dot(v, v), 1e-3 * dot(v, v));
}

TEST(SinkhornLoss, EnvelopeGradientMatchesResolvedFiniteDifferences) {
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(200 + inst);
    const Matrix h1 = random_matrix(5, 3, rng, 0.3);
    const Matrix h2 = random_matrix(5, 3, rng, 0.3);
    const double lambda = 0.05;
    const LossValue lv = sinkhorn_loss(h1, h2, {lambda, 200000, 1e-12});
    const Matrix fd1 = central_difference(
        [&](const Matrix& x) { return resolved_entropic_value(x, h2, lambda); }, h1, 1e-5);
    const Matrix fd2 = central_difference(
        [&](const Matrix& x) { return resolved_entropic_value(h1, x, lambda); }, h2, 1e-5);
    EXPECT_LE(relative_error(*lv.grad_h1, fd1), 1e-3);
    EXPECT_LE(relative_error(*lv.grad_h2, fd2), 1e-3);
  }
}

TEST(SinkhornLoss, SwapTransposesPlanAndKeepsValue) {
  Rng rng(4);
  const Matrix h1 = random_matrix(8, 4, rng, 0.5);
  const Matrix h2 = random_matrix(8, 4, rng, 0.5);
  const SinkhornSettings s{0.05, 100000, 1e-12};
  const LossValue a = sinkhorn_loss(h1, h2, s);
  const LossValue b = sinkhorn_loss(h2, h1, s);
  EXPECT_NEAR(a.value, b.value, 1e-10);
  EXPECT_LE(max_abs_diff(a.plan->gamma, transpose(b.plan->gamma)), 1e-10);
}

TEST(SinkhornLoss, NonNegative) {
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(300 + inst);
    const Matrix h1 = random_matrix(6, 3, rng, 2.0);
    const Matrix h2 = random_matrix(6, 3, rng, 2.0);
    EXPECT_GE(sinkhorn_loss(h1, h2, {}).value, 0.0);
  }
}

TEST(SinkhornLoss, NegativeGradientStepDescends) {
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(400 + inst);
    const Matrix h1 = random_matrix(8, 4, rng);
    Matrix h2 = h1;
    for (double& x : h2.data()) x += 0.3 * rng.normal();
    const SinkhornSettings s{0.05, 2000, 1e-10};
    const LossValue lv = sinkhorn_loss(h1, h2, s);
    Matrix n1 = h1, n2 = h2;
    axpy(-1e-2, *lv.grad_h1, n1);
    axpy(-1e-2, *lv.grad_h2, n2);
    EXPECT_LT(sinkhorn_loss(n1, n2, s).value, lv.value);
  }
}

TEST(SinkhornLoss, RejectsMismatchedShapes) {
  EXPECT_THROW(sinkhorn_loss(Matrix(2, 3), Matrix(2, 4), {}), DimensionError);
}

class SinSim : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(5);
    h1 = random_matrix(6, 5, rng);
    h2 = random_matrix(6, 5, rng);
    z1 = random_matrix(6, 3, rng);
    z2 = random_matrix(6, 3, rng);
  }
  Matrix h1, h2, z1, z2;
};

TEST_F(SinSim, BetaZeroIsPlainContrastive) {
  const LossValue nt = nt_xent(z1, z2, {});
  const LossValue lv = sinsim_loss(h1, h2, z1, z2, 0.0, {}, {});
  EXPECT_EQ(lv.value, nt.value);
  EXPECT_EQ(max_abs(*lv.grad_h1), 0.0);
  EXPECT_EQ(max_abs(*lv.grad_h2), 0.0);
  EXPECT_EQ(*lv.grad_z1, *nt.grad_z1);
  EXPECT_EQ(*lv.grad_z2, *nt.grad_z2);
}

TEST_F(SinSim, ValueIsExactComposition) {
  SinSimTerms terms;
  const LossValue lv = sinsim_loss(h1, h2, z1, z2, 0.8, {}, {}, RegularizeOn::h, &terms);
  EXPECT_EQ(terms.nt_xent, nt_xent(z1, z2, {}).value);
  EXPECT_EQ(terms.sinkhorn, sinkhorn_loss(h1, h2, {}).value);
  EXPECT_EQ(lv.value, terms.nt_xent + 0.8 * terms.sinkhorn);
}

TEST_F(SinSim, SharedRepresentationGradientIsSumOfTerms) {
  // With h ≡ z the total derivative is the contrastive gradient plus the
  // transport gradient, each computed on its own.
  Rng rng(6);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(3, 4, rng);
  const LossValue lv = sinsim_loss(a, b, a, b, 1.0, {}, {});
  const LossValue nt = nt_xent(a, b, {});
  const LossValue sk = sinkhorn_loss(a, b, {});
  EXPECT_LE(max_abs_diff(add(*lv.grad_z1, *lv.grad_h1), add(*nt.grad_z1, *sk.grad_h1)), 1e-15);
  EXPECT_LE(max_abs_diff(add(*lv.grad_z2, *lv.grad_h2), add(*nt.grad_z2, *sk.grad_h2)), 1e-15);
}

TEST_F(SinSim, RegularizeOnZMovesGradientToZ) {
  const double beta = 0.8;
  const LossValue lv = sinsim_loss(h1, h2, z1, z2, beta, {}, {}, RegularizeOn::z);
  const LossValue nt = nt_xent(z1, z2, {});
  const LossValue sk = sinkhorn_loss(z1, z2, {});
  EXPECT_EQ(max_abs(*lv.grad_h1), 0.0);
  Matrix expected = *nt.grad_z1;
  axpy(beta, *sk.grad_h1, expected);
  EXPECT_LE(max_abs_diff(*lv.grad_z1, expected), 1e-15);
  EXPECT_EQ(lv.value, nt.value + beta * sk.value);
}

TEST_F(SinSim, RejectsNegativeBeta) {
  EXPECT_THROW(sinsim_loss(h1, h2, z1, z2, -0.1, {}, {}), DomainError);
}

}  // namespace
}  // namespace sinsim
