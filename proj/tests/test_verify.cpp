#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include "sinsim/ot.hpp"
#include "sinsim/verify.hpp"

namespace sinsim {
namespace {

TEST(Verify, FeasibilityGatingRule) {
  EXPECT_FALSE(feasibility_gates(2, 0.01));
  EXPECT_FALSE(feasibility_gates(8, 0.01));
  EXPECT_TRUE(feasibility_gates(2, 0.05));
  EXPECT_TRUE(feasibility_gates(8, 0.5));
  EXPECT_TRUE(feasibility_gates(32, 0.01));
}

TEST(Verify, NormalizedCostLiesInUnitInterval) {
  Rng rng(1);
  const Matrix c = normalized_gaussian_cost(12, 4, rng);
  double mx = 0;
  for (double x : c.data()) {
    EXPECT_GE(x, 0.0);
    mx = std::max(mx, x);
  }
  EXPECT_DOUBLE_EQ(mx, 1.0);
}

class Battery : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { report_ = new VerifyReport(run_verify_battery(7)); }
  static void TearDownTestSuite() { delete report_; }
  static VerifyReport* report_;
};

VerifyReport* Battery::report_ = nullptr;

TEST_F(Battery, AllGatingChecksPass) {
  for (const auto& c : report_->checks) {
    if (c.gating) {
      EXPECT_TRUE(c.pass) << c.name << " value " << c.value << " bound " << c.bound;
    }
    if (c.name.find("upper_bound") == std::string::npos) {
      EXPECT_EQ(c.pass, c.slack >= 0.0) << c.name;
    }
  }
  EXPECT_TRUE(report_->all_pass());
  EXPECT_EQ(report_->failures(), 0u);
}

TEST_F(Battery, CoversEveryCell) {
  std::size_t upper = 0, positivity = 0;
  for (const auto& c : report_->checks) {
    bool cell = false;
    for (std::size_t n : kBatterySizes) cell = cell || c.name.find("[n=" + std::to_string(n) + ",") != std::string::npos;
    if (!cell) continue;
    upper += c.name.starts_with("diagonal_candidate_upper_bound");
    positivity += c.name.starts_with("strict_positivity");
  }
  EXPECT_EQ(upper, 12u);
  EXPECT_EQ(positivity, 12u);
}

TEST_F(Battery, JsonIsParseableAndStable) {
  const auto j = nlohmann::json::parse(report_->to_json());
  EXPECT_EQ(j.at("seed").get<std::uint64_t>(), 7u);
  EXPECT_EQ(j.at("checks").size(), report_->checks.size());
  EXPECT_EQ(report_->to_json(), run_verify_battery(7).to_json());
}

TEST(EmdCompare, SmallLambdaApproachesExactCost) {
  const auto rows = emd_compare(3, {1.0, 1e-3}, 8, 5);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_LE(rows[1].max_rel_err, 0.01);
  EXPECT_GT(rows[0].mean_rel_err, rows[1].mean_rel_err);
  const std::string csv = emd_compare_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,n,instances,mean_rel_err,max_rel_err,mean_iterations");
}

}  // namespace
}  // namespace sinsim
