#include <gtest/gtest.h>

#include "hypermatch/error.hpp"
#include "hypermatch/selfcheck.hpp"

namespace hypermatch {
namespace {

std::size_t failures(const std::vector<PropertyResult>& results) {
  std::size_t n = 0;
  for (const auto& r : results) n += !r.passed;
  return n;
}

TEST(GeometrySuite, LibraryPassesOverSeveralSeeds) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto results = run_geometry_suite(library_ops(), seed);
    EXPECT_GE(results.size(), 14u);
    for (const auto& r : results) EXPECT_TRUE(r.passed) << "seed " << seed << " " << r.name << ": " << r.detail;
  }
}

TEST(GeometrySuite, EveryInjectedFaultIsDetected) {
  ASSERT_EQ(fault_names().size(), 3u);
  for (const auto& fault : fault_names()) {
    EXPECT_GT(failures(run_geometry_suite(faulty_ops(fault), 1)), 0u) << fault;
  }
}

TEST(GeometrySuite, UnknownFaultThrows) { EXPECT_THROW(faulty_ops("nope"), InvalidArgument); }

TEST(GradientCheck, PassesOverSeveralSeeds) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = run_gradient_property(seed);
    EXPECT_TRUE(r.passed) << "seed " << seed << ": " << r.detail;
  }
}

TEST(GradientCheck, ReportsEveryTrainableTensor) {
  const auto model = toy_model_config();
  const auto toy = toy_problem(model, 2);
  const auto params = init_parameters(model, 2, kGradientCheckInitStd);
  const auto report = gradient_check(model, params, toy.doc, toy.selection);
  EXPECT_EQ(report.tensors.size(), params.tensors().size());
  EXPECT_GT(report.loss, 0.0);
  EXPECT_LT(report.max_relative_error, 1e-4);
}

TEST(ToyProblem, HasTwoPositivesAndFourNegatives) {
  const auto toy = toy_problem(toy_model_config(), 1);
  EXPECT_EQ(toy.selection.positives.size(), 2u);
  EXPECT_EQ(toy.selection.negatives.size(), 4u);
  EXPECT_EQ(toy.doc.embeddings.tokens(), 12u);
}

}  // namespace
}  // namespace hypermatch
