#include <gtest/gtest.h>

#include <cmath>

#include "hypermatch/error.hpp"
#include "hypermatch/tensor.hpp"

namespace hypermatch {
namespace {

TEST(Tensor, ShapeAndRowMajorLayout) {
  const Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t.at(1, 0), 4.0);
  EXPECT_EQ(t.row(1)[2], 6.0);
}

TEST(Tensor, ColsIsProductOfTrailingExtents) {
  EXPECT_EQ(Tensor({4, 2, 3}).cols(), 6u);
  EXPECT_EQ(shape_size({4, 2, 3}), 24u);
  EXPECT_EQ(shape_string({4, 2, 3}), "[4, 2, 3]");
}

TEST(Tensor, ValueCountMustMatchShape) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), InvalidArgument);
  EXPECT_THROW(Tensor::matrix(2, 2, {1}), InvalidArgument);
}

TEST(Tensor, ReshapeKeepsValues) {
  const Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.at(2, 1), 6.0);
  EXPECT_THROW(t.reshaped({4, 2}), InvalidArgument);
}

TEST(Tensor, FiniteCheck) {
  Tensor t({3}, 1.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

}  // namespace
}  // namespace hypermatch
