#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "madgan/errors.hpp"
#include "madgan/tensor.hpp"

namespace madgan {
namespace {

TEST(Tensor, SizeMatchesShapeProduct) {
  Tensor t({3, 4}, 1.5);
  EXPECT_EQ(t.size(), 12u);
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.cols(), 4u);
  EXPECT_EQ(shape_product(t.shape()), t.size());
}

TEST(Tensor, RejectsDataOfWrongLength) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(Tensor, MatrixLiteralIsRowMajor) {
  const Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.at(0, 2), 3.0);
  EXPECT_EQ(m.at(1, 0), 4.0);
  EXPECT_EQ(m[4], 5.0);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), DimensionError);
}

TEST(Tensor, ScalarAndRowViews) {
  const Tensor s = Tensor::scalar(2.5);
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_EQ(s.rows(), 1u);
  EXPECT_EQ(s.cols(), 1u);
  EXPECT_EQ(s.item(), 2.5);

  const Tensor row({5});
  EXPECT_EQ(row.rows(), 1u);
  EXPECT_EQ(row.cols(), 5u);
  EXPECT_THROW((void)row.item(), ContractError);
}

TEST(Tensor, ColumnFromValues) {
  const std::vector<double> v{1, 2, 3};
  const Tensor c = Tensor::column(v);
  EXPECT_EQ(c.shape(), (Shape{3, 1}));
  EXPECT_EQ(c.at(2, 0), 3.0);
}

TEST(Tensor, FinitenessCheck) {
  Tensor t({2}, 0.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
  t[1] = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, InPlaceArithmetic) {
  Tensor a = Tensor::matrix({{1, 2}});
  a += Tensor::matrix({{3, 4}});
  a *= 0.5;
  EXPECT_EQ(a, Tensor::matrix({{2, 3}}));
  EXPECT_THROW(a += Tensor({3}), DimensionError);
}

TEST(Tensor, ShapeString) { EXPECT_EQ(shape_string({2, 3}), "[2x3]"); }

}  // namespace
}  // namespace madgan
