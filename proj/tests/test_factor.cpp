#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fve/factor.hpp"
#include "theorems.hpp"

using namespace fve;

namespace {

constexpr VarId A = 0, B = 1, C = 2, D = 3;

Factor f_ad() {
  return Factor({{A, 2}, {D, 3}}, {0.2, 0.3, 0.6, 0.9, 0.6, 0.1});
}

Factor g_abc() {
  return Factor({{A, 2}, {B, 2}, {C, 2}}, {1.0, 0.0, 0.0, 1.0, 0.2, 0.8, 0.5, 0.5});
}

void expect_values(const Factor& f, std::vector<double> want, double tol = 1e-12) {
  ASSERT_EQ(f.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(f.values()[i], want[i], tol) << i;
}

}  // namespace

TEST(Factor, ConstructorRealignsToIdOrder) {
  Factor f({{D, 3}, {A, 2}}, {0.2, 0.9, 0.3, 0.6, 0.6, 0.1});
  EXPECT_EQ(f.ids(), (VarSet{A, D}));
  expect_values(f, {0.2, 0.3, 0.6, 0.9, 0.6, 0.1});
  const int at[] = {1, 2};
  EXPECT_DOUBLE_EQ(f.at(at), 0.1);
  EXPECT_EQ(f.values_in(std::vector<VarId>{D, A}), (std::vector<double>{0.2, 0.9, 0.3, 0.6, 0.6, 0.1}));
}

TEST(Factor, ShapeMismatchThrows) {
  EXPECT_THROW(Factor({{A, 2}}, {1.0, 2.0, 3.0}), SchemaError);
  EXPECT_THROW(multiply(Factor({{A, 2}}, {1, 1}), Factor({{A, 3}}, {1, 1, 1})), SchemaError);
}

TEST(Factor, MultiplyByOnesIsIdentity) {
  const Factor f({{A, 2}}, {0.3, 0.7});
  expect_values(multiply(f, Factor::ones({{A, 2}})), {0.3, 0.7});
}

TEST(Factor, MultiplyTableEntry) {
  const auto h = multiply(f_ad(), g_abc());
  EXPECT_EQ(h.ids(), (VarSet{A, B, C, D}));
  const int z[] = {0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(h.at(z), 0.2);
  const int z2[] = {1, 0, 1, 2};  // f(A1,D2)=0.1, g(1,0,1)=0.8
  EXPECT_NEAR(h.at(z2), 0.08, 1e-15);
}

TEST(Factor, MultiplyOuterProduct) {
  const auto h = multiply(Factor({{A, 2}}, {0.3, 0.7}), Factor({{B, 2}}, {0.5, 0.5}));
  expect_values(h, {0.15, 0.15, 0.35, 0.35});
}

TEST(Factor, SumOutColumns) {
  const auto g = sum_out(f_ad(), {A});
  EXPECT_EQ(g.ids(), (VarSet{D}));
  expect_values(g, {1.1, 0.9, 0.7});
  expect_values(sum_out(f_ad(), {}), {0.2, 0.3, 0.6, 0.9, 0.6, 0.1});
  const auto s = sum_out(Factor({{A, 2}}, {0.3, 0.7}), {A});
  EXPECT_TRUE(s.vars().empty());
  expect_values(s, {1.0});
}

TEST(Factor, Project) {
  EXPECT_TRUE(approx_equal(project(f_ad(), {D}), sum_out(f_ad(), {A}), 0.0));
  EXPECT_TRUE(approx_equal(project(f_ad(), {A, D}), f_ad(), 0.0));
  expect_values(project(g_abc(), {A}), {2.0, 2.0});
}

TEST(Factor, Normalize) {
  expect_values(normalize(Factor({{A, 2}}, {2, 2})), {0.5, 0.5});
  expect_values(normalize(Factor({{A, 2}}, {0.2, 0.6})), {0.25, 0.75});
  EXPECT_THROW(normalize(Factor({{A, 2}}, {0, 0})), NormalizationError);
}

TEST(Factor, FunctionalPredicate) {
  constexpr VarId X = 0, Y = 1;
  EXPECT_TRUE(is_functional_cpt(Factor({{X, 2}, {Y, 2}}, {0, 1, 1, 0}), Y));
  EXPECT_TRUE(is_functional_cpt(Factor({{A, 2}, {B, 3}}, {0, 1, 0, 0, 0, 1}), B));
  EXPECT_FALSE(is_functional_cpt(g_abc(), C));
  EXPECT_THROW(is_functional_cpt(f_ad(), B), SchemaError);
}

TEST(Factor, SetAlgebra) {
  EXPECT_EQ(make_varset({3, 1, 3, 0}), (VarSet{0, 1, 3}));
  EXPECT_EQ(set_union({0, 2}, {1, 2}), (VarSet{0, 1, 2}));
  EXPECT_EQ(set_intersection({0, 2}, {1, 2}), (VarSet{2}));
  EXPECT_EQ(set_difference({0, 1, 2}, {1}), (VarSet{0, 2}));
  EXPECT_TRUE(is_subset({1}, {0, 1}));
  EXPECT_FALSE(is_subset({3}, {0, 1}));
}

TEST(FactorIdentities, RandomInstances) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    EXPECT_LE(ref::check_sum_order(rng), 1e-12);
    EXPECT_LE(ref::check_sum_distributes(rng), 1e-12);
    EXPECT_LE(ref::check_functional_sum(rng), 1e-12);
    EXPECT_LE(ref::check_functional_split(rng), 1e-12);
    EXPECT_LE(ref::check_functional_duplicate(rng), 1e-12);
  }
}

TEST(FactorIdentities, NonFunctionalSplitFails) {
  // Sanity: the split identity needs a functional CPT.
  const Factor f({{A, 2}, {B, 2}}, {0.5, 0.5, 0.5, 0.5});
  const Factor g({{B, 2}, {C, 2}}, {1, 2, 3, 4});
  const Factor h({{B, 2}, {D, 2}}, {1, 2, 3, 4});
  const auto G = multiply(f, g), H = multiply(f, h);
  EXPECT_GT(max_abs_diff(sum_out(multiply(G, H), {B}), multiply(sum_out(G, {B}), sum_out(H, {B}))),
            1e-3);
}
