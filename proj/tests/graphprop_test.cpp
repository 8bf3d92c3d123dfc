#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "graph_oracle.hpp"
#include "ssl_lab/graphprop.hpp"

using namespace ssl_lab;
using namespace ssl_lab::testing;

TEST(Features, RowsNormalizedAndZeroRowsRejected) {
  FeatureMatrix f = FeatureMatrix::from(Matrix::from_rows({{3, 4}, {0, -2}}));
  EXPECT_NEAR(f.normalized(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(f.normalized(1, 1), -1.0, 1e-15);
  try {
    FeatureMatrix::from(Matrix::from_rows({{1, 0}, {0, 0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroFeatureRow);
  }
}

TEST(Affinity, WorkedValues) {
  auto same = build_affinity(FeatureMatrix::from(Matrix::from_rows({{1, 2}, {2, 4}})), 1, 3.0);
  EXPECT_DOUBLE_EQ(same.at(0, 1), 1.0);
  auto orth = build_affinity(FeatureMatrix::from(Matrix::from_rows({{1, 0}, {0, 1}})), 1, 3.0);
  EXPECT_EQ(orth.at(0, 1), 0.0);
  // cos(60 degrees) = 0.5
  auto half = build_affinity(FeatureMatrix::from(Matrix::from_rows({{1, 0}, {0.5, std::sqrt(3.0) / 2}})), 1, 3.0);
  EXPECT_NEAR(half.at(0, 1), 0.125, 1e-15);
  EXPECT_THROW(build_affinity(FeatureMatrix::from(Matrix::from_rows({{1, 0}, {0, 1}})), 2, 3.0), Error);
  EXPECT_THROW(build_affinity(FeatureMatrix::from(Matrix::from_rows({{1, 0}, {0, 1}})), 1, 0.5), Error);
}

TEST(Affinity, StructuralInvariantsOnRandomFeatures) {
  Rng rng(1);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 3 + uniform_index(rng, 40);
    FeatureMatrix x = FeatureMatrix::from(random_features(n, 1 + uniform_index(rng, 6), rng));
    const std::size_t k = 1 + uniform_index(rng, n - 1);
    SparseMatrix w = build_affinity(x, k, 1.0 + uniform01(rng) * 4);
    EXPECT_TRUE(w.symmetric());
    EXPECT_LE(w.nnz(), 2 * k * n);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(w.at(i, i), 0.0);
      for (const auto& e : w.row(i)) {
        EXPECT_GE(e.value, 0.0);
        EXPECT_LE(e.value, 1.0);
      }
    }
  }
}

TEST(Affinity, GrowingKNeverRemovesEdges) {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 5 + uniform_index(rng, 25);
    // coarse grid features create many exact cosine ties
    Matrix raw(n, 2);
    for (double& v : raw.values()) v = 1.0 + static_cast<double>(uniform_index(rng, 3));
    FeatureMatrix x = FeatureMatrix::from(raw);
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const auto small = knn_cosine(x, k), large = knn_cosine(x, k + 1);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m < k; ++m) EXPECT_EQ(small[i][m].first, large[i][m].first);
      SparseMatrix a = build_affinity(x, k, 2.0), b = build_affinity(x, k + 1, 2.0);
      for (std::size_t i = 0; i < n; ++i)
        for (const auto& e : a.row(i)) EXPECT_EQ(b.at(i, e.col), e.value);
    }
  }
}

TEST(Normalize, TwoNodeAndStar) {
  SparseMatrix two = SparseMatrix::from_dense(Matrix::from_rows({{0, 1}, {1, 0}}));
  EXPECT_DOUBLE_EQ(normalize_symmetric(two).at(0, 1), 1.0);
  SparseMatrix star = SparseMatrix::from_dense(Matrix::from_rows({{0, 1, 1, 1}, {1, 0, 0, 0}, {1, 0, 0, 0}, {1, 0, 0, 0}}));
  SparseMatrix s = normalize_symmetric(star);
  for (std::size_t leaf = 1; leaf < 4; ++leaf) {
    EXPECT_NEAR(s.at(0, leaf), 1.0 / std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(s.at(leaf, 0), 1.0 / std::sqrt(3.0), 1e-15);
  }
}

TEST(Normalize, SpectralRadiusAtMostOne) {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix s = normalize_symmetric(random_graph(10, rng)).dense();
    Eigen::MatrixXd m(10, 10);
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j) m(i, j) = s(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    EXPECT_LE(eig.eigenvalues().cwiseAbs().maxCoeff(), 1.0 + 1e-12);
  }
}

TEST(Propagate, MatchesDenseSolveOnRandomGraphs) {
  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + uniform_index(rng, 29);
    PropagationCase pc = random_propagation_case(n, 4, 0.99, rng);
    PropagationSolve got = propagate(pc.s, pc.y, pc.alpha);
    EXPECT_LE(max_abs_diff(got.F, dense_propagation(pc.s, pc.y, pc.alpha)), 1e-5) << "rep " << rep;
    EXPECT_LE(got.residual, 1e-5);
  }
}

TEST(Propagate, SmallAlphaApproachesIdentityAndIsolatedLabeledNode) {
  Rng rng(5);
  PropagationCase pc = random_propagation_case(12, 3, 1e-9, rng);
  EXPECT_LE(max_abs_diff(propagate(pc.s, pc.y, pc.alpha).F, pc.y), 1e-8);

  // node 2 has no edges
  SparseMatrix w = SparseMatrix::from_dense(Matrix::from_rows({{0, 1, 0}, {1, 0, 0}, {0, 0, 0}}));
  Matrix y = Matrix::from_rows({{1, 0}, {0, 0}, {0, 1}});
  PropagationSolve sol = propagate(normalize_symmetric(w), y, 0.99);
  EXPECT_NEAR(sol.F(2, 0), 0.0, 1e-12);
  EXPECT_NEAR(sol.F(2, 1), 1.0, 1e-12);
  EXPECT_THROW(propagate(normalize_symmetric(w), y, 1.0), Error);
}

TEST(Propagate, FallbackWhenConjugateGradientIsCutShort) {
  Rng rng(6);
  PropagationCase pc = random_propagation_case(30, 4, 0.99, rng);
  PropagationOptions opt;
  opt.cg_max_iter = 2;
  PropagationSolve sol = propagate(pc.s, pc.y, pc.alpha, opt);
  EXPECT_TRUE(sol.used_fallback);
  EXPECT_LE(sol.residual, 1e-5);
  EXPECT_LE(max_abs_diff(sol.F, dense_propagation(pc.s, pc.y, pc.alpha)), 1e-5);
  opt.fixed_point_max_iter = 3;
  try {
    propagate(pc.s, pc.y, pc.alpha, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonConvergence);
  }
}

TEST(Certainty, WorkedValues) {
  auto w = certainty_weights(Matrix::from_rows({{0, 3, 0, 0}, {1, 1, 1, 1}, {0.7, 0.1, 0.1, 0.1}, {0, 0, 0, 0}, {-1, 2, 0, 0}}));
  EXPECT_NEAR(w[0], 1.0, 1e-15);
  EXPECT_NEAR(w[1], 0.0, 1e-15);
  const double h = -(0.7 * std::log(0.7) + 3 * 0.1 * std::log(0.1));
  EXPECT_NEAR(w[2], 1.0 - h / std::log(4.0), 1e-15);
  EXPECT_NEAR(w[2], 0.3216, 1e-4);
  EXPECT_EQ(w[3], 0.0);
  EXPECT_NEAR(w[4], 1.0, 1e-15);
}

TEST(ClassWeights, TableTrainingCounts) {
  auto z = class_weights({3649, 2760, 2242, 1294}, 9945);
  EXPECT_NEAR(z[0], 9945.0 / (4 * 3649), 1e-15);
  EXPECT_NEAR(z[0], 0.6813, 1e-4);
  EXPECT_NEAR(z[3], 1.9214, 1e-4);
  double weighted = 0.0;
  const std::vector<std::size_t> counts{3649, 2760, 2242, 1294};
  for (std::size_t c = 0; c < 4; ++c) weighted += z[c] * static_cast<double>(counts[c]);
  EXPECT_NEAR(weighted / 9945.0, 1.0, 1e-12);
  for (double v : class_weights({7, 7, 7}, 21)) EXPECT_DOUBLE_EQ(v, 1.0);
  EXPECT_THROW(class_weights({1, 0}, 1), Error);
}

TEST(LabelPropagation, TinyInstanceMatchesDenseOracle) {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 8;
    FeatureMatrix x = FeatureMatrix::from(random_features(n, 3, rng));
    std::vector<std::size_t> labels(n, 99);
    labels[0] = 0;
    labels[1] = 1;
    labels[2] = 2;
    PropagationResult r = label_propagation(x, labels, 3, 50, 3.0, 0.99);
    Matrix y(n, 3);
    for (std::size_t i = 0; i < 3; ++i) y(i, i) = 1.0;
    const Matrix f = dense_propagation(normalize_symmetric(build_affinity(x, n - 1, 3.0)), y, 0.99);
    for (std::size_t i = 0; i < n; ++i) {
      if (i < 3) {
        EXPECT_EQ(r.pseudo_labels[i], i);
        EXPECT_EQ(r.certainty[i], 1.0);
      } else {
        EXPECT_EQ(r.pseudo_labels[i], argmax(f.row(i)));
      }
    }
  }
}

TEST(Dump, TsvLines) {
  SparseMatrix w = SparseMatrix::from_dense(Matrix::from_rows({{0, 0.25}, {0.25, 0}}));
  std::ostringstream out;
  dump_graph_tsv(out, w);
  EXPECT_EQ(out.str(), "0\t1\t0.25\n1\t0\t0.25\n");
}
