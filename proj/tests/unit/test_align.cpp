#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "prosody_eval/align.hpp"
#include "support.hpp"

using namespace prosody_eval;

namespace {

double euclid(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.cols(); ++d) s += (a(i, d) - b(j, d)) * (a(i, d) - b(j, d));
  return std::sqrt(s);
}

// Walks every monotone path from (0,0), accumulating cost in path order.
void enumerate(const Matrix& a, const Matrix& b, std::size_t i, std::size_t j, double acc, double& best) {
  acc += euclid(a, i, b, j);
  if (i + 1 == a.rows() && j + 1 == b.rows()) {
    best = std::min(best, acc);
    return;
  }
  if (i + 1 < a.rows() && j + 1 < b.rows()) enumerate(a, b, i + 1, j + 1, acc, best);
  if (i + 1 < a.rows()) enumerate(a, b, i + 1, j, acc, best);
  if (j + 1 < b.rows()) enumerate(a, b, i, j + 1, acc, best);
}

double brute_force(const Matrix& a, const Matrix& b) {
  double best = std::numeric_limits<double>::infinity();
  enumerate(a, b, 0, 0, 0.0, best);
  return best;
}

double path_cost(const Matrix& a, const Matrix& b, const WarpPath& p) {
  double s = 0.0;
  for (const auto& st : p.pairs) s += euclid(a, st.ref, b, st.pred);
  return s;
}

Matrix random_matrix(std::mt19937& rng, std::size_t rows, std::size_t cols) {
  std::uniform_int_distribution<int> v(-3, 3);
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = v(rng);
  return m;
}

}  // namespace

TEST(Dtw, IdentityIsDiagonal) {
  const Matrix m = Matrix::from_rows({{1, 2}, {3, 1}, {0, 0}, {5, 5}});
  const DtwResult r = dtw(m, m);
  EXPECT_EQ(r.total_cost, 0.0);
  ASSERT_EQ(r.path.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(r.path.pairs[k], (WarpStep{k, k}));
}

TEST(Dtw, RepeatedFrameExample) {
  const Matrix ref = Matrix::from_rows({{1}, {2}, {3}});
  const Matrix pred = Matrix::from_rows({{1}, {2}, {2}, {3}});
  const DtwResult r = dtw(ref, pred);
  EXPECT_EQ(r.total_cost, 0.0);
  const std::vector<WarpStep> expected{{0, 0}, {1, 1}, {1, 2}, {2, 3}};
  EXPECT_EQ(r.path.pairs, expected);
  EXPECT_EQ(brute_force(ref, pred), 0.0);
}

TEST(Dtw, Errors) {
  EXPECT_THROW(dtw(Matrix(3, 2), Matrix(4, 3)), Error);
  try {
    dtw(Matrix(3, 2), Matrix(4, 3));
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("dimension mismatch"), std::string::npos);
  }
  EXPECT_THROW(dtw(Matrix(), Matrix(2, 2)), Error);
}

TEST(Dtw, MatchesExhaustiveEnumeration) {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<std::size_t> len(1, 7);
  std::uniform_int_distribution<std::size_t> dim(1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = dim(rng);
    const Matrix a = random_matrix(rng, len(rng), d);
    const Matrix b = random_matrix(rng, len(rng), d);
    const DtwResult r = dtw(a, b);
    EXPECT_EQ(r.total_cost, brute_force(a, b)) << "trial " << trial;
    r.path.validate(a.rows(), b.rows());
    EXPECT_EQ(path_cost(a, b, r.path), r.total_cost);
  }
}

TEST(Dtw, BandConstrainsThePath) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = random_matrix(rng, 20, 2);
    const Matrix b = random_matrix(rng, 26, 2);
    const DtwResult free = dtw(a, b);
    const DtwResult wide = dtw(a, b, DtwOptions{100});
    EXPECT_EQ(free.total_cost, wide.total_cost);
    const DtwResult narrow = dtw(a, b, DtwOptions{2});
    EXPECT_GE(narrow.total_cost, free.total_cost);
    narrow.path.validate(a.rows(), b.rows());
    for (const auto& st : narrow.path.pairs) {
      const double centre = static_cast<double>(st.pred) * (a.rows() - 1) / (b.rows() - 1);
      EXPECT_LE(std::abs(static_cast<double>(st.ref) - centre), 2.0 + 1e-9);
    }
  }
}

TEST(WarpPath, ValidateRejectsBrokenPaths) {
  EXPECT_THROW((WarpPath{{{0, 0}, {2, 1}}}.validate(3, 2)), Error);
  EXPECT_THROW((WarpPath{{{0, 0}, {1, 1}}}.validate(3, 2)), Error);
  EXPECT_THROW((WarpPath{{{1, 0}, {2, 1}}}.validate(3, 2)), Error);
  EXPECT_NO_THROW((WarpPath{{{0, 0}, {1, 0}, {2, 1}}}.validate(3, 2)));
}

TEST(ApplyWarp, Examples) {
  const WarpPath diag{{{0, 0}, {1, 1}, {2, 2}}};
  const std::vector<int> x{1, 2, 3};
  const std::vector<int> y{4, 5, 6};
  const std::vector<std::pair<int, int>> zipped{{1, 4}, {2, 5}, {3, 6}};
  EXPECT_EQ(apply_warp(diag, x, y), zipped);

  const WarpPath p{{{0, 0}, {1, 1}, {1, 2}, {2, 3}}};
  const std::vector<char> ref{'a', 'b', 'c'};
  const std::vector<char> pred{'p', 'q', 'r', 's'};
  const std::vector<std::pair<char, char>> expected{{'a', 'p'}, {'b', 'q'}, {'b', 'r'}, {'c', 's'}};
  EXPECT_EQ(apply_warp(p, ref, pred), expected);

  const std::vector<char> short_ref{'a', 'b'};
  EXPECT_THROW(apply_warp(p, short_ref, pred), Error);
}

TEST(ApplyWarp, CsvDump) {
  testing_support::TempDir dir;
  write_warp_csv((dir / "w.csv").string(), WarpPath{{{0, 0}, {1, 1}}});
  const std::string text = testing_support::read_text(dir / "w.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}
