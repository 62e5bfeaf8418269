#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "prosody_eval/align.hpp"

namespace prosody_eval {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double euclidean(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

bool in_band(std::size_t i, std::size_t j, std::size_t n_ref, std::size_t n_pred, std::optional<std::size_t> band) {
  if (!band) return true;
  // distance from the straight line joining the two corners, in reference frames
  const double scale = n_pred > 1 ? static_cast<double>(n_ref - 1) / static_cast<double>(n_pred - 1) : 0.0;
  return std::abs(static_cast<double>(i) - scale * static_cast<double>(j)) <= static_cast<double>(*band);
}

}  // namespace

void WarpPath::validate(std::size_t ref_len, std::size_t pred_len) const {
  if (pairs.empty()) throw Error("empty warp path");
  if (pairs.front() != WarpStep{0, 0}) throw Error("warp path must start at (0, 0)");
  if (pairs.back() != WarpStep{ref_len - 1, pred_len - 1}) throw Error("warp path must end at the last frames");
  for (std::size_t k = 1; k < pairs.size(); ++k) {
    const std::size_t di = pairs[k].ref - pairs[k - 1].ref;
    const std::size_t dj = pairs[k].pred - pairs[k - 1].pred;
    if (pairs[k].ref < pairs[k - 1].ref || pairs[k].pred < pairs[k - 1].pred || di > 1 || dj > 1 ||
        (di == 0 && dj == 0))
      throw Error("warp path is not monotone and continuous at step " + std::to_string(k));
  }
}

DtwResult dtw(const Matrix& ref, const Matrix& pred, const DtwOptions& options) {
  if (ref.empty() || pred.empty()) throw Error("dtw: empty input");
  if (ref.cols() != pred.cols())
    throw Error("dimension mismatch: " + std::to_string(ref.cols()) + " vs " + std::to_string(pred.cols()));

  const std::size_t n = ref.rows();
  const std::size_t m = pred.rows();
  Matrix cost(n, m, kInf);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (!in_band(i, j, n, m, options.band)) continue;
      const double local = euclidean(ref.row(i), pred.row(j));
      if (i == 0 && j == 0) {
        cost(i, j) = local;
        continue;
      }
      double best = kInf;
      if (i > 0 && j > 0) best = cost(i - 1, j - 1);
      if (i > 0) best = std::min(best, cost(i - 1, j));
      if (j > 0) best = std::min(best, cost(i, j - 1));
      if (best < kInf) cost(i, j) = local + best;
    }
  }
  if (!(cost(n - 1, m - 1) < kInf)) throw Error("dtw: band too narrow to connect the sequences");

  DtwResult result;
  result.total_cost = cost(n - 1, m - 1);
  std::vector<WarpStep>& path = result.path.pairs;
  std::size_t i = n - 1;
  std::size_t j = m - 1;
  path.push_back({i, j});
  while (i > 0 || j > 0) {
    const double diag = (i > 0 && j > 0) ? cost(i - 1, j - 1) : kInf;
    const double up = i > 0 ? cost(i - 1, j) : kInf;
    const double left = j > 0 ? cost(i, j - 1) : kInf;
    if (diag <= up && diag <= left) {
      --i;
      --j;
    } else if (up <= left) {
      --i;
    } else {
      --j;
    }
    path.push_back({i, j});
  }
  std::reverse(path.begin(), path.end());
  return result;
}

void write_warp_csv(const std::string& path, const WarpPath& warp) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write warp file: " + path);
  out << "ref_index,pred_index\n";
  for (const WarpStep& s : warp.pairs) out << s.ref << ',' << s.pred << '\n';
}

}  // namespace prosody_eval
