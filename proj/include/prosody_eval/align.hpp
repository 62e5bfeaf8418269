#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prosody_eval/common.hpp"

namespace prosody_eval {

struct WarpStep {
  std::size_t ref;
  std::size_t pred;

  bool operator==(const WarpStep&) const = default;
};

/// Monotone, continuous alignment from (0,0) to (T_ref-1, T_pred-1).
struct WarpPath {
  std::vector<WarpStep> pairs;

  std::size_t size() const { return pairs.size(); }
  /// Throws if the path is not a valid warp for the given lengths.
  void validate(std::size_t ref_len, std::size_t pred_len) const;
};

struct DtwOptions {
  /// Sakoe-Chiba half-width in frames around the scaled diagonal; unset means unconstrained.
  std::optional<std::size_t> band;
};

struct DtwResult {
  WarpPath path;
  double total_cost = 0.0;
};

/// Euclidean-distance DTW. Backtrace ties prefer the diagonal step, then a
/// reference step, then a prediction step.
DtwResult dtw(const Matrix& ref, const Matrix& pred, const DtwOptions& options = {});

template <typename T>
std::vector<std::pair<T, T>> apply_warp(const WarpPath& path, std::span<const T> ref_seq,
                                        std::span<const T> pred_seq) {
  if (path.pairs.empty()) throw Error("empty warp path");
  const WarpStep last = path.pairs.back();
  if (ref_seq.size() != last.ref + 1 || pred_seq.size() != last.pred + 1)
    throw Error("sequence length mismatch with warp path: path ends at (" + std::to_string(last.ref) + ", " +
                std::to_string(last.pred) + ") but sequences have lengths " + std::to_string(ref_seq.size()) +
                " and " + std::to_string(pred_seq.size()));
  std::vector<std::pair<T, T>> out;
  out.reserve(path.pairs.size());
  for (const WarpStep& s : path.pairs) out.emplace_back(ref_seq[s.ref], pred_seq[s.pred]);
  return out;
}

template <typename T>
std::vector<std::pair<T, T>> apply_warp(const WarpPath& path, const std::vector<T>& ref_seq,
                                        const std::vector<T>& pred_seq) {
  return apply_warp<T>(path, std::span<const T>(ref_seq), std::span<const T>(pred_seq));
}

void write_warp_csv(const std::string& path, const WarpPath& warp);

}  // namespace prosody_eval
