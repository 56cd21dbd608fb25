#pragma once

// Meta-evaluation measures: Cohen's kappa (graded and binarized), Kendall's
// tau-b, Spearman's rho, and NDCG@k with unjudged documents as gain 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "umbrela/errors.hpp"
#include "umbrela/trec_io.hpp"

namespace umbrela {

struct LabelPair {
  RelevanceLabel human;
  RelevanceLabel model;
};

// {0,1} -> 0 (non-relevant), {2,3} -> 1 (relevant).
inline constexpr int binarize(RelevanceLabel label) noexcept { return label.value() >= 2 ? 1 : 0; }

// Chance-corrected agreement over `categories` classes. When chance agreement
// is 1 (both annotators constant and equal) the result is defined as 1.
inline double cohen_kappa(std::span<const LabelPair> pairs, int categories) {
  if (pairs.empty()) throw EmptyInput("label pairs");
  if (categories <= 0) throw CategoryOutOfRange(0, categories);
  const auto k = static_cast<std::size_t>(categories);
  std::vector<long long> rows(k, 0);
  std::vector<long long> cols(k, 0);
  long long agree = 0;
  for (const auto& p : pairs) {
    const int h = p.human.value();
    const int m = p.model.value();
    if (h >= categories) throw CategoryOutOfRange(h, categories);
    if (m >= categories) throw CategoryOutOfRange(m, categories);
    ++rows[h];
    ++cols[m];
    if (h == m) ++agree;
  }
  // kappa = (N*agree - sum r_i c_i) / (N^2 - sum r_i c_i), exact in integers.
  const auto n = static_cast<long long>(pairs.size());
  long long chance = 0;
  for (std::size_t i = 0; i < k; ++i) chance += rows[i] * cols[i];
  const long long denom = n * n - chance;
  if (denom == 0) return 1.0;
  return static_cast<double>(n * agree - chance) / static_cast<double>(denom);
}

inline double cohen_kappa_binary(std::span<const LabelPair> pairs) {
  std::vector<LabelPair> bin;
  bin.reserve(pairs.size());
  for (const auto& p : pairs) {
    bin.push_back({RelevanceLabel(binarize(p.human)), RelevanceLabel(binarize(p.model))});
  }
  return cohen_kappa(bin, 2);
}

enum class TauVariant { B, A };

// Kendall tau over all unordered index pairs. Tau-b is tie-adjusted; tau-a
// divides by the total pair count, so ties pull it toward 0.
inline double kendall_tau(std::span<const double> x, std::span<const double> y,
                          TauVariant variant = TauVariant::B) {
  if (x.size() != y.size()) throw LengthMismatch(x.size(), y.size());
  if (x.size() < 2) throw DegenerateInput("Kendall tau needs at least two items");
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ++ties_x;
      } else if (dy == 0) {
        ++ties_y;
      } else if ((dx > 0) == (dy > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double nx = static_cast<double>(concordant + discordant + ties_x);
  const double ny = static_cast<double>(concordant + discordant + ties_y);
  if (nx == 0 || ny == 0) throw DegenerateInput("Kendall tau of a constant vector");
  if (variant == TauVariant::A) {
    const auto n = static_cast<double>(x.size());
    return static_cast<double>(concordant - discordant) / (n * (n - 1) / 2.0);
  }
  return static_cast<double>(concordant - discordant) / std::sqrt(nx * ny);
}

// 1-based ranks, ascending by value, ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw DegenerateInput("correlation of a constant vector");
  return sxy / std::sqrt(sxx * syy);
}

// Pearson correlation of average-rank vectors.
inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw LengthMismatch(x.size(), y.size());
  if (x.size() < 2) throw DegenerateInput("Spearman rho needs at least two items");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

// ---------------------------------------------------------------------------
// NDCG

enum class Gain { Linear, Exponential };

inline double gain_value(int grade, Gain gain) {
  return gain == Gain::Linear ? static_cast<double>(grade) : std::exp2(grade) - 1.0;
}

// DCG@k over `ranking` with log2(i+1) discount; documents absent from
// `judged` contribute zero gain. Returns 0 when the ideal DCG is 0.
inline double ndcg_at_k(std::span<const std::string> ranking,
                        const std::map<std::string, int>& judged, std::size_t k,
                        Gain gain = Gain::Linear) {
  if (k == 0) throw Error("NDCG cutoff must be at least 1");
  double dcg = 0.0;
  const auto depth = std::min(k, ranking.size());
  for (std::size_t i = 0; i < depth; ++i) {
    auto it = judged.find(ranking[i]);
    if (it == judged.end()) continue;
    dcg += gain_value(it->second, gain) / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> grades;
  grades.reserve(judged.size());
  for (const auto& [_, g] : judged) grades.push_back(g);
  std::sort(grades.begin(), grades.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
    idcg += gain_value(grades[i], gain) / std::log2(static_cast<double>(i) + 2.0);
  }
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

// Mean NDCG@k over every query judged in `qrels`; queries the run does not
// answer score 0.
inline double mean_ndcg(const SystemRun& run, const QrelsSet& qrels, std::size_t k,
                        Gain gain = Gain::Linear) {
  const auto queries = qrels.query_ids();
  if (queries.empty()) throw EmptyInput("qrels");
  double sum = 0.0;
  for (const auto& qid : queries) {
    const auto ranking = run.ranked_doc_ids(qid);
    sum += ndcg_at_k(ranking, qrels.judged_for(qid), k, gain);
  }
  return sum / static_cast<double>(queries.size());
}

}  // namespace umbrela
