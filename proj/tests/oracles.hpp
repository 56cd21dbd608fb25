#pragma once

// Reference implementations written independently of the library, used only
// to cross-check it. They favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline int sign(double v) { return (v > 0) - (v < 0); }

// tau-b in the n0/n1/n2 formulation: ties counted per tie-group.
inline double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double n0 = n * (n - 1) / 2;
  auto tie_pairs = [](std::vector<double> v) {
    std::map<double, double> groups;
    for (double e : v) groups[e] += 1;
    double t = 0;
    for (auto [_, c] : groups) t += c * (c - 1) / 2;
    return t;
  };
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) s += sign(x[i] - x[j]) * sign(y[i] - y[j]);
  }
  return s / std::sqrt((n0 - tie_pairs(x)) * (n0 - tie_pairs(y)));
}

inline double kendall_tau_a(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) s += sign(x[i] - x[j]) * sign(y[i] - y[j]);
  }
  return s / (n * (n - 1) / 2);
}

// Rank of each element as (#smaller) + (#equal + 1) / 2.
inline std::vector<double> mid_ranks(const std::vector<double>& v) {
  std::vector<double> r;
  for (double a : v) {
    double less = 0, equal = 0;
    for (double b : v) {
      less += b < a;
      equal += b == a;
    }
    r.push_back(less + (equal + 1) / 2);
  }
  return r;
}

inline double pearson_sums(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson_sums(mid_ranks(x), mid_ranks(y));
}

// Contingency table of observed proportions, then (p_o - p_e) / (1 - p_e).
inline double kappa(const std::vector<std::pair<int, int>>& pairs, int categories) {
  std::vector<std::vector<double>> table(categories, std::vector<double>(categories, 0.0));
  const double n = static_cast<double>(pairs.size());
  for (auto [a, b] : pairs) table[a][b] += 1.0 / n;
  double po = 0, pe = 0;
  for (int i = 0; i < categories; ++i) {
    po += table[i][i];
    double row = 0, col = 0;
    for (int j = 0; j < categories; ++j) {
      row += table[i][j];
      col += table[j][i];
    }
    pe += row * col;
  }
  if (std::abs(1 - pe) < 1e-15) return 1.0;
  return (po - pe) / (1 - pe);
}

// DCG by direct summation over graded positions; ideal from sorted grades.
inline double ndcg(const std::vector<int>& ranked_grades, std::vector<int> all_grades, int k) {
  double dcg = 0, idcg = 0;
  for (int i = 0; i < k && i < static_cast<int>(ranked_grades.size()); ++i) {
    dcg += ranked_grades[i] / (std::log(i + 2.0) / std::log(2.0));
  }
  std::sort(all_grades.rbegin(), all_grades.rend());
  for (int i = 0; i < k && i < static_cast<int>(all_grades.size()); ++i) {
    idcg += all_grades[i] / (std::log(i + 2.0) / std::log(2.0));
  }
  return idcg > 0 ? dcg / idcg : 0.0;
}

}  // namespace oracle
