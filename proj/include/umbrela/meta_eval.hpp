#pragma once

// Leaderboards under human vs model qrels, their rank correlation, per-label
// agreement, and the equivalence verdicts used to compare two evaluations.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "umbrela/errors.hpp"
#include "umbrela/judge_engine.hpp"
#include "umbrela/metrics.hpp"
#include "umbrela/score_extract.hpp"
#include "umbrela/trec_io.hpp"

namespace umbrela {

inline constexpr int kReportSchemaVersion = 1;

inline std::string to_string(Gain g) { return g == Gain::Linear ? "linear" : "exponential"; }
inline std::string to_string(TauVariant v) { return v == TauVariant::B ? "tau_b" : "tau_a"; }

struct LeaderboardRow {
  std::string run_tag;
  double score = 0.0;
  bool operator==(const LeaderboardRow&) const = default;
};

struct Leaderboard {
  std::string provenance;
  std::size_t k = 10;
  Gain gain = Gain::Linear;
  std::vector<LeaderboardRow> rows;  // descending score, ties by run_tag

  const LeaderboardRow* find(const std::string& tag) const {
    for (const auto& r : rows) {
      if (r.run_tag == tag) return &r;
    }
    return nullptr;
  }
};

inline Leaderboard build_leaderboard(const std::vector<SystemRun>& runs, const QrelsSet& qrels,
                                     std::size_t k = 10, Gain gain = Gain::Linear) {
  if (runs.empty()) throw EmptyInput("runs");
  if (qrels.empty()) throw EmptyInput("qrels");
  std::set<std::string> tags;
  for (const auto& r : runs) {
    if (!tags.insert(r.run_tag).second) throw DuplicateRunTag(r.run_tag);
  }
  Leaderboard board{provenance_name(qrels.provenance()), k, gain, {}};
  board.rows.reserve(runs.size());
  for (const auto& r : runs) board.rows.push_back({r.run_tag, mean_ndcg(r, qrels, k, gain)});
  std::sort(board.rows.begin(), board.rows.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.run_tag < b.run_tag;
  });
  return board;
}

struct RankCorrelation {
  double spearman = 0.0;
  double kendall = 0.0;
};

// Score vectors of `a` and `b`, aligned by run tag.
inline std::pair<std::vector<double>, std::vector<double>> aligned_scores(const Leaderboard& a,
                                                                          const Leaderboard& b) {
  std::map<std::string, double> sa, sb;
  for (const auto& r : a.rows) sa.emplace(r.run_tag, r.score);
  for (const auto& r : b.rows) sb.emplace(r.run_tag, r.score);
  if (sa.size() != sb.size()) {
    throw RunSetMismatch(std::to_string(sa.size()) + " vs " + std::to_string(sb.size()) + " runs");
  }
  std::vector<double> x, y;
  for (const auto& [tag, score] : sa) {
    auto it = sb.find(tag);
    if (it == sb.end()) throw RunSetMismatch("run " + tag + " missing from one leaderboard");
    x.push_back(score);
    y.push_back(it->second);
  }
  return {std::move(x), std::move(y)};
}

inline RankCorrelation compare_leaderboards(const Leaderboard& a, const Leaderboard& b) {
  const auto [x, y] = aligned_scores(a, b);
  return {spearman_rho(x, y), kendall_tau(x, y)};
}

struct Agreement {
  double kappa_scale = 0.0;
  double kappa_binary = 0.0;
  std::size_t n_pairs = 0;
};

// Pairs are formed over the key intersection only.
inline Agreement agreement(const QrelsSet& human, const QrelsSet& model) {
  std::vector<LabelPair> pairs;
  for (const auto& [key, h] : human) {
    if (const auto* m = model.find(key)) pairs.push_back({h, *m});
  }
  if (pairs.empty()) throw EmptyIntersection();
  return {cohen_kappa(pairs, RelevanceLabel::kLevels), cohen_kappa_binary(pairs), pairs.size()};
}

// ---------------------------------------------------------------------------
// Equivalence

struct EquivalenceThresholds {
  double tau_rho_eps = 0.005;
  double kappa_eps = 0.01;

  void validate() const {
    if (!(tau_rho_eps > 0)) throw ConfigError("thresholds.tau_rho_eps", "must be positive");
    if (!(kappa_eps > 0)) throw ConfigError("thresholds.kappa_eps", "must be positive");
  }
};

// The four headline measures; any may be absent (degenerate or unreported).
struct MetricSet {
  std::optional<double> kappa_scale;
  std::optional<double> kappa_binary;
  std::optional<double> spearman;
  std::optional<double> kendall;
};

enum class Verdict { NotSignificant, Significant, Unavailable };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::NotSignificant: return "not_significant";
    case Verdict::Significant: return "significant";
    case Verdict::Unavailable: return "unavailable";
  }
  return "unavailable";
}

struct MetricComparison {
  std::string metric;
  std::optional<double> a;
  std::optional<double> b;
  std::optional<double> delta;  // |a - b|
  double threshold = 0.0;
  Verdict verdict = Verdict::Unavailable;
};

namespace detail {
// Slack for decimal thresholds such as 0.911 vs 0.916 whose binary difference
// lands a few ulps above 0.005.
inline constexpr double kThresholdSlack = 1e-9;
}  // namespace detail

// A difference within the threshold (inclusive) is not significant.
inline std::vector<MetricComparison> compare_metrics(const MetricSet& a, const MetricSet& b,
                                                     const EquivalenceThresholds& t) {
  auto one = [](std::string name, std::optional<double> x, std::optional<double> y, double eps) {
    MetricComparison c{std::move(name), x, y, std::nullopt, eps, Verdict::Unavailable};
    if (x && y) {
      c.delta = std::fabs(*x - *y);
      c.verdict = *c.delta <= eps + detail::kThresholdSlack ? Verdict::NotSignificant
                                                            : Verdict::Significant;
    }
    return c;
  };
  return {one("kappa_scale", a.kappa_scale, b.kappa_scale, t.kappa_eps),
          one("kappa_binary", a.kappa_binary, b.kappa_binary, t.kappa_eps),
          one("spearman", a.spearman, b.spearman, t.tau_rho_eps),
          one("kendall", a.kendall, b.kendall, t.tau_rho_eps)};
}

// ---------------------------------------------------------------------------
// Full report

struct MetaEvalReport {
  MetricSet metrics;
  std::optional<Percentage> invalid_rate;  // absent when no records were supplied
  std::size_t n_pairs_compared = 0;
  std::size_t n_records = 0;
  Leaderboard leaderboard_human;
  Leaderboard leaderboard_model;
  std::size_t k = 10;
  Gain gain = Gain::Linear;
  TauVariant tau = TauVariant::B;
  EquivalenceThresholds thresholds;
  std::vector<std::string> degenerate;  // metrics that could not be computed
};

inline MetaEvalReport full_report(const std::vector<SystemRun>& runs, const QrelsSet& human,
                                  const QrelsSet& model, const std::vector<JudgmentRecord>& records,
                                  std::size_t k = 10, const EquivalenceThresholds& thresholds = {},
                                  Gain gain = Gain::Linear, TauVariant tau = TauVariant::B) {
  thresholds.validate();
  MetaEvalReport report;
  report.k = k;
  report.gain = gain;
  report.tau = tau;
  report.thresholds = thresholds;

  const auto agree = agreement(human, model);
  report.metrics.kappa_scale = agree.kappa_scale;
  report.metrics.kappa_binary = agree.kappa_binary;
  report.n_pairs_compared = agree.n_pairs;

  report.leaderboard_human = build_leaderboard(runs, human, k, gain);
  report.leaderboard_model = build_leaderboard(runs, model, k, gain);

  const auto [x, y] = aligned_scores(report.leaderboard_human, report.leaderboard_model);
  try {
    report.metrics.spearman = spearman_rho(x, y);
  } catch (const DegenerateInput&) {
    report.degenerate.push_back("spearman");
  }
  try {
    report.metrics.kendall = kendall_tau(x, y, tau);
  } catch (const DegenerateInput&) {
    report.degenerate.push_back("kendall");
  }

  report.n_records = records.size();
  if (!records.empty()) report.invalid_rate = invalid_rate(records);
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {
inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
inline std::optional<double> number_or_none(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ParseError(std::string("field ") + key + " must be a number");
  return it->get<double>();
}
}  // namespace detail

inline nlohmann::json to_json(const Leaderboard& b) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < b.rows.size(); ++i) {
    rows.push_back({{"rank", i + 1}, {"run_tag", b.rows[i].run_tag}, {"ndcg", b.rows[i].score}});
  }
  return {{"provenance", b.provenance}, {"k", b.k}, {"gain", to_string(b.gain)}, {"rows", rows}};
}

inline nlohmann::json to_json(const MetricSet& m) {
  return {{"kappa_scale", detail::optional_number(m.kappa_scale)},
          {"kappa_binary", detail::optional_number(m.kappa_binary)},
          {"spearman", detail::optional_number(m.spearman)},
          {"kendall", detail::optional_number(m.kendall)}};
}

// Reads the four measures from a report document or a bare reference object.
inline MetricSet metric_set_from_json(const nlohmann::json& j) {
  const auto& src = j.contains("metrics") ? j.at("metrics") : j;
  return MetricSet{detail::number_or_none(src, "kappa_scale"),
                   detail::number_or_none(src, "kappa_binary"),
                   detail::number_or_none(src, "spearman"), detail::number_or_none(src, "kendall")};
}

inline nlohmann::json to_json(const std::vector<MetricComparison>& comparisons) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& c : comparisons) {
    out[c.metric] = {{"a", detail::optional_number(c.a)},
                     {"b", detail::optional_number(c.b)},
                     {"delta", detail::optional_number(c.delta)},
                     {"threshold", c.threshold},
                     {"verdict", to_string(c.verdict)}};
  }
  return out;
}

// nlohmann objects keep keys sorted, so dump() output is canonical.
inline nlohmann::json to_json(const MetaEvalReport& r) {
  return {{"schema_version", kReportSchemaVersion},
          {"metrics", to_json(r.metrics)},
          {"invalid_rate_pct", r.invalid_rate ? nlohmann::json(r.invalid_rate->value())
                                              : nlohmann::json(nullptr)},
          {"n_pairs_compared", r.n_pairs_compared},
          {"n_records", r.n_records},
          {"k", r.k},
          {"gain", to_string(r.gain)},
          {"tau_variant", to_string(r.tau)},
          {"thresholds", {{"tau_rho_eps", r.thresholds.tau_rho_eps},
                          {"kappa_eps", r.thresholds.kappa_eps}}},
          {"degenerate", r.degenerate},
          {"leaderboard_human", to_json(r.leaderboard_human)},
          {"leaderboard_model", to_json(r.leaderboard_model)}};
}

// ---------------------------------------------------------------------------
// Renderings of the report JSON

inline std::string fixed3(const nlohmann::json& v) {
  if (v.is_null()) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v.get<double>());
  return buf;
}

inline std::string render_report_table(const nlohmann::json& report) {
  std::ostringstream out;
  const auto& m = report.at("metrics");
  out << "Cohen kappa  scale  " << fixed3(m.at("kappa_scale")) << "   binary "
      << fixed3(m.at("kappa_binary")) << '\n';
  out << "Correlation  rho    " << fixed3(m.at("spearman")) << "   tau    "
      << fixed3(m.at("kendall")) << '\n';
  const auto& inv = report.at("invalid_rate_pct");
  char buf[32];
  if (inv.is_null()) {
    std::snprintf(buf, sizeof(buf), "n/a");
  } else {
    std::snprintf(buf, sizeof(buf), "%.2f%%", inv.get<double>());
  }
  out << "Invalid outputs     " << buf << "   pairs compared " << report.at("n_pairs_compared")
      << '\n';
  const auto& human = report.at("leaderboard_human").at("rows");
  const auto& model = report.at("leaderboard_model").at("rows");
  std::map<std::string, std::pair<std::size_t, double>> model_pos;
  for (const auto& row : model) {
    model_pos[row.at("run_tag").get<std::string>()] = {row.at("rank").get<std::size_t>(),
                                                       row.at("ndcg").get<double>()};
  }
  out << "\nrank  run                             human   model (rank)\n";
  for (const auto& row : human) {
    const auto tag = row.at("run_tag").get<std::string>();
    const auto& [mrank, mscore] = model_pos.at(tag);
    std::snprintf(buf, sizeof(buf), "%-4zu  ", row.at("rank").get<std::size_t>());
    out << buf;
    std::string shown = tag.size() > 30 ? tag.substr(0, 30) : tag;
    shown.resize(30, ' ');
    out << shown << "  " << fixed3(row.at("ndcg")) << "   " << fixed3(nlohmann::json(mscore))
        << " (" << mrank << ")\n";
  }
  return out.str();
}

inline std::string leaderboard_csv(const Leaderboard& b) {
  std::ostringstream out;
  out << "rank,run_tag,ndcg_at_" << b.k << '\n';
  for (std::size_t i = 0; i < b.rows.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", b.rows[i].score);
    out << i + 1 << ',' << b.rows[i].run_tag << ',' << buf << '\n';
  }
  return out.str();
}

// One row per evaluated model for plotting measures against model size.
struct ScalePoint {
  std::string model_name;
  double params_billion = 0.0;
  MetricSet metrics;
};

inline std::string scale_tsv_header() {
  return "model\tparams_b\tkappa_scale\tkappa_binary\tspearman\tkendall\n";
}

inline std::string scale_tsv_row(const ScalePoint& p) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("NA");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return std::string(buf);
  };
  char params[32];
  std::snprintf(params, sizeof(params), "%g", p.params_billion);
  return p.model_name + '\t' + params + '\t' + cell(p.metrics.kappa_scale) + '\t' +
         cell(p.metrics.kappa_binary) + '\t' + cell(p.metrics.spearman) + '\t' +
         cell(p.metrics.kendall) + '\n';
}

}  // namespace umbrela
