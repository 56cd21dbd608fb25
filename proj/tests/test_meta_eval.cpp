#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "umbrela/meta_eval.hpp"

using namespace umbrela;

namespace {

SystemRun make_run(std::string tag, const std::map<std::string, std::vector<std::string>>& rankings) {
  std::string text;
  for (const auto& [qid, docs] : rankings) {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      text += qid + " Q0 " + docs[i] + " " + std::to_string(i + 1) + " " + std::to_string(100 - i) + " " + tag + "\n";
    }
  }
  return parse_run(text);
}

const char* kHuman = "q1 0 a 3\nq1 0 b 2\nq1 0 c 0\nq2 0 d 1\nq2 0 e 3\nq2 0 f 0\n";

std::vector<SystemRun> three_runs() {
  return {make_run("ideal", {{"q1", {"a", "b", "c"}}, {"q2", {"e", "d", "f"}}}),
          make_run("reversed", {{"q1", {"c", "b", "a"}}, {"q2", {"f", "d", "e"}}}),
          make_run("middle", {{"q1", {"b", "a", "c"}}, {"q2", {"d", "e", "f"}}})};
}

}  // namespace

TEST(Leaderboard, IdealAboveReversed) {
  auto human = parse_qrels(kHuman);
  auto board = build_leaderboard(three_runs(), human);
  ASSERT_EQ(board.rows.size(), 3u);
  EXPECT_EQ(board.rows[0].run_tag, "ideal");
  EXPECT_DOUBLE_EQ(board.rows[0].score, 1.0);
  EXPECT_EQ(board.rows[2].run_tag, "reversed");
  EXPECT_EQ(board.provenance, "human");
}

TEST(Leaderboard, ErrorsAndTies) {
  auto human = parse_qrels(kHuman);
  EXPECT_THROW(build_leaderboard({}, human), EmptyInput);
  EXPECT_THROW(build_leaderboard(three_runs(), QrelsSet{}), EmptyInput);
  auto runs = three_runs();
  runs.push_back(runs[0]);
  EXPECT_THROW(build_leaderboard(runs, human), DuplicateRunTag);

  auto a = make_run("b-run", {{"q1", {"a"}}});
  auto b = make_run("a-run", {{"q1", {"a"}}});
  auto board = build_leaderboard({a, b}, human);
  EXPECT_EQ(board.rows[0].run_tag, "a-run");
}

TEST(Leaderboard, InputOrderIrrelevant) {
  auto human = parse_qrels(kHuman);
  auto runs = three_runs();
  const auto ref = build_leaderboard(runs, human);
  std::mt19937 rng(1);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(runs.begin(), runs.end(), rng);
    const auto board = build_leaderboard(runs, human);
    ASSERT_EQ(board.rows.size(), ref.rows.size());
    for (std::size_t i = 0; i < ref.rows.size(); ++i) {
      EXPECT_EQ(board.rows[i].run_tag, ref.rows[i].run_tag);
      EXPECT_EQ(board.rows[i].score, ref.rows[i].score);
    }
  }
}

TEST(Compare, SelfAndReversed) {
  auto human = parse_qrels(kHuman);
  auto board = build_leaderboard(three_runs(), human);
  auto rc = compare_leaderboards(board, board);
  EXPECT_DOUBLE_EQ(rc.spearman, 1.0);
  EXPECT_DOUBLE_EQ(rc.kendall, 1.0);

  Leaderboard flipped = board;
  const double top = board.rows.front().score;
  for (auto& r : flipped.rows) r.score = top - r.score;
  rc = compare_leaderboards(board, flipped);
  EXPECT_DOUBLE_EQ(rc.spearman, -1.0);
  EXPECT_DOUBLE_EQ(rc.kendall, -1.0);

  Leaderboard other = board;
  other.rows.pop_back();
  EXPECT_THROW(compare_leaderboards(board, other), RunSetMismatch);
}

TEST(Agreement, PerfectJudge) {
  auto human = parse_qrels(kHuman);
  auto a = agreement(human, human);
  EXPECT_EQ(a.kappa_scale, 1.0);
  EXPECT_EQ(a.kappa_binary, 1.0);
  EXPECT_EQ(a.n_pairs, human.size());
}

TEST(Agreement, SwappingTwoAndThreeKeepsBinaryPerfect) {
  auto human = parse_qrels(kHuman);
  QrelsSet model(ModelProvenance{"m", "umbrela"});
  std::vector<std::pair<int, int>> raw;
  for (const auto& [key, label] : human) {
    int g = label.value();
    if (g == 2) g = 3; else if (g == 3) g = 2;
    model.insert(key.query_id, key.doc_id, RelevanceLabel(g));
    raw.emplace_back(label.value(), g);
  }
  auto a = agreement(human, model);
  EXPECT_EQ(a.kappa_binary, 1.0);
  EXPECT_LT(a.kappa_scale, 1.0);
  EXPECT_NEAR(a.kappa_scale, oracle::kappa(raw, 4), 1e-12);
}

TEST(Agreement, IntersectionOnly) {
  auto human = parse_qrels(kHuman);
  auto model = human;
  const auto base = agreement(human, model);
  model.insert("q9", "zz", RelevanceLabel(3));
  auto human2 = human;
  human2.insert("q8", "yy", RelevanceLabel(0));
  const auto after = agreement(human2, model);
  EXPECT_EQ(after.n_pairs, base.n_pairs);
  EXPECT_EQ(after.kappa_scale, base.kappa_scale);
  EXPECT_THROW(agreement(human, parse_qrels("x 0 y 1\n")), EmptyIntersection);
}

TEST(Equivalence, ThresholdVerdicts) {
  EquivalenceThresholds t;
  EXPECT_EQ(t.tau_rho_eps, 0.005);
  EXPECT_EQ(t.kappa_eps, 0.01);
  MetricSet a{0.30, 0.40, 0.90, 0.911};
  MetricSet b{0.32, 0.40, 0.90, 0.907};
  auto cmp = compare_metrics(a, b, t);
  ASSERT_EQ(cmp.size(), 4u);
  EXPECT_EQ(cmp[0].metric, "kappa_scale");
  EXPECT_EQ(cmp[0].verdict, Verdict::Significant);       // delta kappa 0.02
  EXPECT_EQ(cmp[1].verdict, Verdict::NotSignificant);
  EXPECT_EQ(cmp[3].verdict, Verdict::NotSignificant);    // delta tau 0.004
  MetricSet edge{0.308, 0.418, 0.985, 0.916};
  MetricSet ref{0.318, 0.418, 0.980, 0.911};
  cmp = compare_metrics(edge, ref, t);
  EXPECT_EQ(cmp[0].verdict, Verdict::NotSignificant);    // exactly 0.01
  EXPECT_EQ(cmp[2].verdict, Verdict::NotSignificant);    // exactly 0.005
  EXPECT_EQ(cmp[3].verdict, Verdict::NotSignificant);
  MetricSet partial{0.3, std::nullopt, std::nullopt, std::nullopt};
  EXPECT_EQ(compare_metrics(partial, ref, t)[1].verdict, Verdict::Unavailable);
  EXPECT_THROW((EquivalenceThresholds{0.0, 0.01}.validate()), Error);
}

TEST(FullReport, SelfComparisonAtMaxima) {
  auto human = parse_qrels(kHuman);
  std::vector<JudgmentRecord> records(4);
  records[1].extraction_method = ExtractionMethod::FinalScore;
  records[2].extraction_method = ExtractionMethod::FinalScore;
  records[3].extraction_method = ExtractionMethod::OFallback;
  auto r = full_report(three_runs(), human, human, records);
  EXPECT_EQ(r.metrics.kappa_scale, 1.0);
  EXPECT_EQ(r.metrics.kappa_binary, 1.0);
  EXPECT_DOUBLE_EQ(*r.metrics.spearman, 1.0);
  EXPECT_DOUBLE_EQ(*r.metrics.kendall, 1.0);
  EXPECT_EQ(r.invalid_rate->str(), "25.00");
  EXPECT_EQ(r.n_pairs_compared, 6u);
  EXPECT_TRUE(r.degenerate.empty());
}

TEST(FullReport, DegenerateCorrelationIsMarked) {
  auto human = parse_qrels(kHuman);
  // every model label 0: all model NDCGs are 0
  QrelsSet zeros;
  for (const auto& [key, _] : human) zeros.insert(key.query_id, key.doc_id, RelevanceLabel(0));
  auto r = full_report(three_runs(), human, zeros, {});
  EXPECT_FALSE(r.metrics.spearman);
  EXPECT_FALSE(r.metrics.kendall);
  EXPECT_EQ(r.degenerate, (std::vector<std::string>{"spearman", "kendall"}));
  EXPECT_FALSE(r.invalid_rate);
  const auto j = to_json(r);
  EXPECT_TRUE(j["metrics"]["kendall"].is_null());
  EXPECT_TRUE(j["invalid_rate_pct"].is_null());
}

TEST(FullReport, JsonIsStableAndVersioned) {
  auto human = parse_qrels(kHuman);
  auto model = parse_qrels("q1 0 a 2\nq1 0 b 2\nq1 0 c 1\nq2 0 d 0\nq2 0 e 3\nq2 0 f 0\n");
  const auto j1 = to_json(full_report(three_runs(), human, model, {})).dump();
  auto runs = three_runs();
  std::reverse(runs.begin(), runs.end());
  const auto j2 = to_json(full_report(runs, human, model, {})).dump();
  EXPECT_EQ(j1, j2);
  const auto j = nlohmann::json::parse(j1);
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(j["leaderboard_human"]["rows"].size(), 3u);
  const auto back = metric_set_from_json(j);
  EXPECT_EQ(back.kappa_scale, j["metrics"]["kappa_scale"].get<double>());
}

TEST(Rendering, TableCsvTsv) {
  auto human = parse_qrels(kHuman);
  const auto rep = full_report(three_runs(), human, human, {});
  const auto table = render_report_table(to_json(rep));
  EXPECT_NE(table.find("1.000"), std::string::npos);
  const auto csv = leaderboard_csv(rep.leaderboard_human);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "rank,run_tag,ndcg_at_10");
  EXPECT_NE(csv.find("1,ideal,1.000000\n"), std::string::npos);
  const auto row = scale_tsv_row({"llama-8b", 8, rep.metrics});
  EXPECT_EQ(row, "llama-8b\t8\t1.000000\t1.000000\t1.000000\t1.000000\n");
  EXPECT_EQ(scale_tsv_row({"x", 0.5, MetricSet{}}), "x\t0.5\tNA\tNA\tNA\tNA\n");
}
