// One PASS/FAIL/SKIP line per acceptance criterion. Exit status is nonzero if
// any criterion fails. With --datasets-only, only the public-dataset check
// runs and a missing dataset exits 77 (reported by ctest as skipped).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "umbrela/cli_app.hpp"
#include "umbrela/umbrela.hpp"

using namespace umbrela;
namespace fs = std::filesystem;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Result {
  Outcome outcome;
  std::string detail;
};

const fs::path kFixtures = UMBRELA_FIXTURE_DIR;
const fs::path kMini = kFixtures / "mini";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("umbrela_accept_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "umbrela");
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out != nullptr) *out = o.str();
  return code;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// 1 ------------------------------------------------------------------------
Result metric_oracles() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(1234);
  std::uniform_int_distribution<int> grade(0, 3);
  std::uniform_int_distribution<int> len(2, 8);
  double worst = 0;
  int instances = 0;
  while (instances < 5000) {
    const int n = len(rng);
    std::vector<double> x(n), y(n);
    std::vector<LabelPair> pairs;
    std::vector<std::pair<int, int>> raw, raw_bin;
    std::vector<std::string> ranking;
    std::map<std::string, int> judged;
    std::vector<int> ranked_grades, all_grades;
    for (int i = 0; i < n; ++i) {
      x[i] = grade(rng);
      y[i] = grade(rng);
      const int h = grade(rng), m = grade(rng);
      pairs.push_back({RelevanceLabel(h), RelevanceLabel(m)});
      raw.emplace_back(h, m);
      raw_bin.emplace_back(h >= 2, m >= 2);
      ranking.push_back("d" + std::to_string(i));
      judged[ranking.back()] = grade(rng);
      ranked_grades.push_back(judged[ranking.back()]);
      all_grades.push_back(ranked_grades.back());
    }
    auto flat = [](const std::vector<double>& v) { return std::equal(v.begin() + 1, v.end(), v.begin()); };
    if (flat(x) || flat(y)) continue;
    worst = std::max(worst, std::fabs(kendall_tau(x, y) - oracle::kendall_tau_b(x, y)));
    worst = std::max(worst, std::fabs(spearman_rho(x, y) - oracle::spearman(x, y)));
    worst = std::max(worst, std::fabs(cohen_kappa(pairs, 4) - oracle::kappa(raw, 4)));
    worst = std::max(worst, std::fabs(cohen_kappa_binary(pairs) - oracle::kappa(raw_bin, 2)));
    worst = std::max(worst, std::fabs(ndcg_at_k(ranking, judged, 10) - oracle::ndcg(ranked_grades, all_grades, 10)));
    ++instances;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool ok = worst <= 1e-12 && secs < 5.0;
  return {ok ? Outcome::Pass : Outcome::Fail,
          std::to_string(instances) + " instances, max abs err " + fmt("%.3g", worst) + ", " + fmt("%.2f", secs) + " s"};
}

// 2 ------------------------------------------------------------------------
Result worked_examples() {
  const double tau = kendall_tau(std::vector<double>{1, 2, 2, 3}, std::vector<double>{1, 2, 3, 3});
  const std::vector<LabelPair> pairs = {{RelevanceLabel(0), RelevanceLabel(0)},
                                        {RelevanceLabel(0), RelevanceLabel(1)},
                                        {RelevanceLabel(1), RelevanceLabel(1)},
                                        {RelevanceLabel(1), RelevanceLabel(1)}};
  const double kappa = cohen_kappa(pairs, 4);
  const std::vector<std::string> ranking{"x", "y"};
  const double ndcg = ndcg_at_k(ranking, {{"x", 0}, {"y", 3}}, 10);
  const bool ok = std::fabs(tau - 0.8) < 1e-12 && std::fabs(kappa - 0.5) < 1e-12 && std::fabs(ndcg - 0.6309) <= 5e-5;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "tau " + fmt("%.6f", tau) + ", kappa " + fmt("%.6f", kappa) + ", ndcg " + fmt("%.6f", ndcg)};
}

// 3 ------------------------------------------------------------------------
Result extraction_corpus() {
  std::ifstream in(kFixtures / "extraction_corpus.jsonl");
  std::string line, failures;
  int total = 0, passed = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto s = extract_score(j["raw_output"].get<std::string>());
    ++total;
    if (s.label.value() == j["label"].get<int>() && to_string(s.method) == j["method"].get<std::string>()) {
      ++passed;
    } else {
      failures += " " + j["id"].get<std::string>();
    }
  }
  const auto frag = extract_score(" 1: 2");
  const bool frag_ok = frag.label.value() == 0 && frag.method == ExtractionMethod::DefaultInvalid;
  const bool ok = total > 0 && passed == total && frag_ok;
  return {ok ? Outcome::Pass : Outcome::Fail,
          std::to_string(passed) + "/" + std::to_string(total) + " outputs" + (failures.empty() ? "" : "; failed:" + failures)};
}

// 4 ------------------------------------------------------------------------
Result invalid_rate_accounting() {
  QrelsSet pool;
  QueryStore queries;
  PassageStore passages;
  auto replay = std::make_shared<TranscriptStore>();
  DecodingConfig cfg;
  queries.insert("q", "constructed query");
  for (int i = 0; i < 1000; ++i) {
    const auto did = "p" + std::to_string(i);
    passages.insert(did, "constructed passage " + std::to_string(i));
    pool.insert("q", did, RelevanceLabel(i % 4));
    const auto prompt = render(kUmbrelaTemplate, "constructed query", *passages.find(did));
    const auto key = cache_key("constructed", prompt.prompt_digest, cfg);
    const std::string raw = i % 59 == 0 && i < 59 * 17 ? "The passage is relevant." : "##final score: " + std::to_string(i % 4);
    replay->insert({key, "constructed", prompt.prompt_digest, raw, "2025-01-01T00:00:00Z"});
  }
  ReplayBackend backend("constructed", replay);
  TranscriptStore cache;
  const auto result = judge_pool(backend, kUmbrelaTemplate, pool, queries, passages, cfg, cache);
  std::size_t invalid = 0;
  for (const auto& r : result.records) invalid += is_invalid(r.extraction_method);
  const auto rate = invalid_rate(result.records);
  const bool ok = result.records.size() == 1000 && invalid == 17 && rate.str() == "1.70" &&
                  invalid_rate_from_counts(159, 10000).str() == "1.59" &&
                  invalid_rate_from_counts(187, 10000).str() == "1.87";
  return {ok ? Outcome::Pass : Outcome::Fail,
          std::to_string(invalid) + " of " + std::to_string(result.records.size()) + " invalid -> " + rate.str() + "%"};
}

// 5 ------------------------------------------------------------------------
Result perfect_judge() {
  auto check = [](const std::vector<SystemRun>& runs, const QrelsSet& q) {
    QrelsSet model = q;
    model.set_provenance(ModelProvenance{"oracle", "umbrela"});
    const auto r = full_report(runs, q, model, {});
    return r.metrics.kappa_scale == 1.0 && r.metrics.kappa_binary == 1.0 && r.metrics.spearman &&
           *r.metrics.spearman == 1.0 && r.metrics.kendall && *r.metrics.kendall == 1.0;
  };
  const auto mini_runs = load_runs_dir(kMini / "runs");
  const auto mini_qrels = load_qrels_file(kMini / "qrels.txt");
  std::set<std::string> doc_ids;
  for (const auto& [key, _] : mini_qrels) doc_ids.insert(key.doc_id);
  bool ok = mini_runs.size() == 3 && mini_qrels.query_ids().size() == 4 && doc_ids.size() == 12 &&
            check(mini_runs, mini_qrels);

  // random collections, kept only when the human leaderboard has no ties
  std::mt19937 rng(55);
  std::uniform_int_distribution<int> g(0, 3);
  int tried = 0;
  for (int t = 0; t < 300 && tried < 50; ++t) {
    QrelsSet q;
    std::vector<SystemRun> runs;
    for (int qi = 0; qi < 4; ++qi) {
      for (int d = 0; d < 8; ++d) q.insert("q" + std::to_string(qi), "d" + std::to_string(d), RelevanceLabel(g(rng)));
    }
    for (int s = 0; s < 5; ++s) {
      std::string text;
      for (int qi = 0; qi < 4; ++qi) {
        std::vector<int> order{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
        std::shuffle(order.begin(), order.end(), rng);
        for (int r = 0; r < 10; ++r) {
          text += "q" + std::to_string(qi) + " Q0 d" + std::to_string(order[r]) + " " + std::to_string(r + 1) + " " +
                  std::to_string(10 - r) + " s" + std::to_string(s) + "\n";
        }
      }
      runs.push_back(parse_run(text));
    }
    const auto board = build_leaderboard(runs, q);
    bool ties = false;
    for (std::size_t i = 1; i < board.rows.size(); ++i) ties |= board.rows[i].score == board.rows[i - 1].score;
    if (ties) continue;
    ++tried;
    ok = ok && check(runs, q);
  }
  return {ok ? Outcome::Pass : Outcome::Fail, "mini fixture (3 runs x 4 queries x 12 docs) + " + std::to_string(tried) + " random collections"};
}

// 6 ------------------------------------------------------------------------
Result determinism() {
  const auto dir = scratch("determinism");
  const auto config = (kMini / "config.json").string();
  std::string ref_q, ref_r, ref_rep;
  int runs = 0;
  bool ok = true;
  for (const char* p : {"1", "4", "16"}) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto out = dir / (std::string("p") + p + "_" + std::to_string(rep));
      ok = ok && run_cli({"judge", "--config", config, "--parallelism", p, "--out", out.string()}) == 0;
      std::string report;
      ok = ok && run_cli({"evaluate", "--config", config, "--output-dir", out.string()}, &report) == 0;
      const auto q = slurp(out / "model.qrels");
      const auto r = slurp(out / "records.jsonl");
      if (runs++ == 0) {
        ref_q = q;
        ref_r = r;
        ref_rep = report;
      }
      ok = ok && !q.empty() && q == ref_q && r == ref_r && report == ref_rep;
    }
  }
  fs::remove_all(dir);
  return {ok ? Outcome::Pass : Outcome::Fail, std::to_string(runs) + " judge+evaluate runs over parallelism {1,4,16}"};
}

// 7 ------------------------------------------------------------------------
Result datasets() {
  fs::path root = std::getenv("UMBRELA_DATA_DIR") ? fs::path(std::getenv("UMBRELA_DATA_DIR"))
                                                  : fs::path(UMBRELA_SOURCE_DIR) / "data";
  std::string detail;
  int checked = 0;
  bool ok = true;
  for (const char* name : {"llmjudge", "dl19", "dl20"}) {
    const auto dir = root / name;
    if (!fs::is_regular_file(dir / "qrels.txt") || !fs::is_directory(dir / "runs")) {
      detail += std::string(" ") + name + ": absent;";
      continue;
    }
    ++checked;
    const auto stats = dataset_stats(load_qrels_file(dir / "qrels.txt"), load_runs_dir(dir / "runs"));
    const bool match = stats == *reference_stats(name);
    ok = ok && match;
    detail += std::string(" ") + name + ": " + std::to_string(stats.n_systems) + " systems, " +
              std::to_string(stats.n_queries) + " queries, [" + std::to_string(stats.label_counts[0]) + ", " +
              std::to_string(stats.label_counts[1]) + ", " + std::to_string(stats.label_counts[2]) + ", " +
              std::to_string(stats.label_counts[3]) + "]" + (match ? " ok;" : " MISMATCH;");
  }
  if (checked == 0) return {Outcome::Skip, "no datasets under " + root.string() + " (run scripts/fetch_datasets.sh);" + detail};
  if (checked < 3) ok = false;
  return {ok ? Outcome::Pass : Outcome::Fail, detail};
}

// 8 ------------------------------------------------------------------------
Result trec_round_trip() {
  bool ok = true;
  const auto qrels_text = slurp(kMini / "qrels.txt");
  ok = ok && write_qrels(parse_qrels(qrels_text)) == qrels_text;
  int files = 1;
  for (const auto& entry : fs::directory_iterator(kMini / "runs")) {
    const auto text = slurp(entry.path());
    ok = ok && write_run(parse_run(text)) == text;
    ++files;
  }
  std::mt19937 rng(2024);
  const std::string alphabet = " \t0123456789-.eQxyz";
  int typed = 0, parsed = 0, untyped = 0, silent = 0;
  for (int t = 0; t < 20000; ++t) {
    std::string line = t % 2 ? "q1 0 d1 2" : "q1 Q0 d1 1 0.5 tag";
    for (int m = 1 + t % 3; m > 0; --m) {
      const auto p = std::uniform_int_distribution<std::size_t>(0, line.size())(rng);
      const char c = alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
      switch (t % 3) {
        case 0: line.insert(line.begin() + static_cast<long>(p), c); break;
        case 1: if (p < line.size()) line.erase(p, 1); break;
        default: if (p < line.size()) line[p] = c; break;
      }
    }
    try {
      std::size_t n = 0;
      if (t % 2) {
        n = parse_qrels("q0 0 base 1\n" + line + "\n").size();
      } else {
        for (const auto& [_, docs] : parse_run("q0 Q0 base 1 1.0 tag\n" + line + "\n").rankings) n += docs.size();
      }
      ++parsed;
      if (!detail::is_blank(line) && n != 2) ++silent;
    } catch (const ParseError&) {
      ++typed;
    } catch (...) {
      ++untyped;
    }
  }
  ok = ok && untyped == 0 && silent == 0 && typed > 0;
  return {ok ? Outcome::Pass : Outcome::Fail,
          std::to_string(files) + " files byte-identical; fuzz: " + std::to_string(typed) + " typed errors, " +
              std::to_string(parsed) + " clean parses, " + std::to_string(untyped) + " untyped, " +
              std::to_string(silent) + " silent skips"};
}

// 9 ------------------------------------------------------------------------
Result reproduce_config() {
  const fs::path src = UMBRELA_SOURCE_DIR;
  const auto cfg = cli::load_config(src / "configs" / "reproduce_llmjudge_gpt4o.json");
  const auto ref = nlohmann::json::parse(slurp(src / "configs" / "reference" / "llmjudge_gpt4o.json"));
  const auto metrics = metric_set_from_json(ref);
  const bool values = metrics.kappa_scale == 0.308 && metrics.kendall == 0.911;
  MetricSet shifted = metrics;
  *shifted.kendall += 0.004;
  *shifted.kappa_scale += 0.02;
  const auto cmp = compare_metrics(shifted, metrics, cfg.thresholds);
  const bool verdicts = cmp[3].verdict == Verdict::NotSignificant && cmp[0].verdict == Verdict::Significant;
  const bool ok = cfg.backend == "http" && values && verdicts;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "not a gate: reproduce config and reference values load, threshold verdicts checked; live API run not performed"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Result()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const bool datasets_only = argc > 1 && std::string(argv[1]) == "--datasets-only";
  std::vector<Criterion> criteria = {
      {1, "metric oracle suite", metric_oracles},
      {2, "worked examples", worked_examples},
      {3, "extraction corpus", extraction_corpus},
      {4, "invalid-rate accounting", invalid_rate_accounting},
      {5, "perfect-judge property", perfect_judge},
      {6, "replay determinism", determinism},
      {7, "public dataset statistics", datasets},
      {8, "TREC round-trip and fuzzing", trec_round_trip},
      {9, "reproduction config", reproduce_config},
  };
  int failed = 0;
  bool skipped = false;
  for (const auto& c : criteria) {
    if (datasets_only && c.id != 7) continue;
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {Outcome::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = r.outcome == Outcome::Pass ? "PASS" : r.outcome == Outcome::Fail ? "FAIL" : "SKIP";
    std::printf("[%s] %d. %s: %s\n", tag, c.id, c.name, r.detail.c_str());
    failed += r.outcome == Outcome::Fail;
    skipped |= r.outcome == Outcome::Skip;
  }
  if (failed > 0) return 1;
  if (datasets_only && skipped) return 77;
  return 0;
}
