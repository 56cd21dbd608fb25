// Compare a model's qrels against human qrels over a directory of runs.
//
//   agreement_report HUMAN_QRELS MODEL_QRELS RUNS_DIR [K]

#include <cstdlib>
#include <iostream>

#include "umbrela/umbrela.hpp"

int main(int argc, char** argv) {
  if (argc < 4) {
    std::cerr << "usage: " << argv[0] << " HUMAN_QRELS MODEL_QRELS RUNS_DIR [K]\n";
    return 2;
  }
  try {
    const auto human = umbrela::load_qrels_file(argv[1]);
    const auto model = umbrela::load_qrels_file(argv[2], umbrela::ModelProvenance{"model", "unknown"});
    const auto runs = umbrela::load_runs_dir(argv[3]);
    const std::size_t k = argc > 4 ? std::strtoul(argv[4], nullptr, 10) : 10;

    const auto report = umbrela::full_report(runs, human, model, {}, k);
    std::cout << umbrela::render_report_table(umbrela::to_json(report));
  } catch (const umbrela::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
