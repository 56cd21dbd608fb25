// Render a grading prompt and score a canned model reply.
//
//   grade_reply [umbrela|basic]

#include <iostream>
#include <string>

#include "umbrela/umbrela.hpp"

int main(int argc, char** argv) {
  const std::string name = argc > 1 ? argv[1] : "umbrela";
  const auto& tmpl = umbrela::template_by_name(name);

  auto prompt = umbrela::render(tmpl, "how long do cats sleep",
                                "Adult cats sleep between 12 and 16 hours a day.");
  std::cout << prompt.text << "\n\n"
            << "digest " << prompt.prompt_digest << "\n";

  const std::string reply =
      "M: The passage directly states sleep duration.\nT: 3\nO: 3\n##final score: 3";
  auto score = umbrela::extract_score(reply);
  std::cout << "label " << score.label.value() << " via " << umbrela::to_string(score.method)
            << "\n";
}
