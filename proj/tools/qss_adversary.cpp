// Runs the statistical and algebraic attack checks and prints one line each.
#include <CLI11.hpp>

#include <iostream>

#include "qss/adversary.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Attack simulations against the sharing scheme"};
  qss::AdversaryOptions o;
  app.add_option("--seed", o.seed, "deterministic seed");
  app.add_option("--forgery-trials", o.forgery_trials);
  app.add_option("--wrong-password-trials", o.wrong_password_trials);
  app.add_option("--large-field-trials", o.large_field_trials);
  app.add_option("--view-trials", o.view_trials);
  app.add_option("--det-scenarios", o.det_scenarios);
  CLI11_PARSE(app, argc, argv);

  bool all = true;
  for (const auto& line : qss::run_adversary_suite(o)) {
    std::cout << qss::format_report_line(line) << std::endl;
    all = all && line.pass;
  }
  return all ? 0 : 1;
}
