#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  torskew::cli::RunConfig cfg;
  CLI::App app{"torskew: sine-skewed toroidal models and Fisher information singularity"};
  torskew::cli::configure(app, cfg);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : torskew::cli::kDomainError;
  }
  return torskew::cli::run(cfg);
}
