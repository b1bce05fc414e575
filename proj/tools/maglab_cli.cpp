#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "maglab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"maglab: magnitude-aware margin losses, theory checks, toy training and evaluation"};
  app.require_subcommand(1);

  struct Sub {
    maglab::Command cmd;
    CLI::App* app;
    std::string config, out;
    std::optional<std::uint64_t> seed;
  };
  Sub subs[] = {
      {maglab::Command::kVerifyTheory,
       app.add_subcommand("verify-theory", "Certify convexity, optimum and monotonicity of the magnitude loss"), {}, {}, {}},
      {maglab::Command::kTrain, app.add_subcommand("train", "Train the toy embedding network on synthetic data"), {}, {}, {}},
      {maglab::Command::kEval, app.add_subcommand("eval", "Verification, reject curves, aggregation and clustering"), {}, {}, {}},
  };
  for (auto& s : subs) {
    s.app->add_option("--config", s.config, "JSON config file")->required();
    s.app->add_option("--out", s.out, "Output directory")->required();
    s.app->add_option("--seed", s.seed, "Override the config's global seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : maglab::kExitConfig;
  }

  for (auto& s : subs) {
    if (s.app->parsed()) {
      return maglab::run_command(s.cmd, {s.config, s.out, s.seed}, std::cout, std::cerr);
    }
  }
  return maglab::kExitConfig;
}
