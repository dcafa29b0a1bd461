#include <iostream>

#include "CLI11.hpp"
#include "cli/commands.hpp"
#include "vcgate/nulldist.hpp"

int main(int argc, char** argv) {
  using namespace vcgate::cli;

  CLI::App app{"vcgate: tests for the presence of a variance component in a GLMM"};
  app.require_subcommand(1);

  TestOptions test;
  std::uint64_t seed = 0;
  int B = 0;
  std::string null_kind;
  auto* t = app.add_subcommand("test", "run one aRLRT on a CSV dataset");
  t->add_option("--config", test.config, "model configuration (JSON)")->required()->check(CLI::ExistingFile);
  t->add_option("--data", test.data, "dataset (CSV with header)")->required()->check(CLI::ExistingFile);
  t->add_option("--out", test.out, "report path (JSON); '-' for stdout")->default_val("-");
  auto* t_seed = t->add_option("--seed", seed, "override the config seed");
  auto* t_null = t->add_option("--null", null_kind, "null distribution")->check(CLI::IsMember({"finite", "mixture"}));
  auto* t_B = t->add_option("--B", B, "override the null sample count")->check(CLI::PositiveNumber);

  SimulateOptions simulate;
  auto* s = app.add_subcommand("simulate", "run a simulation manifest");
  s->add_option("--manifest", simulate.manifest, "scenario manifest (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--out", simulate.out_dir, "output directory")->required();
  s->add_option("--profile", simulate.profile, "replicate counts")->check(CLI::IsMember({"desk", "paper"}))->default_val("desk");
  auto* s_seed = s->add_option("--seed", seed, "override every scenario seed");
  auto* s_B = s->add_option("--B", B, "override the null sample count")->check(CLI::PositiveNumber);
  s->add_flag("--quiet", simulate.quiet, "no progress output");

  std::string standin_dir;
  auto* g = app.add_subcommand("standins", "write the synthetic stand-in datasets");
  g->add_option("--out", standin_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_usage;
  }

  const int threads = vcgate::nulldist::default_threads();
  if (t->parsed()) {
    if (*t_seed) test.seed = seed;
    if (*t_null) test.null_kind = null_kind;
    if (*t_B) test.B = B;
    test.threads = threads;
    return cmd_test(test, std::cout, std::cerr);
  }
  if (s->parsed()) {
    if (*s_seed) simulate.seed = seed;
    if (*s_B) simulate.B = B;
    simulate.threads = threads;
    return cmd_simulate(simulate, std::cout, std::cerr);
  }
  return cmd_standins(standin_dir, std::cout, std::cerr);
}
