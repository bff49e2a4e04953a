#include <iostream>

#include <CLI11.hpp>

#include "app.hpp"

namespace {

struct VerbOptions {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

int run_verb(const std::string& verb, magnon::app::ExperimentKind kind, const VerbOptions& opt) {
  using namespace magnon::app;
  const auto config = load_config(opt.config, {opt.seed, opt.threads});
  if (config.kind != kind)
    throw config_error(opt.config + ": kind '" + to_string(config.kind) + "' cannot be run by '" + verb + "'");
  const auto result = run_experiment(config);
  for (const auto& path : write_result(result, opt.out)) std::cout << path.string() << "\n";
  if (kind == ExperimentKind::Validate) {
    for (const auto& check : result.summary["checks"])
      std::cout << (check["passed"].get<bool>() ? "PASS " : "FAIL ") << check["name"].get<std::string>() << ": "
                << check["observed"].dump() << " (tolerance " << check["tolerance"].dump() << ") "
                << check["detail"].get<std::string>() << "\n";
    return result.summary["passed"].get<bool>() ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  using magnon::app::ExperimentKind;
  CLI::App app{"Magnon entanglement simulations"};
  app.set_version_flag("--version", magnon::app::version());
  app.require_subcommand(1);

  const std::vector<std::tuple<std::string, ExperimentKind, std::string>> verbs{
      {"simulate", ExperimentKind::Closed, "closed dynamics of the effective or full model"},
      {"envelope", ExperimentKind::Envelope, "numeric concurrence against the analytic envelope"},
      {"control", ExperimentKind::Control, "Krotov optimization of the magnon frequencies"},
      {"opensys", ExperimentKind::Opensys, "dissipative dynamics: master equation and QSD"},
      {"validate", ExperimentKind::Validate, "cross-checks against independent oracles"}};

  VerbOptions opt;
  std::string chosen;
  ExperimentKind kind = ExperimentKind::Closed;
  for (const auto& [name, k, help] : verbs) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--seed", opt.seed, "random seed, overrides the config");
    sub->add_option("--threads", opt.threads, "worker threads, overrides the config")->check(CLI::PositiveNumber);
    sub->callback([&, name = name, k = k] {
      chosen = name;
      kind = k;
    });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    return run_verb(chosen, kind, opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
