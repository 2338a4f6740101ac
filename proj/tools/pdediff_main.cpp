#include "pdediff/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

using namespace pdediff;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir = ".";
  std::vector<std::string> overrides;  // section.key=value
};

CommandContext make_context(const GlobalOptions& g) {
  CommandContext ctx;
  if (!g.preset_name.empty()) ctx.cfg = preset(g.preset_name);
  if (!g.config_path.empty()) {
    require(g.preset_name.empty(), ErrorCode::Usage, "--config and --preset are mutually exclusive");
    ctx.cfg = load_config(g.config_path);
  }
  for (const auto& o : g.overrides) {
    const auto eq = o.find('=');
    require(eq != std::string::npos, ErrorCode::Usage, "--set expects section.key=value, got '" + o + "'");
    set_config_value(ctx.cfg, o.substr(0, eq), o.substr(eq + 1));
  }
  if (g.seed) ctx.cfg.task.seed = *g.seed;
  if (g.threads) ctx.cfg.task.threads = *g.threads;
  ctx.out_dir = g.out_dir;
  ctx.log = &std::cout;
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-based diffusion surrogates for 1D PDE forecasting and data assimilation"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Experiment config file");
  app.add_option("--preset", g.preset_name, "Built-in config (ks-desk, burgers-desk)");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--threads", g.threads, "Worker threads; 1 is the bit-reproducible path")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--set", g.overrides, "Override a config field, e.g. --set train.epochs=5");

  auto* gen = app.add_subcommand("generate", "Simulate the train/valid/test datasets");
  auto* trn = app.add_subcommand("train", "Train the score network");
  auto* fc = app.add_subcommand("forecast", "Autoregressive and all-at-once rollouts from initial states");
  auto* off = app.add_subcommand("da-offline", "Offline data assimilation over the sparsity grid");
  auto* on = app.add_subcommand("da-online", "Online data assimilation");
  auto* ev = app.add_subcommand("evaluate", "Score a PDET of predictions against the truth");
  std::string pred_path, truth_path;
  int first = -1;
  ev->add_option("--pred", pred_path, "Predicted trajectories (PDET)")->required();
  ev->add_option("--truth", truth_path, "Ground truth (PDET); defaults to the test split");
  ev->add_option("--first", first, "States ignored at the start; defaults to sample.C");
  auto* oc = app.add_subcommand("oracle-check", "Check the oracle and sampler invariants");
  double perturb = 0.0;
  oc->add_option("--perturb", perturb, "Add this offset to every oracle score (test mode)");
  auto* show = app.add_subcommand("show-config", "Print the effective config");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const CommandContext ctx = make_context(g);
    if (*gen) {
      cmd_generate(ctx);
    } else if (*trn) {
      cmd_train(ctx);
    } else if (*fc) {
      cmd_forecast(ctx);
    } else if (*off) {
      cmd_da_offline(ctx);
    } else if (*on) {
      cmd_da_online(ctx);
    } else if (*ev) {
      if (truth_path.empty())
        truth_path = (std::filesystem::path(ctx.cfg.data_dir) / "test.pdet").string();
      cmd_evaluate(ctx, pred_path, truth_path, first >= 0 ? first : ctx.cfg.sample.C);
    } else if (*oc) {
      return cmd_oracle_check(ctx, perturb) == 0 ? 0 : 2;
    } else if (*show) {
      validate(ctx.cfg);
      std::cout << render_config(ctx.cfg);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
