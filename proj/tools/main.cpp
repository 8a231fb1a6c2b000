#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dendrostate/errors.hpp"
#include "dendrostate/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::int64_t seed_override = -1;
  int threads_override = 0;
  std::string output_override;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed_override, "override the configured seed");
  cmd->add_option("--threads", args.threads_override, "override the configured thread count");
  cmd->add_option("--out", args.output_override, "override the configured output directory");
}

int execute(const CommonArgs& args, const std::vector<dendrostate::Stage>& stages) {
  dendrostate::RunConfig config;
  try {
    config = dendrostate::RunConfig::from_json_file(args.config_path);
  } catch (const dendrostate::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  if (args.seed_override >= 0) {
    config.sampler.seed = static_cast<std::uint64_t>(args.seed_override);
  }
  if (args.threads_override > 0) config.sampler.threads = args.threads_override;
  if (!args.output_override.empty()) config.output_dir = args.output_override;

  std::string error;
  int code = dendrostate::run_pipeline(config, stages, &error);
  if (code == 2) {
    std::cerr << "config error: " << error << "\n";
  } else if (code == 3) {
    std::cerr << "data error: " << error << "\n";
  } else if (code == 4) {
    std::cerr << "finished with convergence warnings (outputs written)\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dendrostate: Bayesian tree-ring growth/climate modeling\n"
      "Stages: simulate, water-balance, select, fit-fce, fit-vce, classify, report"};
  app.require_subcommand(1);

  struct Plan {
    CommonArgs args;
    std::vector<dendrostate::Stage> stages;
    bool selected = false;
    std::string stage_list;  // run subcommand only
  };
  struct StageCmd {
    const char* name;
    const char* help;
    dendrostate::Stage stage;
  };
  static const StageCmd stage_cmds[] = {
      {"simulate", "generate synthetic rings and climate from the model",
       dendrostate::Stage::simulate},
      {"water-balance", "monthly water balance and the seasonal climate table",
       dendrostate::Stage::water_balance},
      {"select", "Bayesian Lasso climate-variable selection", dendrostate::Stage::select},
      {"fit-fce", "fit the fixed-climate-effects model", dendrostate::Stage::fit_fce},
      {"fit-vce", "fit the variable-climate-effects state-space model",
       dendrostate::Stage::fit_vce},
      {"classify", "label years of climate sensitivity by driver",
       dendrostate::Stage::classify},
      {"report", "bundle plot-ready CSV products", dendrostate::Stage::report},
  };

  std::vector<Plan> plans(std::size(stage_cmds) + 1);
  for (std::size_t i = 0; i < std::size(stage_cmds); ++i) {
    CLI::App* cmd = app.add_subcommand(stage_cmds[i].name, stage_cmds[i].help);
    plans[i].stages = {stage_cmds[i].stage};
    add_common(cmd, plans[i].args);
    Plan* plan = &plans[i];
    cmd->callback([plan]() { plan->selected = true; });
  }
  Plan* run_plan = &plans.back();
  run_plan->stage_list = "simulate,select,fit-fce,fit-vce,classify,report";
  CLI::App* run_cmd = app.add_subcommand("run", "run a comma-separated list of stages in order");
  run_cmd->add_option("--stages", run_plan->stage_list, "comma-separated stage list");
  add_common(run_cmd, run_plan->args);
  run_cmd->callback([run_plan]() { run_plan->selected = true; });

  CLI11_PARSE(app, argc, argv);

  for (Plan& plan : plans) {
    if (!plan.selected) continue;
    if (&plan == run_plan) {
      try {
        plan.stages = dendrostate::parse_stage_list(plan.stage_list);
      } catch (const dendrostate::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      }
    }
    return execute(plan.args, plan.stages);
  }
  std::cerr << app.help();
  return 2;
}
