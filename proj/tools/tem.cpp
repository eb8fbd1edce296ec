#include <CLI11.hpp>

#include "tem/run/report.hpp"
#include "tem/run/trainer.hpp"

#include <iostream>

namespace {

std::vector<tem::env::ScenarioConfig> parse_scenarios(const std::string& list) {
  std::vector<tem::env::ScenarioConfig> out;
  std::string cur;
  std::istringstream is(list);
  while (std::getline(is, cur, ','))
    if (!cur.empty()) out.push_back(tem::env::ScenarioConfig::parse(cur));
  if (out.empty()) throw std::invalid_argument("no scenarios given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transformer email-mechanism trainer for particle-world tasks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path, scenario_tag, scenarios_list, report_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int episodes = 10;
  std::int64_t steps = 50000;

  auto* train_cmd = app.add_subcommand("train", "train a policy");
  train_cmd->add_option("--config", config_path, "key=value config file");
  train_cmd->add_option("--seed", seed, "run seed (overrides the config)")
      ->each([&](const std::string&) { seed_given = true; });
  train_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
  eval_cmd->add_option("--scenario", scenario_tag, "target, e.g. pp:7-3")->required();
  eval_cmd->add_option("--episodes", episodes);
  eval_cmd->add_option("--seed", seed);
  eval_cmd->add_option("--out", out_dir, "directory for trajectory/chain CSV dumps");

  auto* transfer_cmd = app.add_subcommand("transfer", "zero-shot transfer evaluation");
  transfer_cmd->add_option("--checkpoint", checkpoint_path)->required();
  transfer_cmd->add_option("--scenarios", scenarios_list, "comma list, e.g. pp:3-1,pp:9-3")
      ->required();
  transfer_cmd->add_option("--episodes", episodes);
  transfer_cmd->add_option("--seed", seed);

  auto* finetune_cmd = app.add_subcommand("finetune", "resume training on a new scenario");
  finetune_cmd->add_option("--checkpoint", checkpoint_path)->required();
  finetune_cmd->add_option("--scenario", scenario_tag)->required();
  finetune_cmd->add_option("--steps", steps, "additional env steps");
  finetune_cmd->add_option("--seed", seed);
  finetune_cmd->add_option("--out", out_dir)->required();

  auto* report_cmd = app.add_subcommand("report", "render curves and a summary table");
  report_cmd->add_option("--dir", report_dir, "directory holding run outputs")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    using namespace tem::run;
    if (*train_cmd) {
      RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load_file(config_path);
      if (seed_given) cfg.seed = seed;
      TrainOutcome out = train(cfg, out_dir);
      std::cout << "trained " << out.env_steps << " env steps\n"
                << "metrics: " << out.metrics_path << "\n"
                << "checkpoint: " << out.checkpoint_path << "\n";
    } else if (*eval_cmd) {
      Checkpoint ck = load_checkpoint(checkpoint_path);
      EvalReport rep = evaluate_checkpoint(ck, tem::env::ScenarioConfig::parse(scenario_tag),
                                           episodes, seed, out_dir);
      std::cout << rep.to_text();
    } else if (*transfer_cmd) {
      Checkpoint ck = load_checkpoint(checkpoint_path);
      for (const auto& [tag, rep] :
           transfer_eval(ck, parse_scenarios(scenarios_list), episodes, seed)) {
        std::cout << "== transfer to " << tag << " ==\n" << rep.to_text() << "\n";
      }
    } else if (*finetune_cmd) {
      Checkpoint ck = load_checkpoint(checkpoint_path);
      finetune(ck, tem::env::ScenarioConfig::parse(scenario_tag), steps, seed, out_dir);
      std::cout << "finetuned checkpoint: " << out_dir << "/checkpoint.bin\n";
    } else if (*report_cmd) {
      write_report(report_dir);
      std::cout << "wrote " << report_dir << "/reward_curve.svg, comm_rate_curve.svg, summary.txt\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
