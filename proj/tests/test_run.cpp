#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tem/run/report.hpp"
#include "tem/run/trainer.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tem;
using namespace tem::run;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_run(const std::string& scenario_tag, Algo algo, std::uint64_t seed) {
  RunConfig cfg;
  cfg.scenario = env::ScenarioConfig::parse(scenario_tag);
  cfg.scenario.episode_len = 5;
  cfg.algo = algo;
  cfg.net.d_h = 8;
  cfg.net.d_model = 4;
  cfg.train.total_env_steps = 20;
  cfg.train.n_envs = 2;
  cfg.train.eval_every = 2;
  cfg.train.eval_episodes = 2;
  cfg.seed = seed;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::path("tmp_test_run") / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

env::Observation synthetic_obs(int k, const std::vector<int>& ids) {
  env::Observation o;
  o.vec = Eigen::VectorXd::Zero(4);
  o.neighbor_ids.assign(k, -1);
  o.neighbor_valid.assign(k, false);
  for (int s = 0; s < static_cast<int>(ids.size()); ++s) {
    o.neighbor_ids[s] = ids[s];
    o.neighbor_valid[s] = true;
  }
  return o;
}

}  // namespace

TEST_CASE("config serializes and parses back identically") {
  RunConfig cfg = tiny_run("pp:4-2", Algo::RC, 9);
  cfg.rc_stop_prob = 0.25;
  cfg.hyper.lambda_m = 0.02;
  cfg.net.attention_double_exp = true;
  const std::string text = cfg.serialize();
  RunConfig back = RunConfig::parse_text(text);
  CHECK(back.serialize() == text);
  CHECK(back.scenario.tag() == "pp:4-2");
  CHECK(back.algo == Algo::RC);
  CHECK(back.net.attention_double_exp);
}

TEST_CASE("config accepts comments and rejects unknown keys and bad values") {
  RunConfig ok = RunConfig::parse_text("# a comment\n  algo = fc  # trailing\n\nseed = 7\n");
  CHECK(ok.algo == Algo::FC);
  CHECK(ok.seed == 7);
  CHECK_THROWS_WITH_AS(RunConfig::parse_text("algo.bogus = 3\n"),
                       doctest::Contains("unknown key"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::parse_text("hyper.gamma = banana\n"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::parse_text("algo = rc\nrc_stop_prob = 1.5\n"),
                  std::invalid_argument);
}

TEST_CASE("smoke train: csv columns, monotone env steps, artifacts on disk") {
  const fs::path dir = fresh_dir("smoke");
  RunConfig cfg = tiny_run("cn:2-2", Algo::TEM, 3);
  TrainOutcome out = train(cfg, dir.string());
  CHECK(out.env_steps == 20);
  CHECK(fs::exists(dir / "config.txt"));
  CHECK(fs::exists(dir / "checkpoint.bin"));
  CHECK(fs::exists(dir / "eval.csv"));

  std::ifstream in(out.metrics_path);
  std::string header;
  std::getline(in, header);
  CHECK(header == kMetricsHeader);
  std::string line;
  long prev_steps = 0;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // iteration
    std::getline(ls, cell, ',');  // env_steps
    const long steps = std::stol(cell);
    CHECK(steps > prev_steps);
    prev_steps = steps;
    int cols = 2;
    while (std::getline(ls, cell, ',')) ++cols;
    CHECK(cols == 13);
  }
  CHECK(rows == 2);
}

TEST_CASE("identical config and seed reproduce the metrics csv byte for byte") {
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  RunConfig cfg = tiny_run("pp:3-2", Algo::TEM, 17);
  train(cfg, a.string());
  train(cfg, b.string());
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(slurp(a / "eval.csv") == slurp(b / "eval.csv"));
}

TEST_CASE("checkpoint save-load-save round-trips byte identically") {
  const fs::path dir = fresh_dir("ckpt");
  RunConfig cfg = tiny_run("cn:2-2", Algo::TEM, 5);
  TrainOutcome out = train(cfg, dir.string());
  Checkpoint ck = load_checkpoint(out.checkpoint_path);
  const fs::path copy = dir / "copy.bin";
  save_checkpoint(ck, copy.string());
  CHECK(slurp(out.checkpoint_path) == slurp(copy));
}

TEST_CASE("mappo runs carry a zero comm rate") {
  const fs::path dir = fresh_dir("mappo");
  RunConfig cfg = tiny_run("cn:3-3", Algo::MAPPO, 7);
  TrainOutcome out = train(cfg, dir.string());
  std::ifstream in(out.metrics_path);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string cell;
    for (int c = 0; c <= 6; ++c) std::getline(ls, cell, ',');
    CHECK(std::stod(cell) == 0.0);  // comm_rate column
  }
}

TEST_CASE("baseline comm rules: fc always sends to fresh targets, rc degenerates") {
  Rng prng(1);
  RunConfig cfg = tiny_run("cn:4-4", Algo::FC, 1);
  net::ActorParams actor = build_actor(cfg, prng);
  env::Observation obs = synthetic_obs(cfg.scenario.k_neighbors, {1, 2});

  Rng fc_rng(42);
  auto fc = make_comm_chooser(cfg, actor, net::Mode::Sample, &fc_rng);
  for (int i = 0; i < 50; ++i) {
    auto [choice, dist] = fc(0, 0, obs, {}, {true, true, false});
    CHECK(choice != 0);
    CHECK(dist[0] == 0.0);
    CHECK(dist[3] == 0.0);
  }
  {
    auto [choice, dist] = fc(0, 0, obs, {}, {false, false, false});
    CHECK(choice == 0);
    CHECK(dist[0] == 1.0);
  }

  RunConfig rc1 = cfg;
  rc1.algo = Algo::RC;
  rc1.rc_stop_prob = 1.0;
  Rng rc_rng(42);
  auto rc = make_comm_chooser(rc1, actor, net::Mode::Sample, &rc_rng);
  for (int i = 0; i < 20; ++i) {
    auto [choice, dist] = rc(0, 0, obs, {}, {true, true, false});
    CHECK(choice == 0);
    CHECK(dist[0] == 1.0);
  }

  RunConfig rc0 = cfg;
  rc0.algo = Algo::RC;
  rc0.rc_stop_prob = 0.0;
  Rng ra(77), rb(77);
  auto fc2 = make_comm_chooser(cfg, actor, net::Mode::Sample, &ra);
  auto rc2 = make_comm_chooser(rc0, actor, net::Mode::Sample, &rb);
  for (int i = 0; i < 50; ++i) {
    auto [c1, d1] = fc2(0, 0, obs, {}, {true, true, false});
    auto [c2, d2] = rc2(0, 0, obs, {}, {true, true, false});
    CHECK(c1 == c2);
    CHECK(d1 == d2);
  }
}

TEST_CASE("transfer keeps the actor untouched and identity transfer matches eval") {
  const fs::path dir = fresh_dir("transfer");
  RunConfig cfg = tiny_run("pp:3-2", Algo::TEM, 11);
  TrainOutcome out = train(cfg, dir.string());
  Checkpoint ck = load_checkpoint(out.checkpoint_path);

  const auto reports = transfer_eval(
      ck, {env::ScenarioConfig::parse("pp:4-2"), env::ScenarioConfig::parse("pp:2-1"),
           env::ScenarioConfig::parse("pp:3-2")},
      4, 99);
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].first == "pp:4-2");
  CHECK(reports[0].second.episodes() == 4);

  EvalReport direct = evaluate_checkpoint(ck, env::ScenarioConfig::parse("pp:3-2"), 4, 99);
  CHECK(reports[2].second.ep_rewards == direct.ep_rewards);
  CHECK(reports[2].second.comm_rate == direct.comm_rate);
}

TEST_CASE("finetune: zero steps is identity, critic follows the new state size") {
  const fs::path dir = fresh_dir("finetune");
  RunConfig cfg = tiny_run("cn:3-3", Algo::TEM, 13);
  TrainOutcome out = train(cfg, dir.string());
  Checkpoint ck = load_checkpoint(out.checkpoint_path);

  const fs::path f0 = fresh_dir("finetune_zero");
  Checkpoint same = finetune(ck, env::ScenarioConfig::parse("cn:3-3"), 0, 13, f0.string());
  for (const auto& t : ck.tensors) {
    if (t.name.rfind("act/", 0) != 0 && t.name.rfind("msg/", 0) != 0) continue;
    const NamedTensor* other = same.find(t.name);
    REQUIRE(other != nullptr);
    CHECK(t.data == other->data);
  }

  const fs::path f1 = fresh_dir("finetune_more");
  Checkpoint moved = finetune(ck, env::ScenarioConfig::parse("cn:5-5"), 20, 13, f1.string());
  // actor shapes unchanged, critic input grew from 18 to 30
  CHECK(moved.find("critic/w1")->shape[0] == 30);
  CHECK(ck.find("critic/w1")->shape[0] == 18);
  CHECK(moved.find("act/obs_mlp/w1")->shape == ck.find("act/obs_mlp/w1")->shape);
}

TEST_CASE("eval dumps trajectory and chain csv files") {
  const fs::path dir = fresh_dir("evaldump");
  RunConfig cfg = tiny_run("pp:3-2", Algo::TEM, 19);
  TrainOutcome out = train(cfg, dir.string());
  Checkpoint ck = load_checkpoint(out.checkpoint_path);
  const fs::path dump = fresh_dir("evaldump_out");
  EvalReport rep =
      evaluate_checkpoint(ck, env::ScenarioConfig::parse("pp:3-2"), 2, 5, dump.string());
  CHECK(rep.episodes() == 2);
  CHECK(fs::exists(dump / "trajectory_ep0.csv"));
  CHECK(fs::exists(dump / "trajectory_ep1.csv"));
  CHECK(fs::exists(dump / "chains.csv"));
  std::ifstream traj(dump / "trajectory_ep0.csv");
  std::string header;
  std::getline(traj, header);
  CHECK(header == "step,entity_id,kind,x,y,vx,vy");
  std::ifstream chains(dump / "chains.csv");
  std::getline(chains, header);
  CHECK(header == "episode,step,round,sender,target");
}

TEST_CASE("evaluation is deterministic for a fixed seed") {
  const fs::path dir = fresh_dir("evaldet");
  RunConfig cfg = tiny_run("cn:3-3", Algo::TEM, 23);
  TrainOutcome out = train(cfg, dir.string());
  Checkpoint ck = load_checkpoint(out.checkpoint_path);
  EvalReport a = evaluate_checkpoint(ck, env::ScenarioConfig::parse("cn:3-3"), 3, 7);
  EvalReport b = evaluate_checkpoint(ck, env::ScenarioConfig::parse("cn:3-3"), 3, 7);
  CHECK(a.ep_rewards == b.ep_rewards);
  CHECK(a.ep_collisions == b.ep_collisions);
}

TEST_CASE("report renders curves and summary, and fails loudly otherwise") {
  const fs::path root = fresh_dir("report");
  RunConfig cfg = tiny_run("cn:2-2", Algo::TEM, 31);
  train(cfg, (root / "seed31").string());
  cfg.seed = 32;
  train(cfg, (root / "seed32").string());
  write_report(root.string());
  CHECK(fs::exists(root / "reward_curve.svg"));
  CHECK(fs::exists(root / "comm_rate_curve.svg"));
  const std::string summary = slurp(root / "summary.txt");
  CHECK(summary.find("tem(x2)") != std::string::npos);
  CHECK(summary.find("R (mean episode reward)") != std::string::npos);

  const fs::path empty = fresh_dir("report_empty");
  CHECK_THROWS_WITH_AS(write_report(empty.string()), doctest::Contains("no runs found"),
                       std::runtime_error);

  const fs::path corrupt = fresh_dir("report_corrupt");
  std::ofstream bad(corrupt / "metrics.csv");
  bad << "not,a,header\n";
  bad.close();
  CHECK_THROWS_WITH_AS(write_report(corrupt.string()), doctest::Contains("metrics.csv"),
                       std::runtime_error);
}
