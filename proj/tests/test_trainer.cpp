#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tadt/env/mdp.hpp"
#include "tadt/error.hpp"
#include "tadt/trainer.hpp"

using namespace tadt;
namespace fs = std::filesystem;

namespace {

// Deterministic-policy data on a small random MDP: actions are a function of the state.
Dataset policy_dataset(int n, int horizon, std::uint64_t seed) {
  const auto mdp = env::make_random_mdp(seed, 6, 3, 5, 0.5, 0.9);
  const std::vector<int> acts{0, 2, 1, 1, 0, 2};
  env::CollectOptions opts;
  Dataset ds;
  ds.trajectories = env::collect_trajectories(mdp, env::PolicyTable::deterministic(acts, 3), n, horizon, seed, opts);
  ds.meta.gamma = mdp.gamma;
  ds.meta.d_s = mdp.d_s();
  ds.meta.m = mdp.n_actions;
  return ds;
}

TrainConfig tiny_config() {
  TrainConfig c = desk_config();
  c.hidden_dim = 16;
  c.codebook_size = 6;
  c.T_max = 8;
  c.batch_size = 4;
  c.seed = 12;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("tadt_trainer_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("overfit: action loss halves within 200 steps") {
  auto ds = policy_dataset(10, 8, 3);
  auto config = tiny_config();
  config.epochs = 1000;
  config.max_steps = 200;
  prepare_for_training(ds, config);
  const auto res = train<float>(config, ds);
  REQUIRE(res.log.rows().size() == 200);
  const double first = res.log.rows().front().loss.action;
  double last = 0;
  for (std::size_t i = 190; i < 200; ++i) last += res.log.rows()[i].loss.action / 10;
  CAPTURE(first);
  CAPTURE(last);
  CHECK(last <= 0.5 * first);
  for (const auto& row : res.log.rows()) {
    const auto& l = row.loss;
    CHECK(l.total == doctest::Approx(l.action + l.rank + l.ret + l.reward + l.transition + l.reg).epsilon(1e-6));
  }
}

TEST_CASE("return head fits a constant-return dataset") {
  // Every trajectory has identical rewards, so every RTG at t=0 is the same constant.
  Dataset ds = policy_dataset(8, 4, 5);
  for (auto& t : ds.trajectories) t.rewards.assign(t.rewards.size(), 0.5);
  auto config = tiny_config();
  config.epochs = 1000;
  config.max_steps = 300;
  prepare_for_training(ds, config);
  const auto res = train<double>(config, ds);
  const auto windows = make_windows(ds.trajectories, config.T_max);
  const auto inf = res.model->infer(windows);
  const double target = ds.trajectories.front().signals.front().rtg;
  CHECK(std::abs(inf.return_pred(0, 0) - target) <= 0.1 * target);
}

TEST_CASE("identical runs give bitwise identical checkpoints and logs") {
  auto ds = policy_dataset(6, 8, 9);
  auto config = tiny_config();
  config.epochs = 3;
  prepare_for_training(ds, config);
  const auto a = scratch("det_a"), b = scratch("det_b");
  TrainHooks<float> ha, hb;
  ha.out_dir = a;
  hb.out_dir = b;
  train<float>(config, ds, ha);
  train<float>(config, ds, hb);
  CHECK(slurp(a / "final.ckpt") == slurp(b / "final.ckpt"));
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(slurp(a / "metrics.csv").rfind(RunLog::kHeader, 0) == 0);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("zero epochs return the initialized model and an empty log") {
  auto ds = policy_dataset(3, 4, 1);
  auto config = tiny_config();
  config.epochs = 0;
  prepare_for_training(ds, config);
  const auto res = train<float>(config, ds);
  CHECK(res.log.empty());
  CHECK(res.steps == 0);
  const TadtCsaModel<float> fresh(config, model_meta_from(ds));
  const auto w = make_windows(ds.trajectories, config.T_max);
  CHECK(res.model->infer(w).action_logits.data == fresh.infer(w).action_logits.data);
}

TEST_CASE("checkpoint cadence, reload, and corruption") {
  auto ds = policy_dataset(8, 8, 2);
  auto config = tiny_config();
  config.epochs = 2;
  config.checkpoint_every = 2;
  prepare_for_training(ds, config);
  const auto dir = scratch("ckpt");
  TrainHooks<float> hooks;
  hooks.out_dir = dir;
  std::vector<long> seen;
  hooks.on_checkpoint = [&](long step, const TadtCsaModel<float>&, const nn::AdamState<float>&) { seen.push_back(step); };
  const auto res = train<float>(config, ds, hooks);
  CHECK(res.steps == 4);
  CHECK(seen == std::vector<long>{2, 4});
  CHECK(fs::exists(dir / "step_2.ckpt"));
  CHECK(fs::exists(dir / "run_meta.json"));

  nn::AdamState<float> adam;
  const auto loaded = load_model<float>(dir / "final.ckpt", &adam);
  CHECK(adam.step == res.adam.step);
  const auto before = res.model->parameter_list();
  const auto after = loaded->parameter_list();
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i]->value.data == after[i]->value.data);

  const auto bytes = slurp(dir / "final.ckpt");
  std::ofstream(dir / "cut.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 10);
  try {
    load_model<float>(dir / "cut.ckpt");
    FAIL("truncated checkpoint loaded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Checkpoint);
  }
  fs::remove_all(dir);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  auto ds = policy_dataset(2, 4, 4);
  ds.trajectories[1].states[0][0] = 1e300;  // overflows in the encoder
  auto config = tiny_config();
  config.epochs = 1;
  config.batch_size = 2;
  prepare_for_training(ds, config);
  try {
    train<float>(config, ds);
    FAIL("expected a non-finite error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
    CHECK(std::string(e.what()).find("batch windows") != std::string::npos);
  }
}

TEST_CASE("invalid ablation combination is rejected") {
  auto config = tiny_config();
  config.no_csa = true;
  config.rank_loss = true;
  CHECK_THROWS_AS(config.validate(), Error);
}
