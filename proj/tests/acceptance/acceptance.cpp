// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Usage: acceptance [criterion ids...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tadt/bound.hpp"
#include "tadt/covering.hpp"
#include "tadt/csa.hpp"
#include "tadt/experiments.hpp"
#include "tadt/metrics.hpp"
#include "tadt/model_gradcheck.hpp"
#include "tadt/rank.hpp"
#include "tadt/stats.hpp"
#include "tadt/trainer.hpp"
#include "tadt/trajectory.hpp"

using namespace tadt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string join(const std::vector<double>& v, const char* f = "%.3f") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + fmt(f, v[i]);
  return out;
}

// ---------------------------------------------------------------- 1

Outcome return_signals() {
  Rng rng(101);
  const double gammas[] = {0.0, 0.5, 0.9, 1.0};
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double g = gammas[trial % 4];
    const int T = 1 + rng.index(50);
    std::vector<double> r(static_cast<std::size_t>(T));
    for (auto& x : r) x = rng.uniform(-1.0, 1.0);
    const auto rtg = compute_rtg(r, g);
    const auto ta = compute_ta(rtg, g);
    // Brute force: every sum spelled out.
    std::vector<double> rtg_o(T, 0.0), ta_o(T, 0.0);
    for (int t = 0; t < T; ++t)
      for (int i = t; i < T; ++i) rtg_o[t] += std::pow(g, i - t) * r[i];
    for (int t = 1; t < T; ++t)
      for (int j = 1; j <= t; ++j) ta_o[t] += std::pow(g, t - j) * (rtg_o[j] - rtg_o[j - 1]);
    for (int t = 0; t < T; ++t) worst = std::max({worst, std::abs(rtg[t] - rtg_o[t]), std::abs(ta[t] - ta_o[t])});
  }
  return {worst <= 1e-9, "max abs error " + fmt("%.2e", worst) + " over 1000 trajectories"};
}

// ---------------------------------------------------------------- 2

Outcome quickselect() {
  Rng rng(202);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(300);
    std::vector<double> x(n);
    const int distinct = trial % 3 == 0 ? 2 : (trial % 3 == 1 ? 10 : 1000000);  // duplicate-heavy first
    for (auto& v : x) v = static_cast<double>(rng.index(distinct));
    const std::size_t k = rng.index(static_cast<int>(n) + 1);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return x[i] > x[j]; });
    std::vector<std::size_t> want(order.begin(), order.begin() + static_cast<long>(k));
    std::sort(want.begin(), want.end());
    if (rank::quickselect_topk(x, k) != want) ++mismatches;
  }
  const std::vector<double> ties{2, 5, 5, 1, 5};
  const bool tie_rule = rank::quickselect_topk(ties, 2) == std::vector<std::size_t>{1, 2};
  return {mismatches == 0 && tie_rule,
          std::to_string(mismatches) + " mismatches in 1000 instances; lower-index tie rule " + (tie_rule ? "ok" : "broken")};
}

// ---------------------------------------------------------------- 3

Outcome group_hashing() {
  Rng rng(303);
  const double bin = 0.1;
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(256);
    const std::size_t L = 1 + rng.index(6);
    std::vector<std::vector<int>> codes(n), acts(n);
    std::vector<std::vector<ReturnSignal>> rets(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < L; ++t) {
        codes[i].push_back(rng.index(2));
        acts[i].push_back(rng.index(2));
        rets[i].push_back({0.1 * rng.index(2) + rng.uniform(-0.03, 0.03), 0.1 * rng.index(2)});
      }
    std::vector<rank::SequenceView> batch;
    for (std::size_t i = 0; i < n; ++i) batch.push_back({codes[i], acts[i], rets[i]});
    const auto groups = rank::build_groups(batch, bin);

    // Pairwise oracle: two (sample, t) items share a group iff their steps
    // agree and every earlier token matches after binning.
    auto same = [&](std::size_t i, std::size_t j, std::size_t t) {
      if (codes[i][t] != codes[j][t]) return false;
      for (std::size_t u = 0; u < t; ++u) {
        if (codes[i][u] != codes[j][u] || acts[i][u] != acts[j][u]) return false;
        if (std::llround(rets[i][u].rtg / bin) != std::llround(rets[j][u].rtg / bin)) return false;
        if (std::llround(rets[i][u].ta / bin) != std::llround(rets[j][u].ta / bin)) return false;
      }
      return true;
    };
    std::set<std::pair<std::size_t, std::vector<std::size_t>>> want, got;
    for (std::size_t t = 0; t < L; ++t) {
      std::vector<int> leader(n, -1);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i && leader[i] < 0; ++j)
          if (same(i, j, t)) leader[i] = leader[j] < 0 ? static_cast<int>(j) : leader[j];
      std::map<std::size_t, std::vector<std::size_t>> parts;
      for (std::size_t i = 0; i < n; ++i) parts[leader[i] < 0 ? i : static_cast<std::size_t>(leader[i])].push_back(i);
      for (auto& [_, members] : parts) want.insert({t, members});
    }
    for (const auto& g : groups) {
      std::vector<std::size_t> members;
      for (const auto& m : g.members) members.push_back(m.sample);
      got.insert({g.t, members});
    }
    if (got != want) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " of 100 batches differ from the pairwise oracle"};
}

// ---------------------------------------------------------------- 4

Outcome gradients() {
  const auto meta = gradcheck_meta();
  const auto config = gradcheck_config(0);
  const auto windows = random_windows(meta, 8, 2, 4);
  const std::vector<std::string> expected{"action", "rank", "return", "reward", "transition", "reg", "total"};
  bool pass = true;
  std::string detail;
  for (const bool single : {true, false}) {
    const auto r = gradcheck_model(config, meta, windows, single, single ? 1e-4 : 1e-6);
    double worst = 0;
    std::vector<std::string> names;
    for (const auto& l : r.losses) {
      worst = std::max(worst, l.report.max_rel_error);
      names.push_back(l.loss);
    }
    pass = pass && r.passed && names == expected;
    detail += std::string(detail.empty() ? "" : "; ") + r.precision + " max rel " + fmt("%.2e", worst) + " over " +
              std::to_string(names.size()) + " losses";
  }
  return {pass, detail};
}

// ---------------------------------------------------------------- 5

Outcome causality() {
  const auto meta = gradcheck_meta();
  int violations = 0, checks = 0;
  for (const bool no_csa : {false, true}) {
    TrainConfig config = gradcheck_config(9);
    config.T_max = 8;
    config.hard_assign = true;
    config.no_csa = no_csa;
    if (no_csa) config.rank_loss = false;
    const TadtCsaModel<double> model(config, meta);
    Rng rng(505);
    for (int trial = 0; trial < 10; ++trial) {
      const auto base = random_windows(meta, 3, 8, 50 + trial);
      const auto ref = model.infer(base);
      for (std::size_t t = 0; t < 8; ++t) {
        auto w = base;
        auto& x = w[1];  // middle window; its neighbours must not move either
        x.actions[t] = (x.actions[t] + 1) % meta.m;
        for (std::size_t k = t + 1; k < 8; ++k) {
          for (auto& v : x.states[k]) v = rng.normal();
          x.signals[k] = {rng.normal(), rng.normal()};
          x.actions[k] = rng.index(meta.m);
          x.rewards[k] = rng.uniform();
        }
        const auto out = model.infer(w);
        for (std::size_t row = 0; row < out.action_logits.rows; ++row) {
          const bool visible = row < ref.offsets[1] || row >= ref.offsets[1] + 8 || row - ref.offsets[1] <= t;
          if (!visible) continue;
          for (std::size_t j = 0; j < out.action_logits.cols; ++j, ++checks)
            if (out.action_logits(row, j) != ref.action_logits(row, j)) ++violations;
        }
        // The return head at t reads tokens before R_t.
        auto v = w;
        for (auto& s : v[1].states[t]) s = rng.normal();
        v[1].signals[t] = {rng.normal(), rng.normal()};
        const auto out2 = model.infer(v);
        const std::size_t row = ref.offsets[1] + t;
        for (std::size_t j = 0; j < 2; ++j, ++checks)
          if (out2.return_pred(row, j) != ref.return_pred(row, j)) ++violations;
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " of " + std::to_string(checks) + " exact comparisons changed"};
}

// ---------------------------------------------------------------- 6

Outcome quantizer() {
  const auto meta = gradcheck_meta();
  TrainConfig config = gradcheck_config(6);
  config.hard_assign = true;
  config.codebook_size = 8;
  const TadtCsaModel<double> model(config, meta);
  const auto windows = random_windows(meta, 16, 2, 66);
  nn::Tape<double> tape;
  ForwardOptions opts;
  opts.tau = 0.7;
  opts.noise_seed = 6;
  const auto res = model.forward(tape, windows, opts);
  const auto& hard = tape.value(res.assignment);
  const auto& probs = tape.value(res.assign_probs);
  bool one_hot = true;
  double row_err = 0.0;
  for (std::size_t i = 0; i < hard.rows; ++i) {
    int ones = 0;
    double s = 0.0;
    for (std::size_t j = 0; j < hard.cols; ++j) {
      if (hard(i, j) == 1.0) ++ones;
      else if (hard(i, j) != 0.0) one_hot = false;
      s += probs(i, j);
    }
    one_hot = one_hot && ones == 1;
    row_err = std::max(row_err, std::abs(s - 1.0));
  }

  // Entropy regularizer range on random, uniform and one-hot distributions.
  Rng rng(606);
  const int M = 8;
  bool in_range = true;
  for (int trial = 0; trial < 200; ++trial) {
    nn::Tensor<double> p(5, M);
    for (std::size_t i = 0; i < 5; ++i) {
      double s = 0;
      for (int j = 0; j < M; ++j) s += p(i, j) = trial % 3 == 0 ? 1.0 : (trial % 3 == 1 ? (j == trial % M) : rng.uniform());
      for (int j = 0; j < M; ++j) p(i, j) /= s;
    }
    for (auto mode : {csa::RegMode::PerSample, csa::RegMode::BatchMean}) {
      const double v = csa::entropy_reg_loss(p, mode);
      in_range = in_range && v >= -std::log(M) - 1e-12 && v <= 1e-12;
    }
  }

  // Gumbel-max frequencies at tau = 1.
  const std::vector<double> target{0.05, 0.1, 0.15, 0.2, 0.5};
  nn::Tensor<double> C(5, 1);
  const int draws = 10000;
  std::vector<int> counts(target.size(), 0);
  for (int s = 0; s < draws; ++s) ++counts[csa::gumbel_assign(target, C, 1.0, derive_seed(606, s), true).code_id];
  bool within = true;
  for (std::size_t j = 0; j < target.size(); ++j) {
    const double mean = draws * target[j], sd = std::sqrt(draws * target[j] * (1 - target[j]));
    within = within && std::abs(counts[j] - mean) <= 3 * sd;
  }
  return {one_hot && row_err <= 1e-6 && in_range && within,
          std::string("one-hot ") + (one_hot ? "exact" : "broken") + ", max |row sum - 1| " + fmt("%.1e", row_err) +
              ", entropy range " + (in_range ? "ok" : "violated") + ", Gumbel 3-sigma " + (within ? "ok" : "violated")};
}

// ---------------------------------------------------------------- 7

Outcome anti_collapse() {
  const auto mdp = env::make_random_mdp(77, 32, 4, 8, 0.25, 0.9);
  const auto behavior = env::mix_with_uniform(env::value_iteration(mdp).greedy, 0.5);
  const auto trajs = env::collect_trajectories(mdp, behavior, 100, 30, 5);
  int wins = 0;
  std::vector<double> with, without;
  for (int seed = 0; seed < 5; ++seed) {
    double ppl[2];
    for (int k = 0; k < 2; ++k) {
      TrainConfig cfg = desk_config();
      cfg.T_max = 10;
      cfg.epochs = 1000;
      cfg.max_steps = 500;
      cfg.seed = static_cast<std::uint64_t>(seed);
      cfg.lambda5 = k ? 0.1 : 0.0;
      Dataset ds = dataset_from(mdp, trajs);
      prepare_for_training(ds, cfg);
      ppl[k] = trained_usage_perplexity(cfg, ds);
    }
    without.push_back(ppl[0]);
    with.push_back(ppl[1]);
    if (ppl[1] > ppl[0]) ++wins;
  }
  return {wins >= 4, "perplexity lambda5=0.1 [" + join(with) + "] vs 0 [" + join(without) + "]; " +
                         std::to_string(wins) + "/5 seeds higher"};
}

// ---------------------------------------------------------------- 8

Outcome covering() {
  const std::vector<int> sizes{4, 16, 64, 256};
  const auto r = covering_radius_scaling(2, sizes, 0);
  return {!r.degenerate && std::abs(r.slope + 0.5) <= 0.15,
          "slope " + fmt("%.3f", r.slope) + " (r2 " + fmt("%.3f", r.r2) + "), radii [" + join(r.radii, "%.4f") + "]"};
}

// ---------------------------------------------------------------- 9

Outcome theorem() {
  const auto mdp = env::make_random_mdp(0, 32, 4, 20, 0.25, 0.9);
  const auto fixture = check_bound(mdp, lossless_abstraction(mdp));
  const bool lossless = fixture.eps_r == 0.0 && fixture.eps_P == 0.0 && fixture.value_gap == 0.0 && fixture.holds;

  env::CollectOptions co;
  co.bernoulli_rewards = false;
  auto trajs = env::collect_trajectories(mdp, env::PolicyTable::uniform(32, 4), 200, 30, 100, co);
  Dataset ds = dataset_from(mdp, std::move(trajs));
  TrainConfig cfg = desk_config();
  cfg.T_max = 30;
  cfg.epochs = 80;
  cfg.codebook_size = 32;
  cfg.lambda3 = 10.0;
  cfg.lambda4 = 0.1;
  cfg.reg_mode = "batch_mean";
  prepare_for_training(ds, cfg);
  cfg.checkpoint_every = planned_steps(cfg, make_windows(ds.trajectories, cfg.T_max).size()) / 5;
  std::vector<double> err_drop, gaps;
  bool holds = true;
  TrainHooks<float> hooks;
  hooks.on_checkpoint = [&](long, const TadtCsaModel<float>& m, const nn::AdamState<float>&) {
    if (gaps.size() == 5) return;
    const auto r = theorem_bound_check(m, mdp);
    holds = holds && r.holds && r.value_gap <= r.bound_value;
    err_drop.push_back(-(r.eps_r + r.eps_P));
    gaps.push_back(r.value_gap);
  };
  train<float>(cfg, ds, hooks);
  // rho < 0: the more the error has dropped, the smaller the gap.
  const double rho = gaps.size() == 5 ? stats::spearman(err_drop, gaps) : std::nan("");
  std::vector<double> errs;
  for (double e : err_drop) errs.push_back(-e);
  return {lossless && holds && gaps.size() == 5 && rho < -0.5,
          std::string("lossless ") + (lossless ? "exact" : "FAILED") + "; eps_r+eps_P [" + join(errs) + "], gap [" +
              join(gaps) + "], bound holds " + (holds ? "yes" : "no") + ", rho " + fmt("%.2f", rho)};
}

// ---------------------------------------------------------------- 10

Outcome ablation_ordering() {
  const auto variants = ablation_variants();
  int full_wins = 0, poorest_last = 0;
  std::string detail;
  for (int seed = 0; seed < 5; ++seed) {
    const auto mdp = env::make_random_mdp(derive_seed(seed, 0x4D44ULL), 32, 4, 8, 0.25, 0.9);
    const auto behavior = env::mix_with_uniform(env::value_iteration(mdp).greedy, 0.5);
    Dataset ds = dataset_from(mdp, env::collect_trajectories(mdp, behavior, 100, 50, derive_seed(seed, 0x41ULL)));
    TrainConfig cfg = desk_config();
    cfg.T_max = 20;
    cfg.epochs = 20;
    cfg.codebook_size = 32;
    cfg.reg_mode = "batch_mean";
    cfg.lambda1 = 0.1;
    cfg.seed = static_cast<std::uint64_t>(seed);
    prepare_for_training(ds, cfg);
    const auto scores = compare_variants(cfg, variants, ds, mdp, 20, 50, 99);
    std::map<std::string, double> by;
    for (const auto& s : scores) by[s.name] = s.mean_return;
    if (by["full"] >= by["no_csa+no_ta"]) ++full_wins;
    const double poorest = by["no_tac+no_ctp+no_rp"];
    bool last = true;
    for (const auto& s : scores)
      if (s.name != "no_tac+no_ctp+no_rp" && s.mean_return <= poorest) last = false;
    if (last) ++poorest_last;
    std::vector<double> row;
    for (const auto& s : scores) row.push_back(s.mean_return);
    detail += " s" + std::to_string(seed) + "[" + join(row, "%.1f") + "]";
  }
  std::string names;
  for (const auto& v : variants) names += (names.empty() ? "" : ",") + v.name;
  return {full_wins >= 4 && poorest_last >= 4, "full>=no_csa+no_ta " + std::to_string(full_wins) +
                                                   "/5, no_tac+no_ctp+no_rp last " + std::to_string(poorest_last) +
                                                   "/5; returns (" + names + "):" + detail};
}

// ---------------------------------------------------------------- 11

Outcome stitching() {
  std::vector<double> model, behavior;
  for (int seed = 0; seed < 5; ++seed) {
    TrainConfig cfg = desk_config();
    cfg.T_max = 30;
    cfg.epochs = 20;
    cfg.reg_mode = "batch_mean";
    cfg.seed = static_cast<std::uint64_t>(seed);
    const std::vector<int> chunks{30};
    const auto r = stitching_experiment(cfg, chunks);
    model.push_back(r.final_normalized(30));
    behavior.push_back(r.best_behavior_normalized());
  }
  const double m = stats::median(model), b = stats::median(behavior);
  return {m >= 0.9 && b < 0.9, "median normalized return " + fmt("%.3f", m) + " [" + join(model) +
                                   "], best behavior " + fmt("%.3f", b)};
}

// ---------------------------------------------------------------- 12

Outcome metrics() {
  Rng rng(1212);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + rng.index(50), queries = 1 + rng.index(20);
    std::vector<RankedResult> rs;
    for (int q = 0; q < queries; ++q) {
      RankedResult r;
      r.ranked.resize(static_cast<std::size_t>(m));
      std::iota(r.ranked.begin(), r.ranked.end(), 0);
      std::shuffle(r.ranked.begin(), r.ranked.end(), rng.engine());
      std::set<int> rel;
      const int want = 1 + rng.index(std::min(m, 5));
      while (static_cast<int>(rel.size()) < want) rel.insert(rng.index(m));
      r.relevant.assign(rel.begin(), rel.end());
      rs.push_back(std::move(r));
    }
    const int k = 1 + rng.index(m);
    double rec = 0, ndcg = 0, rr = 0;
    for (const auto& r : rs) {
      double hits = 0, dcg = 0, idcg = 0;
      for (int i = 0; i < k; ++i)
        if (std::count(r.relevant.begin(), r.relevant.end(), r.ranked[i])) {
          hits += 1;
          dcg += 1.0 / std::log2(i + 2.0);
        }
      for (int i = 0; i < std::min<int>(k, static_cast<int>(r.relevant.size())); ++i) idcg += 1.0 / std::log2(i + 2.0);
      for (int i = 0; i < m; ++i)
        if (std::count(r.relevant.begin(), r.relevant.end(), r.ranked[i])) {
          rr += 1.0 / (i + 1);
          break;
        }
      rec += hits / static_cast<double>(r.relevant.size());
      ndcg += dcg / idcg;
    }
    const double n = static_cast<double>(rs.size());
    worst = std::max({worst, std::abs(recall_at_k(rs, k) - rec / n), std::abs(ndcg_at_k(rs, k) - ndcg / n),
                      std::abs(mrr(rs) - rr / n)});
  }
  const std::vector<RankedResult> perfect{{{3, 0, 1, 2, 4}, {3}}};
  const std::vector<RankedResult> second{{{0, 3, 1, 2, 4}, {3}}};
  const std::vector<RankedResult> three{{{0, 1, 2, 3}, {0}}, {{1, 0, 2, 3}, {0}}, {{1, 2, 3, 0}, {0}}};
  const bool hand = recall_at_k(perfect, 1) == 1.0 && ndcg_at_k(perfect, 5) == 1.0 && mrr(perfect) == 1.0 &&
                    std::abs(ndcg_at_k(second, 5) - 1.0 / std::log2(3.0)) <= 1e-12 &&
                    std::abs(mrr(three) - 1.75 / 3.0) <= 1e-12;
  return {worst <= 1e-9 && hand, "max deviation " + fmt("%.1e", worst) + " on 100 instances; hand examples " +
                                     (hand ? "exact (1.0, 0.6309, 0.5833)" : "WRONG")};
}

// ---------------------------------------------------------------- 13

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  const auto mdp = env::make_random_mdp(13, 16, 4, 8, 0.3, 0.9);
  const auto behavior = env::mix_with_uniform(env::value_iteration(mdp).greedy, 0.3);
  const fs::path root = fs::temp_directory_path() / "tadt_acceptance_repro";
  fs::remove_all(root);
  std::vector<std::string> ckpt, csv, metrics_json;
  for (const char* run : {"a", "b"}) {
    Dataset ds = dataset_from(mdp, env::collect_trajectories(mdp, behavior, 40, 20, 7));
    TrainConfig cfg = desk_config();
    cfg.T_max = 10;
    cfg.epochs = 3;
    cfg.seed = 42;
    cfg.deterministic = true;
    cfg.workers = 1;
    prepare_for_training(ds, cfg);
    TrainHooks<float> hooks;
    hooks.out_dir = root / run;
    const auto result = train<float>(cfg, ds, hooks);
    const std::vector<int> ks{1, 2};
    ckpt.push_back(slurp(root / run / "final.ckpt"));
    csv.push_back(slurp(root / run / "metrics.csv"));
    metrics_json.push_back(offline_eval(*load_model<float>(root / run / "final.ckpt"), ds, ks).to_json());
  }
  const bool same = !ckpt[0].empty() && ckpt[0] == ckpt[1] && !csv[0].empty() && csv[0] == csv[1] &&
                    metrics_json[0] == metrics_json[1];
  fs::remove_all(root);
  return {same, "checkpoint " + std::to_string(ckpt[0].size()) + " B, metrics.csv " + std::to_string(csv[0].size()) +
                    " B, eval metrics: " + (same ? "bitwise identical" : "DIFFER")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "return-signal oracle equivalence", 5, return_signals},
      {2, "quickselect equivalence", 5, quickselect},
      {3, "group hashing equivalence", 30, group_hashing},
      {4, "gradient verification", 60, gradients},
      {5, "causality", 10, causality},
      {6, "quantizer invariants", 0, quantizer},
      {7, "anti-collapse trend", 300, anti_collapse},
      {8, "covering-radius scaling", 120, covering},
      {9, "value-gap bound checks", 600, theorem},
      {10, "ablation ordering", 900, ablation_ordering},
      {11, "trajectory stitching", 900, stitching},
      {12, "metric oracle equivalence", 0, metrics},
      {13, "reproducibility", 0, reproducibility},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0, ran = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s <= 0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("[%s] %2d %s: %s (%.1fs%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
