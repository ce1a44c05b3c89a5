#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "doctest.h"
#include "tadt/csa.hpp"
#include "tadt/error.hpp"
#include "tadt/nn/gradcheck.hpp"
#include "tadt/nn/param_vector.hpp"
#include "tadt/rank.hpp"
#include "tadt/rng.hpp"

using namespace tadt;
using nn::Tensor;

namespace {

Tensor<double> random_probs(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor<double> p(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double z = 0;
    for (std::size_t c = 0; c < cols; ++c) z += p(r, c) = rng.uniform(0.01, 1.0);
    for (std::size_t c = 0; c < cols; ++c) p(r, c) /= z;
  }
  return p;
}

}  // namespace

TEST_CASE("similarity: hand softmax and boundary cases") {
  const Tensor<double> C(2, 2, {1, 0, 0, 1});
  const std::vector<double> e{1, 0}, zero{0, 0};
  const auto p = csa::tac_svq_similarity(e, C, zero, 1.0);
  CHECK(p[0] == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(0.2689).epsilon(1e-4));

  const auto u = csa::tac_svq_similarity(zero, C, zero, 0.4);
  CHECK(u[0] == doctest::Approx(0.5));

  // alpha = 1 ignores the TA embedding entirely
  const std::vector<double> ta{5, -3};
  const auto q = csa::tac_svq_similarity(e, C, ta, 1.0);
  CHECK(q[0] == doctest::Approx(p[0]));

  const std::vector<double> bad{1, 2, 3};
  CHECK_THROWS_AS(csa::tac_svq_similarity(bad, C, zero, 0.5), Error);
}

TEST_CASE("gumbel assign: hard one-hot, soft path, and frequency property") {
  const Tensor<double> C(3, 2, {1, 0, 0, 1, 1, 1});
  const std::vector<double> probs{0.2, 0.5, 0.3};
  const auto hard = csa::gumbel_assign(probs, C, 0.5, 7, true);
  CHECK(std::count(hard.assignment.begin(), hard.assignment.end(), 1.0) == 1);
  CHECK(std::accumulate(hard.assignment.begin(), hard.assignment.end(), 0.0) == 1.0);
  CHECK(hard.assignment[hard.code_id] == 1.0);
  CHECK(hard.code_vec[0] == C(hard.code_id, 0));

  // with supplied noise the hard code is argmax(log p + g)
  const std::vector<double> g{0.0, -1.0, 0.5};
  const auto fixed = csa::gumbel_assign_with_noise(probs, C, 0.01, g, true);
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (std::log(probs[i]) + g[i] > std::log(probs[best]) + g[best]) best = i;
  CHECK(fixed.code_id == best);

  const auto soft = csa::gumbel_assign_with_noise(probs, C, 1.0, g, false);
  CHECK(std::accumulate(soft.assignment.begin(), soft.assignment.end(), 0.0) == doctest::Approx(1.0));

  std::vector<int> counts(3, 0);
  const int draws = 4000;
  for (int s = 0; s < draws; ++s) ++counts[csa::gumbel_assign(probs, C, 1.0, derive_seed(11, s), true).code_id];
  for (int i = 0; i < 3; ++i) {
    const double sigma = std::sqrt(probs[i] * (1 - probs[i]) / draws);
    CHECK(std::abs(counts[i] / double(draws) - probs[i]) < 3 * sigma);
  }
}

TEST_CASE("entropy regularizer values") {
  Tensor<double> uniform(2, 64, 1.0 / 64);
  CHECK(csa::entropy_reg_loss(uniform) == doctest::Approx(-std::log(64.0)));
  Tensor<double> onehot(1, 4);
  onehot(0, 2) = 1;
  CHECK(csa::entropy_reg_loss(onehot) == doctest::Approx(0.0));
  Tensor<double> row(1, 2, {0.7311, 0.2689});
  CHECK(csa::entropy_reg_loss(row) == doctest::Approx(-0.5823).epsilon(1e-3));

  // batch_mean: two opposite one-hots average to uniform
  Tensor<double> opposite(2, 2, {1, 0, 0, 1});
  CHECK(csa::entropy_reg_loss(opposite, csa::RegMode::BatchMean) == doctest::Approx(-std::log(2.0)));
  CHECK(csa::usage_perplexity(opposite) == doctest::Approx(2.0));

  Rng rng(3);
  const auto p = random_probs(20, 6, rng);
  const double v = csa::entropy_reg_loss(p);
  CHECK(v <= 0.0);
  CHECK(v >= -std::log(6.0));
}

TEST_CASE("rp and ctp losses against direct oracles") {
  const std::vector<double> pred{1, 2, 3}, target{0, 1, 2};
  CHECK(csa::rp_loss(pred, target) == doctest::Approx(1.0));
  CHECK(csa::rp_loss(pred, pred) == 0.0);
  CHECK(csa::rp_loss(pred, target, csa::Reduction::Sum) == doctest::Approx(3.0));

  Tensor<double> equal(5, 4, 0.3);
  CHECK(csa::ctp_loss(equal) == doctest::Approx(std::log(4.0)));
  Tensor<double> sharp(1, 3, {60.0, 0.0, 0.0});
  CHECK(csa::ctp_loss(sharp) < 1e-20);

  Rng rng(9);
  Tensor<double> z(4, 3);
  for (auto& x : z.data) x = rng.normal();
  double oracle = 0, oracle_neg = 0;
  for (std::size_t r = 0; r < 4; ++r) {
    double all = 0, negs = 0;
    for (std::size_t c = 0; c < 3; ++c) all += std::exp(z(r, c));
    for (std::size_t c = 1; c < 3; ++c) negs += std::exp(z(r, c));
    oracle += -std::log(std::exp(z(r, 0)) / all);
    oracle_neg += -std::log(std::exp(z(r, 0)) / negs);
  }
  CHECK(csa::ctp_loss(z) == doctest::Approx(oracle / 4).epsilon(1e-9));
  CHECK(csa::ctp_loss(z, csa::CtpDenominator::NegativesOnly) == doctest::Approx(oracle_neg / 4).epsilon(1e-9));
}

TEST_CASE("tape losses match the value functions and gradcheck") {
  Rng rng(21);
  const auto probs = random_probs(3, 4, rng);
  Tensor<double> logits(3, 4);
  for (auto& x : logits.data) x = rng.normal();
  for (const auto mode : {csa::RegMode::PerSample, csa::RegMode::BatchMean}) {
    nn::Tape<double> tape;
    const auto v = tape.scalar(csa::entropy_reg(tape, tape.constant(probs), mode, csa::Reduction::Mean));
    CHECK(v == doctest::Approx(csa::entropy_reg_loss(probs, mode)).epsilon(1e-12));
  }
  for (const auto denom : {csa::CtpDenominator::WithPositive, csa::CtpDenominator::NegativesOnly}) {
    nn::Tape<double> tape;
    const auto v = tape.scalar(csa::info_nce(tape, tape.constant(logits), denom, csa::Reduction::Mean));
    CHECK(v == doctest::Approx(csa::ctp_loss(logits, denom)).epsilon(1e-12));

    nn::Tape<double> t2;
    const auto x = t2.input(logits);
    t2.backward(csa::info_nce(t2, x, denom, csa::Reduction::Mean));
    const auto analytic = t2.grad(x).data;
    const auto f = [&](std::span<const double> v) {
      return csa::ctp_loss(Tensor<double>(3, 4, std::vector<double>(v.begin(), v.end())), denom);
    };
    CHECK(nn::gradcheck(f, logits.data, analytic, 1e-6).passed);
  }
}

TEST_CASE("negative sampling respects exclusions and seeds") {
  Rng a(5), b(5);
  const auto n1 = csa::sample_negatives(10, 2, 7, 4, a);
  const auto n2 = csa::sample_negatives(10, 2, 7, 4, b);
  CHECK(n1 == n2);
  CHECK(n1.size() == 4);
  CHECK(std::set<int>(n1.begin(), n1.end()).size() == 4);
  for (int n : n1) CHECK((n != 2 && n != 7));

  Rng c(1);
  const auto wr = csa::sample_negatives(4, 0, 1, 5, c);  // only ids 2, 3 are eligible
  CHECK(wr.size() == 5);
  for (int n : wr) CHECK(n >= 2);
  Rng d(1);
  CHECK_THROWS_AS(csa::sample_negatives(2, 0, 1, 1, d), Error);
}

TEST_CASE("csa loss recombines weighted parts") {
  const auto parts = csa::csa_loss(0.4, 1.2, -2.0, 0.5, 2.0, 0.1);
  CHECK(parts.total == doctest::Approx(0.5 * 0.4 + 2.0 * 1.2 + 0.1 * -2.0).epsilon(1e-12));
  CHECK(csa::csa_loss(1, 2, 3, 0, 0, 0).total == 0.0);
  CHECK(csa::csa_loss(0.7, 2, 3, 1, 0, 0).total == 0.7);
}

TEST_CASE("quickselect top-k against a sort oracle") {
  const std::vector<double> v{3, 1, 2, 5, 4};
  CHECK(rank::quickselect_topk(v, 2) == std::vector<std::size_t>{3, 4});
  CHECK(rank::quickselect_topk(v, 0).empty());
  CHECK(rank::quickselect_topk(v, 5).size() == 5);
  const std::vector<double> same(6, 1.0);
  CHECK(rank::quickselect_topk(same, 1) == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(rank::quickselect_topk(v, 6), Error);

  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<double> x(n);
    for (auto& val : x) val = static_cast<double>(rng.index(6));  // many ties
    const std::size_t k = rng.index(static_cast<int>(n) + 1);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return x[i] > x[j]; });
    std::vector<std::size_t> expected(order.begin(), order.begin() + k);
    std::sort(expected.begin(), expected.end());
    CHECK(rank::quickselect_topk(x, k) == expected);
  }
}

TEST_CASE("grouping is an equivalence on binned prefixes") {
  // Three sequences: 0 and 1 share the first step, 2 differs in the first action.
  const std::vector<int> codes0{1, 2, 3}, codes1{1, 2, 0}, codes2{1, 2, 3};
  const std::vector<int> acts0{0, 1, 1}, acts1{0, 1, 2}, acts2{3, 1, 1};
  const std::vector<ReturnSignal> r0{{1.02, 0}, {0.5, -0.1}, {0.2, 0}}, r1{{0.98, 0}, {0.52, -0.1}, {0.3, 0}},
      r2{{1.0, 0}, {0.5, -0.1}, {0.2, 0}};
  const std::vector<rank::SequenceView> batch{{codes0, acts0, r0}, {codes1, acts1, r1}, {codes2, acts2, r2}};
  const auto groups = rank::build_groups(batch, 0.1);

  // Brute-force oracle: same t and identical prefix keys.
  std::map<std::pair<std::size_t, std::vector<std::int64_t>>, std::set<std::size_t>> oracle;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < 3; ++t) {
      std::vector<std::int64_t> key;
      for (std::size_t k = 0; k < t; ++k) {
        key.push_back(batch[i].codes[k]);
        key.push_back(batch[i].actions[k]);
        key.push_back(std::llround(batch[i].returns[k].rtg / 0.1));
        key.push_back(std::llround(batch[i].returns[k].ta / 0.1));
      }
      key.push_back(batch[i].codes[t]);
      oracle[{t, key}].insert(i);
    }
  std::set<std::pair<std::size_t, std::set<std::size_t>>> got, want;
  for (const auto& g : groups) {
    std::set<std::size_t> members;
    for (const auto& m : g.members) members.insert(m.sample);
    got.insert({g.t, members});
  }
  for (const auto& [k, v] : oracle) want.insert({k.first, v});
  CHECK(got == want);
  // at t = 1 sequences 0 and 1 share a group (returns bin together), 2 does not
  CHECK(want.count({1, {0, 1}}) == 1);
}

TEST_CASE("pairwise rank loss values") {
  rank::Group g;
  g.t = 0;
  for (std::size_t i = 0; i < 4; ++i) g.members.push_back({i, 0, static_cast<double>(i)});
  const std::vector<rank::Group> groups{g};
  const auto pairs = rank::build_rank_pairs(groups, 0.5, 256, 0);
  CHECK(pairs.size() == 4);  // 2 positives x 2 negatives
  for (const auto& p : pairs) CHECK(p.positive.rtg > p.negative.rtg);

  const auto flat = [](const rank::Member&) { return 0.3; };
  CHECK(rank::pairwise_rank_loss(pairs, flat, 0.0) == doctest::Approx(std::log(2.0)));
  const auto margin = [](const rank::Member& m) { return m.rtg >= 2 ? 1.3 : 1.0; };
  CHECK(rank::pairwise_rank_loss(pairs, margin, 0.3) == doctest::Approx(std::log(2.0)));
  const auto wide = [](const rank::Member& m) { return m.rtg >= 2 ? 10.3 : 0.0; };
  CHECK(rank::pairwise_rank_loss(pairs, wide, 0.3) == doctest::Approx(4.54e-5).epsilon(1e-2));
  const auto shifted = [&](const rank::Member& m) { return margin(m) + 7.0; };
  CHECK(rank::pairwise_rank_loss(pairs, shifted, 0.3) == doctest::Approx(rank::pairwise_rank_loss(pairs, margin, 0.3)));

  rank::Group single;
  single.members.push_back({0, 0, 1.0});
  const std::vector<rank::Group> lone{single};
  CHECK(rank::build_rank_pairs(lone, 0.5, 256, 0).empty());

  // cap keeps at most pair_cap pairs per group
  rank::Group big;
  for (std::size_t i = 0; i < 100; ++i) big.members.push_back({i, 0, static_cast<double>(i)});
  const std::vector<rank::Group> bigs{big};
  CHECK(rank::build_rank_pairs(bigs, 0.5, 256, 1).size() == 256);
  CHECK(rank::build_rank_pairs(bigs, 0.5, 256, 1).size() == rank::build_rank_pairs(bigs, 0.5, 256, 1).size());
}
