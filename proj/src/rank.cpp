#include "tadt/rank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ranges>
#include <unordered_map>

#include "tadt/error.hpp"
#include "tadt/rng.hpp"

namespace tadt::rank {

std::vector<std::size_t> quickselect_topk(std::span<const double> values, std::size_t k) {
  require(k <= values.size(), ErrorKind::Parameter,
          "k=" + std::to_string(k) + " exceeds n=" + std::to_string(values.size()));
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto before = [&](std::size_t a, std::size_t b) { return values[a] > values[b] || (values[a] == values[b] && a < b); };
  if (k > 0 && k < idx.size()) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(), before);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::int64_t bin_return(double value, double bin_width) {
  return static_cast<std::int64_t>(std::llround(value / bin_width));
}

std::vector<std::int64_t> prefix_key(const SequenceView& seq, std::size_t t, double bin_width) {
  std::vector<std::int64_t> key;
  key.reserve(5 * t + 1);
  for (std::size_t u = 0; u < t; ++u) {
    key.push_back(seq.codes[u]);
    key.push_back(seq.actions[u]);
    key.push_back(bin_return(seq.returns[u].rtg, bin_width));
    key.push_back(bin_return(seq.returns[u].ta, bin_width));
  }
  key.push_back(seq.codes[t]);
  return key;
}

std::uint64_t hash_key(std::span<const std::int64_t> key) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ key.size();
  for (auto v : key) h = mix_seed(h ^ static_cast<std::uint64_t>(v));
  return h;
}

std::vector<Group> build_groups(std::span<const SequenceView> batch, double bin_width) {
  require(bin_width > 0, ErrorKind::Parameter, "bin_width must be positive");
  std::size_t horizon = 0;
  for (const auto& s : batch) {
    require(s.codes.size() == s.actions.size() && s.returns.size() == s.actions.size(), ErrorKind::Shape,
            "grouping inputs have inconsistent lengths");
    horizon = std::max(horizon, s.actions.size());
  }
  std::vector<Group> groups;
  for (std::size_t t = 0; t < horizon; ++t) {
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_hash;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (t >= batch[i].actions.size()) continue;
      auto key = prefix_key(batch[i], t, bin_width);
      const auto h = hash_key(key);
      auto& bucket = by_hash[h];
      Group* target = nullptr;
      for (std::size_t g : bucket)
        if (groups[g].key == key) target = &groups[g];
      if (target == nullptr) {
        bucket.push_back(groups.size());
        groups.push_back(Group{h, t, std::move(key), {}});
        target = &groups.back();
      }
      target->members.push_back(Member{i, t, batch[i].returns[t].rtg});
    }
  }
  return groups;
}

std::vector<RankPair> build_rank_pairs(std::span<const Group> groups, double beta, std::size_t pair_cap,
                                       std::uint64_t seed) {
  require(beta > 0 && beta < 1, ErrorKind::Parameter, "beta must lie in (0, 1)");
  std::vector<RankPair> pairs;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g].members;
    const auto n_pos = static_cast<std::size_t>(std::floor(beta * static_cast<double>(members.size())));
    if (n_pos == 0 || n_pos == members.size()) continue;
    std::vector<double> rtg;
    rtg.reserve(members.size());
    for (const auto& m : members) rtg.push_back(m.rtg);
    const auto top = quickselect_topk(rtg, n_pos);
    std::vector<char> is_pos(members.size(), 0);
    for (auto i : top) is_pos[i] = 1;
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < members.size(); ++i) (is_pos[i] ? pos : neg).push_back(i);
    const std::size_t total = pos.size() * neg.size();
    if (pair_cap == 0 || total <= pair_cap) {
      for (auto i : pos)
        for (auto j : neg) pairs.push_back({members[i], members[j]});
    } else {
      Rng rng(derive_seed(seed, g));
      std::vector<std::size_t> chosen(pair_cap);
      const auto iota = std::views::iota(std::size_t{0}, total);
      std::sample(iota.begin(), iota.end(), chosen.begin(), static_cast<std::ptrdiff_t>(pair_cap), rng.engine());
      for (auto c : chosen) pairs.push_back({members[pos[c / neg.size()]], members[neg[c % neg.size()]]});
    }
  }
  return pairs;
}

namespace {
double neg_log_sigmoid(double x) { return -(std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x)))); }
}  // namespace

double pairwise_rank_loss(std::span<const RankPair> pairs, const std::function<double(const Member&)>& logit,
                          double delta, bool sum) {
  require(delta >= 0, ErrorKind::Parameter, "delta must be non-negative");
  if (pairs.empty()) return 0.0;
  double total = 0;
  for (const auto& p : pairs) total += neg_log_sigmoid(logit(p.positive) - logit(p.negative) - delta);
  return sum ? total : total / static_cast<double>(pairs.size());
}

double pairwise_rank_loss(std::span<const Group> groups, const std::function<double(const Member&)>& logit, double beta,
                          double delta, std::size_t pair_cap, std::uint64_t seed) {
  const auto pairs = build_rank_pairs(groups, beta, pair_cap, seed);
  return pairwise_rank_loss(pairs, logit, delta);
}

template <typename Real>
nn::Var rank_loss(nn::Tape<Real>& tape, nn::Var logit_column, std::span<const RankPair> pairs,
                  const std::function<int(const Member&)>& row_of, double delta, bool sum) {
  require(delta >= 0, ErrorKind::Parameter, "delta must be non-negative");
  if (pairs.empty()) return tape.constant(nn::Tensor<Real>(1, 1));
  std::vector<int> pi, nj;
  pi.reserve(pairs.size());
  nj.reserve(pairs.size());
  for (const auto& p : pairs) {
    pi.push_back(row_of(p.positive));
    nj.push_back(row_of(p.negative));
  }
  const nn::Var diff = tape.add_constant(
      tape.sub(tape.gather_rows(logit_column, pi), tape.gather_rows(logit_column, nj)), static_cast<Real>(-delta));
  const nn::Var ls = tape.log_sigmoid(diff);
  return tape.scale(sum ? tape.sum(ls) : tape.mean(ls), Real(-1));
}

template nn::Var rank_loss<float>(nn::Tape<float>&, nn::Var, std::span<const RankPair>,
                                  const std::function<int(const Member&)>&, double, bool);
template nn::Var rank_loss<double>(nn::Tape<double>&, nn::Var, std::span<const RankPair>,
                                   const std::function<int(const Member&)>&, double, bool);

}  // namespace tadt::rank
