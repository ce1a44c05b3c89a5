#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tadt/nn/tape.hpp"
#include "tadt/trajectory.hpp"

namespace tadt::rank {

/// Indices of the k largest values, returned in ascending index order. Equal
/// values prefer the lower index. Expected O(n) via partition-based selection.
std::vector<std::size_t> quickselect_topk(std::span<const double> values, std::size_t k);

/// One sequence of a batch as seen by the grouping step.
struct SequenceView {
  std::span<const int> codes;
  std::span<const int> actions;
  std::span<const ReturnSignal> returns;
};

struct Member {
  std::size_t sample = 0;
  std::size_t t = 0;
  double rtg = 0.0;
};

struct Group {
  std::uint64_t hash = 0;
  std::size_t t = 0;
  std::vector<std::int64_t> key;
  std::vector<Member> members;
};

/// Returns rounded to the nearest multiple of bin_width.
std::int64_t bin_return(double value, double bin_width);

/// Key of the prefix (c_1, a_1, R~_1, ..., c_{t-1}, a_{t-1}, R~_{t-1}, c_t).
std::vector<std::int64_t> prefix_key(const SequenceView& seq, std::size_t t, double bin_width);

std::uint64_t hash_key(std::span<const std::int64_t> key);

/// Partitions every (sample, t) by its binned prefix key. Groups are ordered
/// by t, then by first appearance; members keep (sample, t) order. Hash
/// matches are confirmed by a full key comparison.
std::vector<Group> build_groups(std::span<const SequenceView> batch, double bin_width);

struct RankPair {
  Member positive;
  Member negative;
};

/// Positives are the top floor(beta * N_g) RTGs of each group; all remaining
/// members are negatives. Groups with more than `pair_cap` pairs are
/// subsampled uniformly without replacement from a stream keyed by `seed`.
std::vector<RankPair> build_rank_pairs(std::span<const Group> groups, double beta, std::size_t pair_cap,
                                       std::uint64_t seed);

/// Mean (or sum) over pairs of -log sigmoid(l_i - l_j - delta); 0 without pairs.
double pairwise_rank_loss(std::span<const RankPair> pairs, const std::function<double(const Member&)>& logit,
                          double delta, bool sum = false);

/// Convenience: groups -> pairs -> loss.
double pairwise_rank_loss(std::span<const Group> groups, const std::function<double(const Member&)>& logit, double beta,
                          double delta, std::size_t pair_cap = 256, std::uint64_t seed = 0);

/// Differentiable version over a column of ranked logits; `row_of` maps a
/// member to its row.
template <typename Real>
nn::Var rank_loss(nn::Tape<Real>& tape, nn::Var logit_column, std::span<const RankPair> pairs,
                  const std::function<int(const Member&)>& row_of, double delta, bool sum = false);

}  // namespace tadt::rank
