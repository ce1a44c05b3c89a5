#pragma once

#include <span>
#include <string>
#include <vector>

#include "tadt/dataset.hpp"
#include "tadt/model.hpp"

namespace tadt {

/// One query: items in model order, and the ground-truth relevant items.
struct RankedResult {
  std::vector<int> ranked;
  std::vector<int> relevant;
};

/// Throws Evaluation on an empty result set, k < 1, a list shorter than k,
/// duplicate ranked items or an empty relevant set.
double recall_at_k(std::span<const RankedResult> results, int k);
/// Binary relevance; IDCG places min(k, |relevant|) hits first.
double ndcg_at_k(std::span<const RankedResult> results, int k);
/// Reciprocal rank of the first relevant item (0 when none is ranked).
double mrr(std::span<const RankedResult> results);

struct MetricTable {
  std::vector<int> ks;
  std::vector<double> recall;
  std::vector<double> ndcg;
  double mrr = 0.0;
  std::size_t queries = 0;

  std::string to_csv() const;
  std::string to_json() const;
};

MetricTable metric_table(std::span<const RankedResult> results, std::span<const int> ks);

/// Items sorted by descending score, lower id first on ties.
std::vector<int> rank_items(std::span<const double> scores);

/// Ranks all m items by the action logits at every step of an annotated
/// held-out dataset, with the logged action as the relevant item.
template <typename Real>
std::vector<RankedResult> offline_rankings(const TadtCsaModel<Real>& model, const Dataset& held_out);

template <typename Real>
MetricTable offline_eval(const TadtCsaModel<Real>& model, const Dataset& held_out, std::span<const int> ks);

}  // namespace tadt
