#include "tadt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "tadt/error.hpp"

namespace tadt {

namespace {

void check_results(std::span<const RankedResult> results, int k) {
  require(!results.empty(), ErrorKind::Evaluation, "metric over an empty result set");
  require(k >= 1, ErrorKind::Evaluation, "k must be >= 1");
  for (std::size_t q = 0; q < results.size(); ++q) {
    const auto& r = results[q];
    require(!r.relevant.empty(), ErrorKind::Evaluation, "query " + std::to_string(q) + " has no relevant items");
    require(r.ranked.size() >= static_cast<std::size_t>(k), ErrorKind::Evaluation,
            "query " + std::to_string(q) + " ranks " + std::to_string(r.ranked.size()) + " items, fewer than k=" +
                std::to_string(k));
    std::unordered_set<int> seen;
    for (int item : r.ranked)
      require(seen.insert(item).second, ErrorKind::Evaluation,
              "query " + std::to_string(q) + " ranks item " + std::to_string(item) + " twice");
  }
}

std::unordered_set<int> as_set(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

double recall_at_k(std::span<const RankedResult> results, int k) {
  check_results(results, k);
  double total = 0;
  for (const auto& r : results) {
    const auto rel = as_set(r.relevant);
    int hits = 0;
    for (int i = 0; i < k; ++i) hits += static_cast<int>(rel.count(r.ranked[i]));
    total += static_cast<double>(hits) / static_cast<double>(rel.size());
  }
  return total / static_cast<double>(results.size());
}

double ndcg_at_k(std::span<const RankedResult> results, int k) {
  check_results(results, k);
  double total = 0;
  for (const auto& r : results) {
    const auto rel = as_set(r.relevant);
    double dcg = 0, idcg = 0;
    for (int i = 0; i < k; ++i)
      if (rel.count(r.ranked[i])) dcg += 1.0 / std::log2(i + 2.0);
    const int ideal = std::min<int>(k, static_cast<int>(rel.size()));
    for (int i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(i + 2.0);
    total += dcg / idcg;
  }
  return total / static_cast<double>(results.size());
}

double mrr(std::span<const RankedResult> results) {
  check_results(results, 1);
  double total = 0;
  for (const auto& r : results) {
    const auto rel = as_set(r.relevant);
    for (std::size_t i = 0; i < r.ranked.size(); ++i)
      if (rel.count(r.ranked[i])) {
        total += 1.0 / static_cast<double>(i + 1);
        break;
      }
  }
  return total / static_cast<double>(results.size());
}

MetricTable metric_table(std::span<const RankedResult> results, std::span<const int> ks) {
  MetricTable t;
  t.ks.assign(ks.begin(), ks.end());
  for (int k : ks) {
    t.recall.push_back(recall_at_k(results, k));
    t.ndcg.push_back(ndcg_at_k(results, k));
  }
  t.mrr = mrr(results);
  t.queries = results.size();
  return t;
}

std::string MetricTable::to_csv() const {
  std::ostringstream out;
  out << "metric,k,value\n";
  char buf[128];
  for (std::size_t i = 0; i < ks.size(); ++i) {
    std::snprintf(buf, sizeof buf, "recall,%d,%.9g\nndcg,%d,%.9g\n", ks[i], recall[i], ks[i], ndcg[i]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "mrr,,%.9g\n", mrr);
  out << buf;
  return out.str();
}

std::string MetricTable::to_json() const {
  nlohmann::ordered_json j;
  j["queries"] = queries;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    j["recall@" + std::to_string(ks[i])] = recall[i];
    j["ndcg@" + std::to_string(ks[i])] = ndcg[i];
  }
  j["mrr"] = mrr;
  return j.dump(2) + "\n";
}

std::vector<int> rank_items(std::span<const double> scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

template <typename Real>
std::vector<RankedResult> offline_rankings(const TadtCsaModel<Real>& model, const Dataset& held_out) {
  const auto windows = make_windows(held_out.trajectories, model.config().T_max);
  std::vector<RankedResult> out;
  constexpr std::size_t kChunk = 256;
  for (std::size_t begin = 0; begin < windows.size(); begin += kChunk) {
    const std::size_t end = std::min(windows.size(), begin + kChunk);
    const std::span<const Window> batch(windows.data() + begin, end - begin);
    const auto inf = model.infer(batch);
    std::size_t row = 0;
    for (const auto& w : batch)
      for (std::size_t t = 0; t < w.length(); ++t, ++row)
        out.push_back({rank_items(inf.action_logits.row(row)), {w.actions[t]}});
  }
  return out;
}

template <typename Real>
MetricTable offline_eval(const TadtCsaModel<Real>& model, const Dataset& held_out, std::span<const int> ks) {
  const auto results = offline_rankings(model, held_out);
  return metric_table(results, ks);
}

template std::vector<RankedResult> offline_rankings<float>(const TadtCsaModel<float>&, const Dataset&);
template std::vector<RankedResult> offline_rankings<double>(const TadtCsaModel<double>&, const Dataset&);
template MetricTable offline_eval<float>(const TadtCsaModel<float>&, const Dataset&, std::span<const int>);
template MetricTable offline_eval<double>(const TadtCsaModel<double>&, const Dataset&, std::span<const int>);

}  // namespace tadt
