#include "tadt/csa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tadt/error.hpp"
#include "tadt/nn/gradcheck.hpp"

namespace tadt::csa {

namespace {

constexpr double kLogFloor = 1e-20;

std::vector<double> softmax(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double total = 0;
  for (std::size_t i = 0; i < z.size(); ++i) total += out[i] = std::exp(z[i] - mx);
  for (double& x : out) x /= total;
  return out;
}

double plogp(double p) { return p * std::log(std::max(p, kLogFloor)); }

}  // namespace

RegMode parse_reg_mode(const std::string& text) {
  if (text == "per_sample") return RegMode::PerSample;
  if (text == "batch_mean") return RegMode::BatchMean;
  fail(ErrorKind::Parameter, "reg_mode must be per_sample or batch_mean, got '" + text + "'");
}

CtpDenominator parse_ctp_denominator(const std::string& text) {
  if (text == "with_positive") return CtpDenominator::WithPositive;
  if (text == "negatives_only") return CtpDenominator::NegativesOnly;
  fail(ErrorKind::Parameter, "ctp_denominator must be with_positive or negatives_only, got '" + text + "'");
}

Reduction parse_reduction(const std::string& text) {
  if (text == "mean") return Reduction::Mean;
  if (text == "sum") return Reduction::Sum;
  fail(ErrorKind::Parameter, "reduction must be mean or sum, got '" + text + "'");
}

std::string to_string(RegMode mode) { return mode == RegMode::PerSample ? "per_sample" : "batch_mean"; }
std::string to_string(CtpDenominator mode) {
  return mode == CtpDenominator::WithPositive ? "with_positive" : "negatives_only";
}
std::string to_string(Reduction mode) { return mode == Reduction::Mean ? "mean" : "sum"; }

std::vector<double> tac_svq_similarity(std::span<const double> e, const nn::Tensor<double>& codebook,
                                       std::span<const double> ta_emb, double alpha) {
  require(alpha >= 0 && alpha <= 1, ErrorKind::Parameter, "alpha must lie in [0, 1]");
  require(e.size() == codebook.cols && ta_emb.size() == codebook.cols, ErrorKind::Shape,
          "similarity inputs have dims " + std::to_string(e.size()) + "/" + std::to_string(ta_emb.size()) +
              " but the codebook is " + codebook.shape_string());
  require(codebook.rows >= 1, ErrorKind::Shape, "empty codebook");
  std::vector<double> z(codebook.rows, 0.0);
  for (std::size_t i = 0; i < codebook.rows; ++i) {
    double se = 0, st = 0;
    for (std::size_t k = 0; k < codebook.cols; ++k) {
      se += codebook(i, k) * e[k];
      st += codebook(i, k) * ta_emb[k];
    }
    z[i] = alpha * se + (1 - alpha) * st;
  }
  return softmax(z);
}

QuantizedState gumbel_assign_with_noise(std::span<const double> probs, const nn::Tensor<double>& codebook,
                                        double temperature, std::span<const double> gumbel, bool hard) {
  require(temperature > 0, ErrorKind::Parameter, "temperature must be positive");
  require(probs.size() == codebook.rows && gumbel.size() == probs.size(), ErrorKind::Shape,
          "assignment distribution does not match the codebook size");
  std::vector<double> y(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    y[i] = (std::log(std::max(probs[i], kLogFloor)) + gumbel[i]) / temperature;
  QuantizedState q;
  q.assign_probs.assign(probs.begin(), probs.end());
  q.soft_assign = softmax(y);
  q.code_id = static_cast<int>(std::max_element(y.begin(), y.end()) - y.begin());
  if (hard) {
    q.assignment.assign(probs.size(), 0.0);
    q.assignment[q.code_id] = 1.0;
  } else {
    q.assignment = q.soft_assign;
  }
  q.code_vec.assign(codebook.cols, 0.0);
  for (std::size_t i = 0; i < codebook.rows; ++i)
    if (q.assignment[i] != 0.0)
      for (std::size_t k = 0; k < codebook.cols; ++k) q.code_vec[k] += q.assignment[i] * codebook(i, k);
  return q;
}

QuantizedState gumbel_assign(std::span<const double> probs, const nn::Tensor<double>& codebook, double temperature,
                             std::uint64_t seed, bool hard) {
  const auto g = nn::gumbel_sample(1, probs.size(), seed);
  return gumbel_assign_with_noise(probs, codebook, temperature, g.data, hard);
}

double entropy_reg_loss(const nn::Tensor<double>& probs, RegMode mode) {
  require(probs.rows >= 1, ErrorKind::Shape, "entropy regularizer needs at least one row");
  if (mode == RegMode::BatchMean) {
    double total = 0;
    for (std::size_t c = 0; c < probs.cols; ++c) {
      double mean = 0;
      for (std::size_t r = 0; r < probs.rows; ++r) mean += probs(r, c);
      total += plogp(mean / static_cast<double>(probs.rows));
    }
    return total;
  }
  double total = 0;
  for (double p : probs.data) total += plogp(p);
  return total / static_cast<double>(probs.rows);
}

double usage_perplexity(const nn::Tensor<double>& probs) { return std::exp(-entropy_reg_loss(probs, RegMode::BatchMean)); }

double rp_loss(std::span<const double> predicted, std::span<const double> target, Reduction reduction) {
  require(predicted.size() == target.size(), ErrorKind::Shape, "prediction/target length mismatch");
  require(!predicted.empty(), ErrorKind::Shape, "empty reward batch");
  double total = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) total += (predicted[i] - target[i]) * (predicted[i] - target[i]);
  return reduction == Reduction::Mean ? total / static_cast<double>(predicted.size()) : total;
}

double ctp_loss(const nn::Tensor<double>& logits, CtpDenominator denominator, Reduction reduction) {
  require(logits.rows >= 1 && logits.cols >= 2, ErrorKind::Shape, "CTP logits need a positive and a negative column");
  double total = 0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row(r);
    const std::size_t begin = denominator == CtpDenominator::WithPositive ? 0 : 1;
    double mx = row[begin];
    for (std::size_t c = begin; c < row.size(); ++c) mx = std::max(mx, row[c]);
    double s = 0;
    for (std::size_t c = begin; c < row.size(); ++c) s += std::exp(row[c] - mx);
    total += -(row[0] - mx - std::log(s));
  }
  return reduction == Reduction::Mean ? total / static_cast<double>(logits.rows) : total;
}

std::vector<int> sample_negatives(int codebook_size, int exclude_current, int exclude_next, int k_neg, Rng& rng) {
  require(k_neg >= 1, ErrorKind::Parameter, "k_neg must be at least 1");
  std::vector<int> candidates;
  for (int j = 0; j < codebook_size; ++j)
    if (j != exclude_current && j != exclude_next) candidates.push_back(j);
  require(!candidates.empty(), ErrorKind::Sampling,
          "no codebook entry differs from both the current and next code (M=" + std::to_string(codebook_size) + ")");
  std::vector<int> out;
  out.reserve(k_neg);
  if (static_cast<int>(candidates.size()) >= k_neg) {
    for (int i = 0; i < k_neg; ++i) {
      const int pick = i + rng.index(static_cast<int>(candidates.size()) - i);
      std::swap(candidates[i], candidates[pick]);
      out.push_back(candidates[i]);
    }
  } else {
    for (int i = 0; i < k_neg; ++i) out.push_back(candidates[rng.index(static_cast<int>(candidates.size()))]);
  }
  return out;
}

CsaLossParts csa_loss(double rp, double ctp, double reg, double lambda3, double lambda4, double lambda5) {
  require(lambda3 >= 0 && lambda4 >= 0 && lambda5 >= 0, ErrorKind::Parameter, "loss weights must be non-negative");
  return {rp, ctp, reg, lambda3 * rp + lambda4 * ctp + lambda5 * reg};
}

template <typename Real>
nn::Var entropy_reg(nn::Tape<Real>& tape, nn::Var probs, RegMode mode, Reduction reduction) {
  if (mode == RegMode::BatchMean) {
    const nn::Var mean = tape.mean_rows(probs);
    return tape.sum(tape.mul(mean, tape.log_clamped(mean, Real(kLogFloor))));
  }
  const nn::Var per_row = tape.row_sum(tape.mul(probs, tape.log_clamped(probs, Real(kLogFloor))));
  return reduction == Reduction::Mean ? tape.mean(per_row) : tape.sum(per_row);
}

template <typename Real>
nn::Var squared_error(nn::Tape<Real>& tape, nn::Var predicted, nn::Var target, Reduction reduction) {
  const nn::Var sq = tape.square(tape.sub(predicted, target));
  return reduction == Reduction::Mean ? tape.mean(sq) : tape.sum(sq);
}

template <typename Real>
nn::Var info_nce(nn::Tape<Real>& tape, nn::Var logits, CtpDenominator denominator, Reduction reduction) {
  const auto& v = tape.value(logits);
  require(v.cols >= 2, ErrorKind::Shape, "CTP logits need a positive and a negative column");
  const std::vector<int> first(v.rows, 0);
  nn::Var log_prob;
  if (denominator == CtpDenominator::WithPositive) {
    log_prob = tape.pick(tape.log_softmax_rows(logits), first);
  } else {
    // z+ - logsumexp(z-) = z+ - z-_1 + log_softmax(z-)_1
    const nn::Var neg = tape.slice_cols(logits, 1, v.cols - 1);
    const nn::Var pos = tape.slice_cols(logits, 0, 1);
    const nn::Var neg0 = tape.slice_cols(logits, 1, 1);
    log_prob = tape.add(tape.sub(pos, neg0), tape.pick(tape.log_softmax_rows(neg), first));
  }
  const nn::Var total = reduction == Reduction::Mean ? tape.mean(log_prob) : tape.sum(log_prob);
  return tape.scale(total, Real(-1));
}

template nn::Var entropy_reg<float>(nn::Tape<float>&, nn::Var, RegMode, Reduction);
template nn::Var entropy_reg<double>(nn::Tape<double>&, nn::Var, RegMode, Reduction);
template nn::Var squared_error<float>(nn::Tape<float>&, nn::Var, nn::Var, Reduction);
template nn::Var squared_error<double>(nn::Tape<double>&, nn::Var, nn::Var, Reduction);
template nn::Var info_nce<float>(nn::Tape<float>&, nn::Var, CtpDenominator, Reduction);
template nn::Var info_nce<double>(nn::Tape<double>&, nn::Var, CtpDenominator, Reduction);

}  // namespace tadt::csa
