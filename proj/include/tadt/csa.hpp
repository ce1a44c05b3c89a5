#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tadt/nn/tape.hpp"
#include "tadt/nn/tensor.hpp"
#include "tadt/rng.hpp"

namespace tadt::csa {

enum class RegMode { PerSample, BatchMean };
enum class CtpDenominator { WithPositive, NegativesOnly };
enum class Reduction { Mean, Sum };

RegMode parse_reg_mode(const std::string& text);
CtpDenominator parse_ctp_denominator(const std::string& text);
Reduction parse_reduction(const std::string& text);
std::string to_string(RegMode mode);
std::string to_string(CtpDenominator mode);
std::string to_string(Reduction mode);

/// softmax_i(alpha * c_i.e + (1 - alpha) * c_i.ta_emb) over the M codebook rows.
std::vector<double> tac_svq_similarity(std::span<const double> e, const nn::Tensor<double>& codebook,
                                       std::span<const double> ta_emb, double alpha);

struct QuantizedState {
  int code_id = 0;
  std::vector<double> code_vec;
  std::vector<double> assign_probs;  // p_sim
  std::vector<double> soft_assign;   // softmax((log p + g) / tau)
  std::vector<double> assignment;    // one-hot when hard, soft_assign otherwise
};

/// Gumbel-softmax relaxation of `probs`; log-probabilities are clamped at 1e-20.
QuantizedState gumbel_assign(std::span<const double> probs, const nn::Tensor<double>& codebook, double temperature,
                             std::uint64_t seed, bool hard);

/// Same, with the Gumbel draws supplied.
QuantizedState gumbel_assign_with_noise(std::span<const double> probs, const nn::Tensor<double>& codebook,
                                        double temperature, std::span<const double> gumbel, bool hard);

/// PerSample: mean over rows of sum_i p_i log p_i. BatchMean: sum_i pbar_i log pbar_i
/// of the row-averaged distribution.
double entropy_reg_loss(const nn::Tensor<double>& probs, RegMode mode = RegMode::PerSample);

/// exp(entropy of the row-averaged distribution).
double usage_perplexity(const nn::Tensor<double>& probs);

/// Mean (or sum) of squared differences.
double rp_loss(std::span<const double> predicted, std::span<const double> target, Reduction reduction = Reduction::Mean);

/// InfoNCE over rows [z+, z-_1..z-_K].
double ctp_loss(const nn::Tensor<double>& logits, CtpDenominator denominator = CtpDenominator::WithPositive,
                Reduction reduction = Reduction::Mean);

/// k_neg codebook ids distinct from both exclusions; without replacement when
/// enough candidates remain, otherwise with replacement. Throws Sampling when
/// no candidate exists.
std::vector<int> sample_negatives(int codebook_size, int exclude_current, int exclude_next, int k_neg, Rng& rng);

struct CsaLossParts {
  double rp = 0.0;
  double ctp = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

CsaLossParts csa_loss(double rp, double ctp, double reg, double lambda3, double lambda4, double lambda5);

// Differentiable counterparts used by the model.
template <typename Real>
nn::Var entropy_reg(nn::Tape<Real>& tape, nn::Var probs, RegMode mode, Reduction reduction);

template <typename Real>
nn::Var squared_error(nn::Tape<Real>& tape, nn::Var predicted, nn::Var target, Reduction reduction);

template <typename Real>
nn::Var info_nce(nn::Tape<Real>& tape, nn::Var logits, CtpDenominator denominator, Reduction reduction);

}  // namespace tadt::csa
