#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace vulaste::objective {

// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kProbabilityEpsilon = 1e-7;

struct FocalConfig {
  double alpha = 0.25;  // weight of the positive class; 1 - alpha for the negative
  double gamma = 2.0;

  // Throws Error(kInvalidInput) unless alpha in (0, 1] and gamma >= 0.
  void validate() const;
};

enum class LossKind { kFocal, kCrossEntropy };

std::string_view to_string(LossKind kind);
// Accepts "focal" and "cross-entropy". Throws Error(kInvalidInput).
LossKind loss_kind_from_string(std::string_view name);

double sigmoid(double z);

// Mean of -alpha_c (1 - p_t)^gamma log p_t. `p_true` holds the probability
// assigned to each sample's true class. Throws Error(kInvalidInput) on an
// empty batch, a length mismatch or labels outside {0, 1}.
double focal_loss(std::span<const double> p_true, std::span<const int> labels,
                  const FocalConfig& config);

// Mean of -log p_t.
double cross_entropy(std::span<const double> p_true, std::span<const int> labels);

struct LossAndGrad {
  double loss = 0;
  std::vector<double> grad;  // d(mean loss) / d(logit), one per sample
};

// Loss of sigmoid(logits) against the labels, with its gradient. Samples
// whose probability was clamped contribute no gradient.
LossAndGrad loss_from_logits(std::span<const double> logits,
                             std::span<const int> labels, LossKind kind,
                             const FocalConfig& config = {});

}  // namespace vulaste::objective
