#include "vulaste/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vulaste/error.hpp"

namespace vulaste::objective {
namespace {

void check_batch(size_t n, std::span<const int> labels) {
  if (n == 0) fail(ErrorCode::kInvalidInput, "loss of an empty batch");
  if (labels.size() != n) {
    fail(ErrorCode::kInvalidInput, "one label per sample is required");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) fail(ErrorCode::kInvalidInput, "labels must be 0 or 1");
  }
}

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

double class_weight(int label, double alpha) {
  return label == 1 ? alpha : 1.0 - alpha;
}

double focal_term(double p_t, int label, double alpha, double gamma) {
  return -class_weight(label, alpha) * std::pow(1.0 - p_t, gamma) * std::log(p_t);
}

}  // namespace

void FocalConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    fail(ErrorCode::kInvalidInput, "focal alpha must lie in (0, 1]");
  }
  if (!(gamma >= 0.0)) fail(ErrorCode::kInvalidInput, "focal gamma must be >= 0");
}

std::string_view to_string(LossKind kind) {
  return kind == LossKind::kFocal ? "focal" : "cross-entropy";
}

LossKind loss_kind_from_string(std::string_view name) {
  if (name == "focal") return LossKind::kFocal;
  if (name == "cross-entropy") return LossKind::kCrossEntropy;
  fail(ErrorCode::kInvalidInput, "unknown loss '" + std::string(name) + "'");
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double focal_loss(std::span<const double> p_true, std::span<const int> labels,
                  const FocalConfig& config) {
  config.validate();
  check_batch(p_true.size(), labels);
  double total = 0;
  for (size_t i = 0; i < p_true.size(); ++i) {
    total += focal_term(clamp_probability(p_true[i]), labels[i], config.alpha,
                        config.gamma);
  }
  return total / static_cast<double>(p_true.size());
}

double cross_entropy(std::span<const double> p_true, std::span<const int> labels) {
  check_batch(p_true.size(), labels);
  double total = 0;
  for (double p : p_true) total -= std::log(clamp_probability(p));
  return total / static_cast<double>(p_true.size());
}

LossAndGrad loss_from_logits(std::span<const double> logits,
                             std::span<const int> labels, LossKind kind,
                             const FocalConfig& config) {
  check_batch(logits.size(), labels);
  double alpha = 1.0;
  double gamma = 0.0;
  if (kind == LossKind::kFocal) {
    config.validate();
    alpha = config.alpha;
    gamma = config.gamma;
  }
  const auto n = static_cast<double>(logits.size());
  LossAndGrad out;
  out.grad.resize(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    const double sign = labels[i] == 1 ? 1.0 : -1.0;
    const double raw = sigmoid(sign * logits[i]);
    const double p = clamp_probability(raw);
    const double weight =
        kind == LossKind::kFocal ? class_weight(labels[i], alpha) : 1.0;
    const double q = 1.0 - p;
    out.loss -= weight * std::pow(q, gamma) * std::log(p);
    if (raw != p) {
      out.grad[i] = 0;
      continue;
    }
    // d/dz of -w (1-p)^g log p with p = sigmoid(sign * z).
    const double dp = -gamma * std::pow(q, gamma) * p * std::log(p) +
                      std::pow(q, gamma + 1.0);
    out.grad[i] = -weight * sign * dp / n;
  }
  out.loss /= n;
  return out;
}

}  // namespace vulaste::objective
