#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <exception>
#include <thread>

#include <nlohmann/json.hpp>

#include "vulaste/error.hpp"
#include "vulaste/metrics.hpp"
#include "vulaste/model.hpp"

namespace vulaste::model {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"warmup_fraction", c.warmup_fraction},
                     {"max_steps", c.max_steps},
                     {"threshold", c.threshold}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const std::set<std::string> known{"epochs",          "batch_size", "learning_rate",
                                           "warmup_fraction", "max_steps",  "threshold"};
  if (!j.is_object()) fail(ErrorCode::kInvalidInput, "train config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      fail(ErrorCode::kInvalidInput, "unknown train config key '" + key + "'");
    }
  }
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.threshold = j.value("threshold", c.threshold);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("bad train config: ") + e.what());
  }
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

class Adam {
 public:
  explicit Adam(const Parameters<float>& params)
      : m_(params.zeros_like()), v_(params.zeros_like()) {}

  void step(Parameters<float>& params, const Parameters<float>& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    auto p = params.named();
    auto g = grads.named();
    auto m = m_.named();
    auto v = v_.named();
    for (size_t i = 0; i < p.size(); ++i) {
      float* pd = p[i].second->data();
      const float* gd = g[i].second->data();
      float* md = m[i].second->data();
      float* vd = v[i].second->data();
      for (Eigen::Index k = 0; k < p[i].second->size(); ++k) {
        md[k] = static_cast<float>(kBeta1 * md[k] + (1 - kBeta1) * gd[k]);
        vd[k] = static_cast<float>(kBeta2 * vd[k] + (1 - kBeta2) * gd[k] * gd[k]);
        const double update = (md[k] / c1) / (std::sqrt(vd[k] / c2) + kAdamEpsilon);
        pd[k] = static_cast<float>(pd[k] - lr * update);
      }
    }
  }

 private:
  Parameters<float> m_, v_;
  uint64_t t_ = 0;
};

// Index draws use the raw engine output so shuffles match across standard
// libraries.
void shuffle(std::vector<size_t>& order, std::mt19937_64& rng) {
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }
}

void set_zero(Parameters<float>& p) {
  for (auto& [name, m] : p.named()) m->setZero();
}

eval::Classification classify(const Model& model, std::span<const LabeledSample> samples,
                              double threshold) {
  std::vector<eval::RankedEntry> entries;
  for (const LabeledSample& s : samples) {
    entries.push_back({s.id, model.probability(s.input), s.label});
  }
  return eval::recall_f1(entries, threshold);
}

double accuracy(const Model& model, std::span<const LabeledSample> samples,
                double threshold) {
  size_t right = 0;
  for (const LabeledSample& s : samples) {
    right += (model.probability(s.input) >= threshold) == (s.label == 1);
  }
  return samples.empty() ? 0.0 : static_cast<double>(right) / static_cast<double>(samples.size());
}

}  // namespace

TrainResult train(const ModelConfig& config, const TrainConfig& tc,
                  const tokenizer::Vocabulary& vocab,
                  const embedding::NodeKindVocab& node_kinds,
                  std::span<const LabeledSample> train_set,
                  std::span<const LabeledSample> validation_set, const TrainHooks& hooks) {
  config.validate();
  if (tc.batch_size == 0 || tc.epochs == 0) {
    fail(ErrorCode::kInvalidInput, "epochs and batch_size must be positive");
  }
  if (!(tc.learning_rate > 0) || !(tc.warmup_fraction >= 0 && tc.warmup_fraction <= 1)) {
    fail(ErrorCode::kInvalidInput, "bad learning rate or warmup fraction");
  }
  size_t positives = 0;
  for (const LabeledSample& s : train_set) {
    if (s.label != 0 && s.label != 1) fail(ErrorCode::kInvalidDataset, "labels must be 0 or 1");
    positives += s.label == 1;
  }
  if (positives == 0 || positives == train_set.size()) {
    fail(ErrorCode::kInvalidDataset, "the training set must contain both classes");
  }

  Model model = Model::initialize(config, vocab, node_kinds);
  const Encoder<float> encoder(config, node_kinds);
  Parameters<float> grads = model.params.zeros_like();
  Adam adam(model.params);

  const size_t n = train_set.size();
  const size_t steps_per_epoch = (n + tc.batch_size - 1) / tc.batch_size;
  size_t total_steps = tc.epochs * steps_per_epoch;
  if (tc.max_steps > 0) total_steps = std::min(total_steps, tc.max_steps);
  const auto warmup =
      static_cast<size_t>(std::ceil(tc.warmup_fraction * static_cast<double>(total_steps)));

  std::mt19937_64 rng(config.seed ^ 0x5eedULL);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});

  TrainResult result;
  bool have_best = false;
  double best_f1 = -1;
  size_t step = 0;
  ForwardCache<float> cache;
  for (size_t epoch = 1; epoch <= tc.epochs && step < total_steps; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0;
    size_t seen = 0;
    for (size_t start = 0; start < n && step < total_steps; start += tc.batch_size) {
      const size_t end = std::min(n, start + tc.batch_size);
      const auto batch = static_cast<double>(end - start);
      set_zero(grads);
      double batch_loss = 0;
      for (size_t b = start; b < end; ++b) {
        const LabeledSample& s = train_set[order[b]];
        const double logit = encoder.forward(model.params, s.input, &cache, &rng);
        const int label = s.label;
        const objective::LossAndGrad lg = objective::loss_from_logits(
            std::span(&logit, 1), std::span(&label, 1), config.loss, config.focal);
        batch_loss += lg.loss;
        encoder.backward(model.params, cache, static_cast<float>(lg.grad[0] / batch), grads);
      }
      ++step;
      const double lr =
          tc.learning_rate *
          (warmup == 0 ? 1.0
                       : std::min(1.0, static_cast<double>(step) / static_cast<double>(warmup)));
      adam.step(model.params, grads, lr);
      epoch_loss += batch_loss;
      seen += end - start;
      if (hooks.on_step) hooks.on_step(step, batch_loss / batch);
    }
    model.step = step;

    EpochMetrics m;
    m.epoch = epoch;
    m.step = step;
    m.train_loss = epoch_loss / static_cast<double>(seen);
    m.train_accuracy = accuracy(model, train_set, tc.threshold);
    if (!validation_set.empty()) {
      const eval::Classification c = classify(model, validation_set, tc.threshold);
      m.val_recall = c.recall;
      m.val_precision = c.precision;
      m.val_f1 = c.f1;
    }
    result.epochs.push_back(m);
    if (hooks.metrics_log) {
      nlohmann::json line{{"epoch", m.epoch},
                          {"step", m.step},
                          {"train_loss", m.train_loss},
                          {"train_accuracy", m.train_accuracy},
                          {"val_recall", m.val_recall},
                          {"val_precision", m.val_precision},
                          {"val_f1", m.val_f1}};
      *hooks.metrics_log << line.dump() << '\n';
    }
    if (validation_set.empty() || !have_best || m.val_f1 > best_f1) {
      result.best = model;
      best_f1 = m.val_f1;
      have_best = true;
    }
  }
  return result;
}

std::vector<Prediction> predict(const Model& model, const tokenizer::Vocabulary& vocab,
                                std::span<const LabeledSample> samples, unsigned threads) {
  check_vocabulary(model, vocab);
  std::vector<Prediction> out(samples.size());
  const size_t workers = std::clamp<size_t>(threads, 1, std::max<size_t>(1, samples.size()));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](size_t w) {
    try {
      for (size_t i = w; i < samples.size(); i += workers) {
        out[i] = {samples[i].id, model.probability(samples[i].input)};
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::sort(out.begin(), out.end(), [](const Prediction& a, const Prediction& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.id < b.id;
  });
  return out;
}

}  // namespace vulaste::model
