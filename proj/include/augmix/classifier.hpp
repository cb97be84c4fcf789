#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "augmix/augmix.hpp"
#include "augmix/image.hpp"
#include "augmix/metrics.hpp"
#include "augmix/prob.hpp"
#include "augmix/rng.hpp"

namespace augmix {

/// Multinomial softmax regression: logits = W x + b with W of shape K x D
/// (row-major) over the flattened image.
struct LinearModel {
  int num_classes = 0;
  int input_dim = 0;
  std::vector<double> weights;  // K x D, row-major
  std::vector<double> bias;     // K

  static LinearModel zeros(int num_classes, int input_dim) {
    LinearModel m;
    m.num_classes = num_classes;
    m.input_dim = input_dim;
    m.weights.assign(
        static_cast<std::size_t>(num_classes) * input_dim, 0.0);
    m.bias.assign(static_cast<std::size_t>(num_classes), 0.0);
    return m;
  }

  double& w(int k, int d) {
    return weights[static_cast<std::size_t>(k) * input_dim + d];
  }
  double w(int k, int d) const {
    return weights[static_cast<std::size_t>(k) * input_dim + d];
  }
};

inline void validate_model(const LinearModel& m) {
  if (m.num_classes < 2) throw std::invalid_argument("model needs >= 2 classes");
  if (m.input_dim < 1) throw std::invalid_argument("model input_dim must be >= 1");
  if (m.weights.size() !=
      static_cast<std::size_t>(m.num_classes) * m.input_dim)
    throw std::invalid_argument("model weight size mismatch");
  if (m.bias.size() != static_cast<std::size_t>(m.num_classes))
    throw std::invalid_argument("model bias size mismatch");
  for (const double v : m.weights)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite weight");
  for (const double v : m.bias)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite bias");
}

inline std::vector<double> logits_of(const LinearModel& m,
                                     const std::vector<double>& x) {
  if (x.size() != static_cast<std::size_t>(m.input_dim))
    throw std::invalid_argument("input dimension " + std::to_string(x.size()) +
                                " does not match model input_dim " +
                                std::to_string(m.input_dim));
  std::vector<double> logits(static_cast<std::size_t>(m.num_classes));
  for (int k = 0; k < m.num_classes; ++k) {
    const double* row = m.weights.data() +
                        static_cast<std::size_t>(k) * m.input_dim;
    double acc = m.bias[static_cast<std::size_t>(k)];
    for (int d = 0; d < m.input_dim; ++d) acc += row[d] * x[d];
    logits[static_cast<std::size_t>(k)] = acc;
  }
  return logits;
}

inline Posterior forward(const LinearModel& m, const std::vector<double>& x) {
  return softmax(logits_of(m, x));
}

inline Posterior forward(const LinearModel& m, const Image& img) {
  return forward(m, flatten(img));
}

/// How training inputs are produced each epoch.
enum class AugMode {
  none,    // train on the clean image
  chain,   // a single sampled augmentation chain per view
  augmix,  // full AugmentAndMix per view
};

inline const char* to_string(AugMode mode) {
  switch (mode) {
    case AugMode::none: return "none";
    case AugMode::chain: return "chain";
    case AugMode::augmix: return "augmix";
  }
  return "unknown";
}

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 0.1;
  double momentum = 0.9;        // Nesterov
  double weight_decay = 5e-4;   // (wd/2)*||W||^2, bias not decayed
  bool cosine_schedule = true;  // lr_t = lr * 0.5 * (1 + cos(pi t / T))
  double lambda = 12.0;         // JSD coefficient
  AugMode aug_mode = AugMode::none;
  bool jsd = false;             // consistency loss across views
  bool stop_clean_gradient = false;  // block JSD gradient into the clean view
  AugMixConfig augmix;
  std::uint64_t seed = 0;
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(cfg.learning_rate >= 0.0))
    throw std::invalid_argument("learning_rate must be >= 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    throw std::invalid_argument("momentum outside [0,1)");
  if (!(cfg.weight_decay >= 0.0))
    throw std::invalid_argument("weight_decay must be >= 0");
  if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  validate_config(cfg.augmix);
}

/// views[0] is the input the classification loss sees; any further views
/// join it in the consistency term.
struct TrainExample {
  std::vector<std::vector<double>> views;
  int label = 0;
};

struct Gradients {
  std::vector<double> weights;
  std::vector<double> bias;
};

namespace detail {

// d(loss)/d(logits) for a view given u = d(loss)/d(posterior):
//   g_c = p_c * (u_c - sum_d p_d u_d)
inline void softmax_backward(const Posterior& p, const std::vector<double>& u,
                             double scale, std::vector<double>& grad_logits) {
  double dot = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) dot += p.probs[c] * u[c];
  for (std::size_t c = 0; c < p.size(); ++c)
    grad_logits[c] = scale * p.probs[c] * (u[c] - dot);
}

inline void accumulate_outer(const std::vector<double>& grad_logits,
                             const std::vector<double>& x, Gradients& grads,
                             int input_dim) {
  for (std::size_t k = 0; k < grad_logits.size(); ++k) {
    const double g = grad_logits[k];
    if (g == 0.0) continue;
    double* row = grads.weights.data() + k * static_cast<std::size_t>(input_dim);
    for (std::size_t d = 0; d < x.size(); ++d) row[d] += g * x[d];
    grads.bias[k] += g;
  }
}

}  // namespace detail

/// Batch loss and analytic gradients.
///
/// loss = mean_b [ CE(p_b0, y_b) + lambda * JSD(p_b0..p_bn) ]
///        + (weight_decay/2) * ||W||^2
///
/// The JSD gradient flows through every view's softmax; with
/// cfg.stop_clean_gradient the clean branch (views[0]) is treated as a
/// constant inside the consistency term. The decay penalty is folded into
/// LossValue.ce_part so total == ce_part + lambda * jsd_part holds exactly.
inline std::pair<LossValue, Gradients> loss_and_grad(
    const LinearModel& model, const std::vector<TrainExample>& batch,
    const TrainConfig& cfg) {
  validate_model(model);
  validate_train_config(cfg);
  if (batch.empty()) throw std::invalid_argument("empty batch");

  Gradients grads;
  grads.weights.assign(model.weights.size(), 0.0);
  grads.bias.assign(model.bias.size(), 0.0);

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const auto num_classes = static_cast<std::size_t>(model.num_classes);
  double ce_sum = 0.0;
  double jsd_sum = 0.0;
  std::vector<double> grad_logits(num_classes);
  std::vector<double> u(num_classes);

  for (const TrainExample& example : batch) {
    if (example.views.empty())
      throw std::invalid_argument("training example with no views");
    if (example.label < 0 || example.label >= model.num_classes)
      throw std::invalid_argument("label outside model classes");

    std::vector<Posterior> posteriors;
    posteriors.reserve(example.views.size());
    for (const auto& view : example.views)
      posteriors.push_back(forward(model, view));

    // cross entropy on the first view
    const Posterior& p0 = posteriors[0];
    const double py = p0.probs[static_cast<std::size_t>(example.label)];
    const double ce = -std::log(std::max(py, 1e-300));
    if (!std::isfinite(ce)) throw std::runtime_error("non-finite loss");
    ce_sum += ce;
    for (std::size_t c = 0; c < num_classes; ++c) {
      grad_logits[c] = inv_batch * (p0.probs[c] -
                                    (static_cast<int>(c) == example.label
                                         ? 1.0
                                         : 0.0));
    }
    detail::accumulate_outer(grad_logits, example.views[0], grads,
                             model.input_dim);

    // consistency term across all views
    bool use_jsd = cfg.jsd && example.views.size() >= 2;
    if (use_jsd) {
      bool views_equal = true;
      for (const Posterior& p : posteriors)
        views_equal = views_equal && p.probs == posteriors[0].probs;
      // at the JSD minimum both the value and every branch gradient vanish
      if (views_equal) use_jsd = false;
    }
    if (use_jsd) {
      jsd_sum += jsd(posteriors);
      const auto n = static_cast<double>(posteriors.size());
      std::vector<double> mixture(num_classes);
      for (std::size_t c = 0; c < num_classes; ++c) {
        double sum = 0.0;
        for (const Posterior& p : posteriors) sum += p.probs[c];
        mixture[c] = std::max(sum / n, 1e-12);
      }
      for (std::size_t v = 0; v < posteriors.size(); ++v) {
        if (v == 0 && cfg.stop_clean_gradient) continue;
        const Posterior& p = posteriors[v];
        for (std::size_t c = 0; c < num_classes; ++c) {
          // d JSD / d p_vc = (1/n) ln(p_vc / M_c); the mixture terms cancel
          u[c] = p.probs[c] > 0.0
                     ? std::log(std::max(p.probs[c], 1e-300) / mixture[c]) / n
                     : 0.0;
        }
        detail::softmax_backward(p, u, cfg.lambda * inv_batch, grad_logits);
        detail::accumulate_outer(grad_logits, example.views[v], grads,
                                 model.input_dim);
      }
    }
  }

  double decay_penalty = 0.0;
  if (cfg.weight_decay > 0.0) {
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
      norm_sq += model.weights[i] * model.weights[i];
      grads.weights[i] += cfg.weight_decay * model.weights[i];
    }
    decay_penalty = 0.5 * cfg.weight_decay * norm_sq;
  }

  LossValue loss;
  loss.ce_part = ce_sum * inv_batch + decay_penalty;
  loss.jsd_part = jsd_sum * inv_batch;
  loss.lambda = cfg.lambda;
  loss.total = loss.ce_part + cfg.lambda * loss.jsd_part;
  if (!std::isfinite(loss.total)) throw std::runtime_error("non-finite loss");
  return {loss, std::move(grads)};
}

struct TrainResult {
  LinearModel model;
  std::vector<double> epoch_loss;  // example-weighted mean total per epoch
};

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t n,
                                                 PhiloxRng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

// Build the per-example view list for the configured augmentation mode.
inline TrainExample make_example(const Image& img, int label,
                                 const TrainConfig& cfg, PhiloxRng aug_rng) {
  TrainExample example;
  example.label = label;
  switch (cfg.aug_mode) {
    case AugMode::none:
      example.views.push_back(flatten(img));
      break;
    case AugMode::chain: {
      const int n_views = cfg.jsd ? cfg.augmix.jsd_arity : 1;
      if (cfg.jsd) example.views.push_back(flatten(img));
      for (int v = 0; v < n_views; ++v) {
        const Chain chain = sample_chain(aug_rng, cfg.augmix);
        example.views.push_back(flatten(apply_chain(chain, img, aug_rng)));
      }
      break;
    }
    case AugMode::augmix: {
      if (cfg.jsd) {
        example.views.push_back(flatten(img));
        for (Image& view : augmix_views(img, cfg.augmix, aug_rng))
          example.views.push_back(flatten(view));
      } else {
        example.views.push_back(
            flatten(augment_and_mix(img, cfg.augmix, aug_rng)));
      }
      break;
    }
  }
  return example;
}

}  // namespace detail

/// Nesterov SGD with the cosine schedule. Shuffling and all augmentation
/// randomness derive from `rng`: the shuffle consumes the stream directly
/// while example (epoch t, dataset index e) augments from the substream
/// child(1 + t*N + e), so runs are bit-reproducible.
inline TrainResult train(const LabeledDataset& dataset, const TrainConfig& cfg,
                         PhiloxRng& rng) {
  validate_dataset(dataset);
  validate_train_config(cfg);
  if (dataset.size() == 0) throw std::invalid_argument("empty dataset");

  const Image& first = dataset.images.front();
  const int input_dim = first.height * first.width * first.channels;

  TrainResult result;
  result.model = LinearModel::zeros(dataset.num_classes, input_dim);
  LinearModel& model = result.model;

  std::vector<double> velocity_w(model.weights.size(), 0.0);
  std::vector<double> velocity_b(model.bias.size(), 0.0);

  const std::size_t n = dataset.size();
  const std::size_t batches_per_epoch =
      (n + static_cast<std::size_t>(cfg.batch_size) - 1) /
      static_cast<std::size_t>(cfg.batch_size);
  const std::size_t total_steps =
      batches_per_epoch * static_cast<std::size_t>(cfg.epochs);
  std::size_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = detail::shuffled_indices(n, rng);
    double epoch_loss_sum = 0.0;

    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<TrainExample> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t e = order[i];
        batch.push_back(detail::make_example(
            dataset.images[e], dataset.labels[e], cfg,
            rng.child(1 + static_cast<std::uint64_t>(epoch) * n + e)));
      }

      auto [loss, grads] = loss_and_grad(model, batch, cfg);
      epoch_loss_sum += loss.total * static_cast<double>(batch.size());

      const double lr =
          cfg.cosine_schedule && total_steps > 0
              ? cfg.learning_rate * 0.5 *
                    (1.0 + std::cos(3.14159265358979323846 *
                                    static_cast<double>(step) /
                                    static_cast<double>(total_steps)))
              : cfg.learning_rate;
      ++step;

      for (std::size_t i = 0; i < model.weights.size(); ++i) {
        velocity_w[i] = cfg.momentum * velocity_w[i] + grads.weights[i];
        model.weights[i] -=
            lr * (grads.weights[i] + cfg.momentum * velocity_w[i]);
      }
      for (std::size_t i = 0; i < model.bias.size(); ++i) {
        velocity_b[i] = cfg.momentum * velocity_b[i] + grads.bias[i];
        model.bias[i] -= lr * (grads.bias[i] + cfg.momentum * velocity_b[i]);
      }
    }
    result.epoch_loss.push_back(epoch_loss_sum / static_cast<double>(n));
  }
  return result;
}

struct EvalResult {
  double error_rate = 0.0;
  std::vector<PredictionRecord> records;
};

/// Classify every example; argmax ties break toward the lowest class index.
/// Records carry the full posterior and confidence = max posterior entry.
inline EvalResult evaluate(const LinearModel& model,
                           const LabeledDataset& dataset) {
  validate_model(model);
  validate_dataset(dataset);
  if (dataset.size() == 0) throw std::invalid_argument("empty dataset");

  EvalResult result;
  result.records.reserve(dataset.size());
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Posterior p = forward(model, dataset.images[i]);
    const auto best = std::max_element(p.probs.begin(), p.probs.end());
    PredictionRecord record;
    record.example_id = static_cast<std::int64_t>(i);
    record.true_label = dataset.labels[i];
    record.pred_label = static_cast<int>(best - p.probs.begin());
    record.confidence = *best;
    record.posterior = p.probs;
    if (record.pred_label != record.true_label) ++wrong;
    result.records.push_back(std::move(record));
  }
  result.error_rate =
      static_cast<double>(wrong) / static_cast<double>(dataset.size());
  return result;
}

}  // namespace augmix
