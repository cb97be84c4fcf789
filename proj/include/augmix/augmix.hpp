#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "augmix/image.hpp"
#include "augmix/ops.hpp"
#include "augmix/rng.hpp"

namespace augmix {

/// Knobs of the AugmentAndMix procedure. Defaults follow the reference
/// settings: k = 3 chains, alpha = 1, chain depth stochastic in [1,3].
struct AugMixConfig {
  int k = 3;                  // number of augmentation chains
  double alpha = 1.0;         // Dirichlet/Beta concentration
  int max_depth = 3;          // ops per chain, uniform on [1, max_depth]
  int max_severity = 10;      // severity sampled uniform on [1, max_severity]
  int jsd_arity = 2;          // augmented views per example (2 or 3)
  std::vector<AugOpKind> ops{kOpCatalog.begin(), kOpCatalog.end()};
};

inline void validate_config(const AugMixConfig& cfg) {
  if (cfg.k < 1) throw std::invalid_argument("augmix k must be >= 1");
  if (!(cfg.alpha > 0.0))
    throw std::invalid_argument("augmix alpha must be > 0");
  if (cfg.max_depth < 1 || cfg.max_depth > 3)
    throw std::invalid_argument("augmix max_depth outside [1,3]");
  if (cfg.max_severity < 1 || cfg.max_severity > 10)
    throw std::invalid_argument("augmix max_severity outside [1,10]");
  if (cfg.jsd_arity < 2 || cfg.jsd_arity > 3)
    throw std::invalid_argument("augmix jsd_arity must be 2 or 3");
  if (cfg.ops.empty())
    throw std::invalid_argument("augmix op set must not be empty");
}

/// One sampled augmentation chain: 1..max_depth (kind, severity) pairs,
/// composed left to right.
struct ChainLink {
  AugOpKind kind;
  Severity severity;
};

struct Chain {
  std::vector<ChainLink> links;
};

/// Sample a chain: one draw for the depth, then one (kind, severity) draw
/// pair per link. Kinds are uniform with replacement over cfg.ops.
inline Chain sample_chain(PhiloxRng& rng, const AugMixConfig& cfg) {
  validate_config(cfg);
  const int depth = 1 + static_cast<int>(rng.uniform_index(
                            static_cast<std::uint64_t>(cfg.max_depth)));
  Chain chain;
  chain.links.reserve(static_cast<std::size_t>(depth));
  for (int i = 0; i < depth; ++i) {
    const auto kind = cfg.ops[rng.uniform_index(cfg.ops.size())];
    chain.links.push_back({kind, sample_severity(rng, cfg.max_severity)});
  }
  return chain;
}

/// Apply the chain's ops in order. Op-internal draws (geometric signs) are
/// consumed from `rng` at application time, one op after another.
inline Image apply_chain(const Chain& chain, const Image& img,
                         PhiloxRng& rng) {
  Image out = img;
  for (const ChainLink& link : chain.links) {
    out = apply_op(link.kind, link.severity, out, rng);
  }
  return out;
}

struct MixWeights {
  std::vector<double> w;  // Dirichlet weights over the k chains
  double m = 0.0;         // Beta skip-connection weight on the original
};

/// Standalone sampler for the mixing weights: the Dirichlet k-vector first,
/// then the Beta weight m. (Inside augment_and_mix the Beta draw happens
/// after the chains; see there for the full order.)
inline MixWeights sample_weights(PhiloxRng& rng, const AugMixConfig& cfg) {
  validate_config(cfg);
  MixWeights mw;
  mw.w = rng.dirichlet(static_cast<std::size_t>(cfg.k), cfg.alpha);
  mw.m = rng.beta(cfg.alpha, cfg.alpha);
  return mw;
}

/// Pixelwise mix of chain outputs with the original:
///   out = x + (1-m) * sum_i w_i * (chain_i - x)
/// which equals m*x + (1-m)*sum_i w_i*chain_i with sum w_i = 1, but is the
/// exact identity when every chain output equals x or when m = 1.
inline Image mix_chains(const Image& original,
                        const std::vector<Image>& chain_outputs,
                        const std::vector<double>& weights, double m) {
  if (chain_outputs.size() != weights.size())
    throw std::invalid_argument("mix_chains: outputs/weights length mismatch");
  if (chain_outputs.empty())
    throw std::invalid_argument("mix_chains: need at least one chain");
  for (const Image& co : chain_outputs) {
    if (!co.same_shape(original))
      throw std::invalid_argument("mix_chains: chain output shape mismatch");
  }
  Image out = original;
  const std::size_t n = original.pixels.size();
  for (std::size_t p = 0; p < n; ++p) {
    double delta = 0.0;
    for (std::size_t i = 0; i < chain_outputs.size(); ++i) {
      delta += weights[i] * (chain_outputs[i].pixels[p] - original.pixels[p]);
    }
    out.pixels[p] =
        std::clamp(original.pixels[p] + (1.0 - m) * delta, 0.0, 1.0);
  }
  return out;
}

/// One AugmentAndMix realization. Draw order is fixed: the Dirichlet weight
/// vector, then for each chain i = 1..k its depth, kinds, severities and
/// op-internal draws, then the Beta weight m.
inline Image augment_and_mix(const Image& img, const AugMixConfig& cfg,
                             PhiloxRng& rng) {
  validate_config(cfg);
  validate_image(img);
  const std::vector<double> w =
      rng.dirichlet(static_cast<std::size_t>(cfg.k), cfg.alpha);
  std::vector<Image> chain_outputs;
  chain_outputs.reserve(static_cast<std::size_t>(cfg.k));
  for (int i = 0; i < cfg.k; ++i) {
    const Chain chain = sample_chain(rng, cfg);
    chain_outputs.push_back(apply_chain(chain, img, rng));
  }
  const double m = rng.beta(cfg.alpha, cfg.alpha);
  return mix_chains(img, chain_outputs, w, m);
}

/// cfg.jsd_arity independent AugmentAndMix realizations, drawn sequentially
/// from the same stream.
inline std::vector<Image> augmix_views(const Image& img,
                                       const AugMixConfig& cfg,
                                       PhiloxRng& rng) {
  validate_config(cfg);
  std::vector<Image> views;
  views.reserve(static_cast<std::size_t>(cfg.jsd_arity));
  for (int v = 0; v < cfg.jsd_arity; ++v) {
    views.push_back(augment_and_mix(img, cfg, rng));
  }
  return views;
}

}  // namespace augmix
