#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "flat/attack.hpp"
#include "flat/corpus.hpp"
#include "flat/masks.hpp"
#include "flat/model.hpp"
#include "flat/tensor.hpp"

namespace flat::train {

struct FlatConfig {
    double beta = 0.1;    // entropy weight
    double gamma = 0.001; // importance-regularizer weight
    double tau = 0.5;     // Gumbel temperature
    double lr = 0.1;
    double clip_norm = 5.0;  // <= 0 disables clipping
    int epochs_per_round = 3;
    int rounds = 3;  // attack/train iterations, validated in [1,5]
    int batch_size = 32;
    std::uint64_t seed = 7;
    bool use_masks = true;  // regime switch: flat=true, base/adv=false
    int attack_sample = 0;  // examples attacked per round; 0 = all

    void validate() const;
    std::string to_json() const;
};

struct ModelDims {
    int vocab_size = 0;
    int dim = 32;
    int filters = 32;
    int num_classes = 2;
    std::uint64_t vocab_hash = 0;  // stamped into checkpoints
};

struct RoundMetrics {
    int round = 0;
    double dev_acc = 0.0;
    std::optional<double> after_attack_acc;  // absent when no attack config
    double mean_phi_gap = 0.0;
    double loss = 0.0;
};

struct TrainState {
    model::TextCnn net;
    masks::InferenceNet inference_net;  // zero-init; inert when masks unused
    std::string kind;                   // "base" | "flat" | "adv" | "groupmask"
    std::vector<corpus::AdversarialPair> dprime;  // grows across rounds
    int round = 0;
    std::vector<RoundMetrics> history;
    // groupmask extras
    ad::Tensor group_scales;   // [G,1]
    std::vector<int> group_of; // word id -> group
};

// ---- loss graphs (caller owns the active tape) ----

/// Mean over the batch of CE(f(W ⊙ x), y) − β·H(W|x), masks sampled fresh
/// per example (one Monte-Carlo draw). With use_masks=false this is plain
/// cross-entropy on the unmasked forward.
ad::Tensor prediction_loss(std::span<const corpus::Example> batch, const model::TextCnn& net,
                           const masks::InferenceNet& inet, const FlatConfig& cfg,
                           std::mt19937_64& rng);

/// Mean over pairs of the per-pair sum of |φ(orig) − φ(adv)| at substituted
/// positions; differentiable through the inference net and the embeddings.
ad::Tensor importance_regularizer(std::span<const corpus::AdversarialPair> pairs,
                                  const masks::InferenceNet& inet,
                                  const ad::Tensor& embedding_table);

/// prediction_loss(orig) + prediction_loss(adv) + γ·importance_regularizer.
/// An empty adversarial batch reduces to the single clean term.
ad::Tensor flat_objective(std::span<const corpus::Example> orig_batch,
                          std::span<const corpus::AdversarialPair> adv_batch,
                          const model::TextCnn& net, const masks::InferenceNet& inet,
                          const FlatConfig& cfg, std::mt19937_64& rng);

// ---- regimes ----

/// Masked training with iterated attack augmentation: round 0 trains on the
/// clean data, each later round attacks the latest model on (a sample of)
/// the training set, grows D′ with the successes, and trains on D ∪ D′.
/// With out_dir set, each attack round also dumps its results as JSON lines
/// (adv_round_<r>.jsonl) when a vocabulary is supplied for word surfaces.
TrainState train_flat(const corpus::Dataset& train_set, const corpus::Dataset& dev_set,
                      const corpus::SynonymTable& synonyms, const attack::AttackConfig& attack_cfg,
                      FlatConfig cfg, const ModelDims& dims, const std::string& out_dir = "",
                      int attack_jobs = 1, const corpus::Vocab* vocab = nullptr);

/// Same loop with masks pinned to 1 and β=γ=0: plain cross-entropy on the
/// growing augmented dataset.
TrainState train_traditional_adv(const corpus::Dataset& train_set, const corpus::Dataset& dev_set,
                                 const corpus::SynonymTable& synonyms,
                                 const attack::AttackConfig& attack_cfg, FlatConfig cfg,
                                 const ModelDims& dims, const std::string& out_dir = "",
                                 int attack_jobs = 1, const corpus::Vocab* vocab = nullptr);

/// Clean training only (round 0, no attacks).
TrainState train_base(const corpus::Dataset& train_set, const corpus::Dataset& dev_set,
                      FlatConfig cfg, const ModelDims& dims, const std::string& out_dir = "");

/// Appendix-style trivial baseline: k-means words in embedding space, one
/// learnable scalar per group (initialized to 1) scaling member embeddings,
/// plain cross-entropy training. Throws when clusters > vocab size.
TrainState train_group_mask(const corpus::Dataset& train_set, const corpus::Dataset& dev_set,
                            int clusters, FlatConfig cfg, const ModelDims& dims,
                            const std::string& out_dir = "");

// ---- shared helpers ----

/// Word importance under the deployed rule for this regime: inference-net φ
/// for mask-trained models, group scales for the group baseline, 1 for the
/// rest (importance plays no role in their deployment).
masks::GlobalImportance state_importance(const TrainState& state);

/// Evaluation surface for attacks/metrics matching how the model deploys.
/// The returned view borrows `state`; keep it alive while the view is used.
attack::ModelView deployed_view(const TrainState& state);

/// Accuracy of the deployed predictor over a dataset.
double dataset_accuracy(const TrainState& state, const corpus::Dataset& data);

/// Mean |φ(a) − φ(b)| over every synonym pair in the table (0 when empty).
double mean_phi_gap(const masks::GlobalImportance& phi, const corpus::SynonymTable& synonyms);

/// Checkpoint snapshot of the state (kind, nets, groupmask extras).
model::Checkpoint to_checkpoint(const TrainState& state, const ModelDims& dims,
                                const FlatConfig& cfg);

/// Rebuilds a usable state from a checkpoint (D′ and history are not stored).
TrainState from_checkpoint(const model::Checkpoint& ckpt);

}  // namespace flat::train
