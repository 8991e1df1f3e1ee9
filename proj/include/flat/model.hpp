#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "flat/masks.hpp"
#include "flat/tensor.hpp"

namespace flat::model {

/// Sentence classifier: embedding lookup -> per-width conv1d + relu ->
/// max-pool-over-time -> concat -> linear head. Works on fixed-length padded
/// id sequences of length >= the largest filter width.
struct TextCnn {
    ad::Tensor embedding;              // [V,d], PAD row frozen at zero
    std::vector<int> widths;           // filter widths, default {3,4,5}
    std::vector<ad::Tensor> conv_w;    // per width: [F,width,d]
    std::vector<ad::Tensor> conv_b;    // per width: [F]
    ad::Tensor head_w;                 // [len(widths)*F, C]
    ad::Tensor head_b;                 // [C]
    int num_classes = 0;
    int filters = 0;
    int dim = 0;

    static TextCnn init(int vocab_size, int dim, int filters, int num_classes,
                        std::mt19937_64& rng, std::vector<int> widths = {3, 4, 5});

    /// All trainable tensors, embedding first.
    std::vector<ad::Tensor> params() const;

    int max_width() const;

    /// Shared graph: [n,d] (possibly mask-scaled) embeddings -> [1,C] logits.
    /// Training, inference, and attribution all route through here.
    ad::Tensor logits_from_embeddings(const ad::Tensor& embeddings) const;

    /// Builds lookup (+ optional positional scaling) and returns the logits
    /// graph. scale, when defined, must be a length-n tensor.
    ad::Tensor logits_graph(std::span<const int> token_ids, const ad::Tensor& scale = {}) const;
};

struct ModelOutput {
    std::vector<double> logits;
    std::vector<double> probabilities;  // softmax of logits, sums to 1
    int predicted = 0;                  // argmax, ties -> lowest index
};

ModelOutput output_from_logits(const ad::Tensor& logits);

/// Pure inference forward. mask_values, when non-empty, must align with
/// token_ids and lie in [0,1]; each position's embedding is scaled before
/// convolution. Throws when n < the largest filter width.
ModelOutput forward(const TextCnn& net, std::span<const int> token_ids,
                    std::span<const double> mask_values = {});

/// Deployment rule for mask-trained models: every embedding is scaled by its
/// word's global importance, PAD positions by 0. Deterministic.
ModelOutput predict_with_importance(const TextCnn& net, const masks::GlobalImportance& importance,
                                    std::span<const int> token_ids);

// ---- checkpoint container ----

struct Checkpoint {
    TextCnn net;
    std::optional<masks::InferenceNet> inference_net;
    std::string kind;            // "base" | "flat" | "adv" | "groupmask"
    std::uint64_t vocab_hash = 0;
    std::string config_json;     // resolved training config, verbatim
    // groupmask extras (empty otherwise)
    ad::Tensor group_scales;     // [G]
    std::vector<int> group_of;   // word id -> group index
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Refuses to load when expected_vocab_hash != 0 and the stored hash differs.
Checkpoint load_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash);

}  // namespace flat::model
