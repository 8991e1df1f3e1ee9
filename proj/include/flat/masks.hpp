#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "flat/corpus.hpp"
#include "flat/tensor.hpp"

namespace flat::masks {

/// Single-layer map from a word embedding to two logits (select, drop).
/// The word's selection probability is softmax(logits)[0]. Zero-initialized
/// so every word starts at exactly p = 0.5.
struct InferenceNet {
    ad::Tensor w;  // [d,2]
    ad::Tensor b;  // [2]

    static InferenceNet zero_init(int dim);
    std::vector<ad::Tensor> params() const { return {w, b}; }
    int dim() const { return w.dim(0); }
};

/// Per-position Bernoulli selection probabilities for one token sequence.
/// p is strictly interior (softmax of finite logits). PAD positions carry a
/// probability too but are flagged: they are excluded from entropy and
/// forced to mask 0 wherever masks are applied.
struct MaskDistribution {
    std::vector<double> p;
    std::vector<bool> is_pad;  // empty = no padding anywhere
};

/// p_i = softmax(net(e_i))[select] for each embedding row.
MaskDistribution mask_probs(const InferenceNet& net, const ad::Tensor& embeddings,
                            const std::vector<bool>& pad_flags = {});

/// Binary-concrete draw: softmax over ((log p + g_sel)/tau, (log(1-p) + g_drop)/tau),
/// select coordinate. Strictly inside (0,1); differentiable in p.
double relaxed_bernoulli(double p, double tau, double g_sel, double g_drop);

/// d(relaxed_bernoulli)/dp with the Gumbel noise held fixed.
double relaxed_bernoulli_dp(double p, double tau, double g_sel, double g_drop);

/// One relaxed mask vector; PAD positions come back as exactly 0.
std::vector<double> sample_masks(const MaskDistribution& dist, double tau, std::mt19937_64& rng);

/// Sum over non-PAD positions of -(p ln p + (1-p) ln(1-p)), natural log.
double bernoulli_entropy(const MaskDistribution& dist);

// ---- graph-building counterparts used inside training objectives ----

/// Two logits per row: embeddings [n,d] -> [n,2].
ad::Tensor logits_graph(const InferenceNet& net, const ad::Tensor& embeddings);

/// Selection probabilities as a differentiable [n] vector.
ad::Tensor select_probs_graph(const InferenceNet& net, const ad::Tensor& embeddings);

/// Relaxed mask sample as a differentiable [n] vector (fresh Gumbel noise
/// from rng; PAD positions multiplied to 0).
ad::Tensor sampled_masks_graph(const InferenceNet& net, const ad::Tensor& embeddings, double tau,
                               const std::vector<bool>& pad_flags, std::mt19937_64& rng);

/// Differentiable scalar: entropy summed over non-PAD positions.
ad::Tensor entropy_graph(const InferenceNet& net, const ad::Tensor& embeddings,
                         const std::vector<bool>& pad_flags);

/// phi per vocabulary word: the net applied to every embedding row. A pure
/// function of (net params, embedding row) — identical embeddings always get
/// identical phi.
struct GlobalImportance {
    std::vector<double> phi;  // indexed by word id
    double operator()(int word_id) const { return phi[static_cast<size_t>(word_id)]; }
    int size() const { return static_cast<int>(phi.size()); }
};

GlobalImportance global_importance(const InferenceNet& net, const ad::Tensor& embedding_table);

/// Version-keyed cache over global_importance; recomputes when the net or
/// table storage versions moved, or after invalidate().
class ImportanceCache {
public:
    const GlobalImportance& get(const InferenceNet& net, const ad::Tensor& embedding_table);
    void invalidate() { valid_ = false; }

private:
    GlobalImportance cached_;
    bool valid_ = false;
    std::uint64_t w_ver_ = 0, b_ver_ = 0, table_ver_ = 0;
};

/// TSV `word<TAB>phi`, phi descending (ties by word id).
void export_importance(const std::string& path, const GlobalImportance& importance,
                       const corpus::Vocab& vocab);

}  // namespace flat::masks
