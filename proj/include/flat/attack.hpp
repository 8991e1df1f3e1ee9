#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flat/corpus.hpp"
#include "flat/masks.hpp"
#include "flat/model.hpp"

namespace flat::attack {

/// Read-only evaluation surface the attacks drive. occlude_pos >= 0 zeroes
/// that position's embedding before the forward pass (sequence length fixed);
/// -1 evaluates the ids as given. Must be safe to call from several threads.
struct ModelView {
    std::function<model::ModelOutput(std::span<const int> ids, int occlude_pos)> eval;
    int num_classes = 0;
};

/// Plain classifier, no mask scaling.
ModelView make_base_view(const model::TextCnn& net);

/// Deployed predictor: every embedding scaled by its word's importance,
/// PAD by zero.
ModelView make_importance_view(const model::TextCnn& net, const masks::GlobalImportance& phi);

enum class AttackKind { deletion_importance, saliency_weighted };

std::string attack_name(AttackKind kind);

struct AttackConfig {
    AttackKind kind = AttackKind::deletion_importance;
    double max_sub_ratio = 0.3;  // at most ceil(ratio * n_nonpad) substitutions
    int max_candidates = 10;     // synonyms tried per position
    int query_budget = 2000;     // forward passes allowed per example

    void validate() const;
};

struct AttackResult {
    /// Present iff at least one substitution was committed; carries the
    /// best-effort perturbation even when the label never flipped.
    std::optional<corpus::AdversarialPair> pair;
    bool success = false;  // label flipped
    bool skipped = false;  // model was already wrong on the original
    int queries = 0;
    int pred_before = -1;
    int pred_after = -1;
    /// p(gold) on the original, then after every committed substitution.
    std::vector<double> prob_trace;
};

/// Ranks non-PAD positions by occlusion importance p_y(x) - p_y(x \ i), then
/// greedily tries each position's synonyms: committing a flip ends the
/// attack, otherwise the synonym with the strictly best drop in p_y sticks.
AttackResult deletion_importance_attack(const ModelView& view, const corpus::Example& example,
                                        const corpus::SynonymTable& synonyms,
                                        const AttackConfig& config);

/// Scores positions by softmax(saliency) * best-synonym drop, saliency via
/// UNK replacement; substitutes in score order, keeping a change only when
/// the re-evaluated sentence flips or strictly lowers p_y.
AttackResult saliency_weighted_attack(const ModelView& view, const corpus::Example& example,
                                      const corpus::SynonymTable& synonyms,
                                      const AttackConfig& config);

/// Dispatches on config.kind.
AttackResult run_attack(const ModelView& view, const corpus::Example& example,
                        const corpus::SynonymTable& synonyms, const AttackConfig& config);

struct AttackSummary {
    int total = 0;
    int successes = 0;   // label flipped
    int failures = 0;    // attacked, label held
    int skipped = 0;     // originally misclassified
};

/// Attacks every example against the frozen view, in parallel when jobs > 1.
/// Results come back in input order regardless of thread scheduling.
std::vector<AttackResult> attack_dataset(const ModelView& view, const corpus::Dataset& examples,
                                         const corpus::SynonymTable& synonyms,
                                         const AttackConfig& config, int jobs,
                                         AttackSummary* summary = nullptr);

/// JSON lines, one object per example:
/// {id, orig_tokens, adv_tokens, subs:[[pos,orig,adv]...], gold, pred_before,
///  pred_after, success, queries}.
void dump_attack_results(const std::string& path, const corpus::Dataset& examples,
                         const std::vector<AttackResult>& results, const corpus::Vocab& vocab);

}  // namespace flat::attack
