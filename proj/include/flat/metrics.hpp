#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flat/attack.hpp"
#include "flat/corpus.hpp"
#include "flat/interpret.hpp"
#include "flat/masks.hpp"

namespace flat::metrics {

/// Fraction of examples still predicted correctly after the attack: failed
/// attacks count as correct, successes and originally-misclassified examples
/// count as incorrect. Throws on an empty result set.
double after_attack_accuracy(const std::vector<attack::AttackResult>& results);

/// Fraction predicted correctly before any attack (skipped = wrong).
double clean_accuracy(const std::vector<attack::AttackResult>& results);

/// Tie-corrected (tau-b) rank correlation of two aligned value series.
/// A zero denominator (either side all-constant) is defined as 0.
double kendall_tau_values(std::span<const double> a, std::span<const double> b);

/// Tau-b over position-aligned non-PAD attributions. The two vectors must
/// have the same length and the same PAD layout.
double kendall_tau(const interpret::AttributionVector& a, const interpret::AttributionVector& b);

/// Top-k overlap, counting two positions as a match when their tokens are
/// equal or share a synonym equivalence group. Top-k by attribution
/// descending, ties by position. Multiset semantics; result in [0,1].
double top_k_intersection(const interpret::AttributionVector& a,
                          const interpret::AttributionVector& b, int k,
                          const corpus::SynonymTable& synonyms);

struct ConsistencyPair {
    interpret::AttributionVector original;
    interpret::AttributionVector adversarial;
    int gold = 0;
};

struct ConsistencyReport {
    std::vector<int> ks;                              // the evaluated k values
    std::map<int, double> tau_per_class;              // gold label -> mean tau
    std::map<int, std::vector<double>> topk_per_class;  // gold label -> per-k mean
    std::map<int, int> pairs_per_class;
    std::vector<int> empty_classes;                   // excluded from the macro
    double tau_macro = 0.0;
    std::vector<double> topk_macro;                   // aligned with ks
};

/// Groups pairs by gold label, averages tau and top-k per class, then
/// macro-averages over the classes that actually have pairs (empty classes
/// are excluded with a warning to stderr).
ConsistencyReport consistency_report(const std::vector<ConsistencyPair>& pairs,
                                     std::vector<int> ks, const corpus::SynonymTable& synonyms,
                                     int num_classes);

/// TSV `k<TAB>intersection` of the macro top-k curve.
void write_topk_curve(const std::string& path, const ConsistencyReport& report);

/// Pearson r. Throws on length mismatch, n < 2, or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct WordCorrelations {
    std::vector<int> word_ids;       // real words only (specials skipped)
    std::vector<double> phi;         // global importance
    std::vector<double> train_freq;  // corpus frequency of the word
    std::vector<double> sub_freq;    // times the word was substituted away
    // pairwise r over the series; empty when a series is degenerate
    std::optional<double> r_wi_wf, r_wi_sf, r_wf_sf;
};

/// Per-word (importance, train frequency, substitution frequency) triples
/// plus the three pairwise Pearson r values.
WordCorrelations correlation_analysis(const masks::GlobalImportance& phi,
                                      const corpus::Vocab& vocab,
                                      const std::vector<corpus::AdversarialPair>& dprime);

/// TSV `word<TAB>phi<TAB>train_freq<TAB>sub_freq`.
void write_correlation_series(const std::string& path, const WordCorrelations& wc,
                              const corpus::Vocab& vocab);

}  // namespace flat::metrics
