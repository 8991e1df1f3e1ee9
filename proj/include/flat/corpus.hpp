#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flat/tensor.hpp"

namespace flat::corpus {

/// Lowercases and splits on whitespace. Input text is expected pre-cleaned;
/// there is no subword handling anywhere in the pipeline.
std::vector<std::string> tokenize(const std::string& text);

/// Word/id bijection with reserved ids 0 (<pad>) and 1 (<unk>). Immutable
/// after the pipeline finishes wiring it up, except for ensure().
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    Vocab();

    /// Counts words over the lines and keeps those with frequency >= min_freq,
    /// ordered by frequency descending, ties lexicographic. Throws on an
    /// empty corpus.
    static Vocab build(const std::vector<std::string>& lines, long long min_freq);

    int id_for(const std::string& word) const;  // kUnk when absent
    const std::string& word_for(int id) const;
    bool contains(const std::string& word) const { return word_to_id_.count(word) > 0; }
    int size() const { return static_cast<int>(id_to_word_.size()); }
    long long freq(int id) const { return counts_[static_cast<size_t>(id)]; }

    /// Adds the word with frequency 0 if absent; returns its id either way.
    /// Lets the synonym lexicon extend a text-built vocabulary so attack
    /// candidates always have embedding rows.
    int ensure(const std::string& word);

    /// FNV-1a over the id-ordered word list; checkpoints embed it so a model
    /// is never resumed against a different vocabulary.
    std::uint64_t hash() const;

    /// One `word<TAB>count` line per id from 2 up (the specials are implied).
    /// load() reproduces identical ids, counts, and hash.
    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

private:
    std::vector<std::string> id_to_word_;
    std::unordered_map<std::string, int> word_to_id_;
    std::vector<long long> counts_;
};

struct Example {
    std::vector<int> ids;  // fixed length: truncated/padded to max_len
    int label = 0;
    std::string text;
};

using Dataset = std::vector<Example>;

/// TSV loader, one `label<TAB>text` per line, 0-based integer labels.
/// Malformed lines raise with the 1-based line number in the message.
Dataset load_dataset(const std::string& path, const Vocab& vocab, int max_len, int num_classes);

/// Writes `label<TAB>text` lines; loading the result with the same vocab and
/// max_len reproduces identical id sequences.
void save_dataset(const std::string& path, const Dataset& dataset);

/// Symmetric word-substitution lexicon plus its connected components.
class SynonymTable {
public:
    SynonymTable() = default;
    /// Builds the symmetric closure of the given edges. Ids must be valid in
    /// a vocab of the given size; self-edges are dropped.
    static SynonymTable from_edges(int vocab_size, const std::vector<std::pair<int, int>>& edges);

    const std::vector<int>& synonyms_of(int id) const;
    bool are_synonyms(int a, int b) const;
    /// Equivalence-group representative; words outside the table are their
    /// own singleton group.
    int group(int id) const;
    bool same_group(int a, int b) const { return group(a) == group(b); }
    bool empty() const { return table_.empty(); }
    /// Unordered unique synonym pairs (a < b), sorted — the iteration set for
    /// importance-gap statistics.
    std::vector<std::pair<int, int>> all_pairs() const;
    /// Ids that appear in the table, sorted.
    std::vector<int> members() const;

private:
    std::unordered_map<int, std::vector<int>> table_;
    std::unordered_map<int, int> root_;  // member id -> component representative
};

/// Parses `word<TAB>syn1,syn2,...` lines. Out-of-vocab words are dropped,
/// duplicate headwords merge with a warning, and the closure is symmetric.
SynonymTable load_synonyms(const std::string& path, const Vocab& vocab);

struct Substitution {
    int position = 0;
    int orig_id = 0;
    int adv_id = 0;
};

/// A label-preserving perturbed example tied to its source. Constructed only
/// through make_adversarial_pair so the invariants below always hold.
struct AdversarialPair {
    Example original;
    std::vector<int> adv_ids;            // equals original.ids off the substituted positions
    std::vector<Substitution> subs;      // each adv_id a table synonym of orig_id
    std::string attack_name;
    bool success = false;
    int queries = 0;
};

/// Validates positional alignment and synonym membership; throws
/// std::invalid_argument on any violation.
AdversarialPair make_adversarial_pair(Example original, std::vector<int> adv_ids,
                                      std::vector<Substitution> subs, const SynonymTable& synonyms,
                                      std::string attack_name, bool success, int queries);

/// Reads `word v1 .. vd` rows into a [V,d] matrix aligned with the vocab.
/// Words missing from the file draw N(0, 0.1); the PAD row stays zero.
ad::Tensor load_embeddings(const std::string& path, const Vocab& vocab, int dim,
                           std::mt19937_64& rng);

/// Fresh randomly initialized embedding table, PAD row zero.
ad::Tensor init_embeddings(const Vocab& vocab, int dim, std::mt19937_64& rng);

}  // namespace flat::corpus
