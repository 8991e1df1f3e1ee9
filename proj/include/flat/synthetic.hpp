#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flat::synthetic {

/// Keyword-planted classification benchmark. Every sentence carries planted
/// keywords of its gold class among neutral filler, so the label is fully
/// determined by the keywords (Bayes accuracy ~1). Each keyword has a fixed
/// set of synonyms that the attack may substitute; they surface in training
/// text only with probability p_syn, leaving them under-trained on purpose.
struct SyntheticConfig {
    int classes = 2;
    int keywords_per_class = 5;
    int synonyms_per_keyword = 2;
    int neutral_words = 100;
    int sentence_len = 12;
    int train_size = 2000;
    int dev_size = 400;
    int test_size = 400;
    double p_syn = 0.1;        // chance a planted train keyword surfaces as a synonym
    int min_keywords = 1;      // planted keywords per sentence
    int max_keywords = 1;
    std::uint64_t seed = 7;
};

struct SyntheticFiles {
    std::string train;
    std::string dev;
    std::string test;
    std::string synonyms;
    std::string meta;  // JSON lexicon: per-class keywords, synonym lists, neutral words
};

/// Writes train/dev/test TSVs, the synonym table, and the meta lexicon into
/// out_dir (created if needed). Deterministic: same config -> byte-identical
/// files. Returns the written paths.
SyntheticFiles generate_synthetic(const SyntheticConfig& config, const std::string& out_dir);

/// Word surface forms, exposed so evaluations can partition the vocabulary.
std::string keyword_name(int cls, int k);
std::string synonym_name(int cls, int k, int s);
std::string neutral_name(int i);

}  // namespace flat::synthetic
