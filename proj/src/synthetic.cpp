#include "flat/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

#include "flat/rng.hpp"

namespace flat::synthetic {

std::string keyword_name(int cls, int k) {
    return "k" + std::to_string(cls) + "w" + std::to_string(k);
}

std::string synonym_name(int cls, int k, int s) {
    return keyword_name(cls, k) + "s" + std::to_string(s);
}

std::string neutral_name(int i) { return "n" + std::to_string(i); }

namespace {

void validate(const SyntheticConfig& c) {
    const bool ok = c.classes >= 2 && c.keywords_per_class >= 1 && c.synonyms_per_keyword >= 1 &&
                    c.neutral_words >= 1 && c.sentence_len >= 1 && c.train_size >= 1 &&
                    c.dev_size >= 1 && c.test_size >= 1 && c.p_syn >= 0.0 && c.p_syn <= 1.0 &&
                    c.min_keywords >= 1 && c.max_keywords >= c.min_keywords &&
                    c.max_keywords <= c.sentence_len &&
                    c.max_keywords <= c.keywords_per_class;
    if (!ok) throw std::invalid_argument("generate_synthetic: invalid configuration");
}

// One split. Synonym surfacing happens only when allow_syn is set (train).
void write_split(const std::string& path, const SyntheticConfig& c, int count, bool allow_syn,
                 std::mt19937_64& rng) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    std::uniform_int_distribution<int> pick_class(0, c.classes - 1);
    std::uniform_int_distribution<int> pick_kw(0, c.keywords_per_class - 1);
    std::uniform_int_distribution<int> pick_syn(0, c.synonyms_per_keyword - 1);
    std::uniform_int_distribution<int> pick_neutral(0, c.neutral_words - 1);
    std::uniform_int_distribution<int> pick_count(c.min_keywords, c.max_keywords);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
        const int label = pick_class(rng);
        const int n_kw = pick_count(rng);
        // distinct keyword indices of the gold class
        std::vector<int> kw;
        while (static_cast<int>(kw.size()) < n_kw) {
            const int k = pick_kw(rng);
            if (std::find(kw.begin(), kw.end(), k) == kw.end()) kw.push_back(k);
        }
        std::vector<std::string> words;
        words.reserve(static_cast<size_t>(c.sentence_len));
        for (int k : kw) {
            if (allow_syn && coin(rng) < c.p_syn)
                words.push_back(synonym_name(label, k, pick_syn(rng)));
            else
                words.push_back(keyword_name(label, k));
        }
        while (static_cast<int>(words.size()) < c.sentence_len)
            words.push_back(neutral_name(pick_neutral(rng)));
        std::shuffle(words.begin(), words.end(), rng);
        out << label << '\t';
        for (size_t w = 0; w < words.size(); ++w) {
            if (w) out << ' ';
            out << words[w];
        }
        out << '\n';
    }
}

}  // namespace

SyntheticFiles generate_synthetic(const SyntheticConfig& c, const std::string& out_dir) {
    validate(c);
    std::filesystem::create_directories(out_dir);
    SyntheticFiles files;
    files.train = out_dir + "/train.tsv";
    files.dev = out_dir + "/dev.tsv";
    files.test = out_dir + "/test.tsv";
    files.synonyms = out_dir + "/synonyms.tsv";
    files.meta = out_dir + "/meta.json";

    // independent streams per split: resizing one split leaves others intact
    auto train_rng = rng::make_rng(rng::sub_seed(c.seed, "synthetic/train"));
    auto dev_rng = rng::make_rng(rng::sub_seed(c.seed, "synthetic/dev"));
    auto test_rng = rng::make_rng(rng::sub_seed(c.seed, "synthetic/test"));
    write_split(files.train, c, c.train_size, true, train_rng);
    write_split(files.dev, c, c.dev_size, false, dev_rng);
    write_split(files.test, c, c.test_size, false, test_rng);

    std::ofstream syn(files.synonyms);
    if (!syn) throw std::runtime_error("cannot write " + files.synonyms);
    for (int cls = 0; cls < c.classes; ++cls)
        for (int k = 0; k < c.keywords_per_class; ++k) {
            syn << keyword_name(cls, k) << '\t';
            for (int s = 0; s < c.synonyms_per_keyword; ++s) {
                if (s) syn << ',';
                syn << synonym_name(cls, k, s);
            }
            syn << '\n';
        }

    nlohmann::json meta;
    meta["classes"] = c.classes;
    meta["sentence_len"] = c.sentence_len;
    meta["p_syn"] = c.p_syn;
    meta["seed"] = c.seed;
    meta["sizes"] = {{"train", c.train_size}, {"dev", c.dev_size}, {"test", c.test_size}};
    nlohmann::json keywords = nlohmann::json::array();
    nlohmann::json synonyms = nlohmann::json::object();
    for (int cls = 0; cls < c.classes; ++cls) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < c.keywords_per_class; ++k) {
            const auto kw = keyword_name(cls, k);
            row.push_back(kw);
            nlohmann::json syns = nlohmann::json::array();
            for (int s = 0; s < c.synonyms_per_keyword; ++s)
                syns.push_back(synonym_name(cls, k, s));
            synonyms[kw] = syns;
        }
        keywords.push_back(row);
    }
    meta["keywords"] = keywords;
    meta["synonyms"] = synonyms;
    nlohmann::json neutral = nlohmann::json::array();
    for (int i = 0; i < c.neutral_words; ++i) neutral.push_back(neutral_name(i));
    meta["neutral"] = neutral;
    std::ofstream mf(files.meta);
    if (!mf) throw std::runtime_error("cannot write " + files.meta);
    mf << meta.dump(2) << '\n';
    return files;
}

}  // namespace flat::synthetic
