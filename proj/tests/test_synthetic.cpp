#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "flat/corpus.hpp"
#include "flat/synthetic.hpp"

using namespace flat::synthetic;

namespace {

std::string tmp_dir(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Line {
    int label;
    std::vector<std::string> tokens;
};

std::vector<Line> parse_tsv(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<Line> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        Line l;
        l.label = std::stoi(line.substr(0, tab));
        l.tokens = flat::corpus::tokenize(line.substr(tab + 1));
        out.push_back(std::move(l));
    }
    return out;
}

SyntheticConfig small_config() {
    SyntheticConfig c;
    c.train_size = 800;
    c.dev_size = 200;
    c.test_size = 100;
    c.p_syn = 0.05;
    c.seed = 7;
    return c;
}

// word -> (class, keyword index) for canonical keywords and their synonyms
std::map<std::string, std::pair<int, int>> keyword_lookup(const SyntheticConfig& c) {
    std::map<std::string, std::pair<int, int>> m;
    for (int cls = 0; cls < c.classes; ++cls)
        for (int k = 0; k < c.keywords_per_class; ++k) {
            m[keyword_name(cls, k)] = {cls, k};
            for (int s = 0; s < c.synonyms_per_keyword; ++s)
                m[synonym_name(cls, k, s)] = {cls, k};
        }
    return m;
}

bool is_synonym_form(const std::string& word) { return word.find('s') != std::string::npos && word[0] == 'k'; }

}  // namespace

TEST_CASE("synthetic generation is byte-identical across reruns") {
    const auto cfg = small_config();
    const auto a = generate_synthetic(cfg, tmp_dir("flat_synth_a"));
    const auto b = generate_synthetic(cfg, tmp_dir("flat_synth_b"));
    CHECK(slurp(a.train) == slurp(b.train));
    CHECK(slurp(a.dev) == slurp(b.dev));
    CHECK(slurp(a.test) == slurp(b.test));
    CHECK(slurp(a.synonyms) == slurp(b.synonyms));
    CHECK(slurp(a.meta) == slurp(b.meta));
    CHECK_FALSE(slurp(a.train).empty());
}

TEST_CASE("every sentence plants exactly the configured keywords of its gold class") {
    const auto cfg = small_config();
    const auto files = generate_synthetic(cfg, tmp_dir("flat_synth_struct"));
    const auto lookup = keyword_lookup(cfg);
    for (const auto* path : {&files.train, &files.dev, &files.test}) {
        const auto lines = parse_tsv(*path);
        REQUIRE_FALSE(lines.empty());
        for (const auto& l : lines) {
            CHECK(static_cast<int>(l.tokens.size()) == cfg.sentence_len);
            int own = 0, other = 0;
            for (const auto& t : l.tokens) {
                auto it = lookup.find(t);
                if (it == lookup.end()) continue;
                (it->second.first == l.label ? own : other) += 1;
            }
            CHECK(own == 1);   // default min_keywords = max_keywords = 1
            CHECK(other == 0); // label is fully determined by the planted keyword
        }
    }
}

TEST_CASE("synonym surfaces appear only in train, at roughly p_syn") {
    const auto cfg = small_config();
    const auto files = generate_synthetic(cfg, tmp_dir("flat_synth_psyn"));
    int syn_train = 0;
    const auto train = parse_tsv(files.train);
    for (const auto& l : train)
        for (const auto& t : l.tokens)
            if (is_synonym_form(t)) ++syn_train;
    // ~Binomial(800, 0.05): expect 40, allow wide slack
    CHECK(syn_train > 10);
    CHECK(syn_train < 100);
    for (const auto* path : {&files.dev, &files.test})
        for (const auto& l : parse_tsv(*path))
            for (const auto& t : l.tokens) CHECK_FALSE(is_synonym_form(t));

    auto zero = cfg;
    zero.p_syn = 0.0;
    const auto zf = generate_synthetic(zero, tmp_dir("flat_synth_psyn0"));
    for (const auto& l : parse_tsv(zf.train))
        for (const auto& t : l.tokens) CHECK_FALSE(is_synonym_form(t));
}

TEST_CASE("meta lexicon matches the synonym file and the vocabulary partition") {
    const auto cfg = small_config();
    const auto files = generate_synthetic(cfg, tmp_dir("flat_synth_meta"));
    const auto meta = nlohmann::json::parse(slurp(files.meta));
    CHECK(meta["classes"] == cfg.classes);
    REQUIRE(meta["keywords"].size() == static_cast<size_t>(cfg.classes));
    for (const auto& row : meta["keywords"])
        CHECK(row.size() == static_cast<size_t>(cfg.keywords_per_class));
    CHECK(meta["neutral"].size() == static_cast<size_t>(cfg.neutral_words));
    for (const auto& [kw, syns] : meta["synonyms"].items())
        CHECK(syns.size() == static_cast<size_t>(cfg.synonyms_per_keyword));

    // synonym file covers every keyword with its synonyms
    std::ifstream syn(files.synonyms);
    int lines = 0;
    std::string line;
    while (std::getline(syn, line))
        if (!line.empty()) ++lines;
    CHECK(lines == cfg.classes * cfg.keywords_per_class);
}

TEST_CASE("a keyword-indicator logistic regression separates the benchmark") {
    const auto cfg = small_config();
    const auto files = generate_synthetic(cfg, tmp_dir("flat_synth_lr"));
    const auto lookup = keyword_lookup(cfg);
    const int n_feat = cfg.classes * cfg.keywords_per_class;
    auto featurize = [&](const Line& l) {
        std::vector<double> x(static_cast<size_t>(n_feat), 0.0);
        for (const auto& t : l.tokens) {
            auto it = lookup.find(t);
            if (it != lookup.end())
                x[static_cast<size_t>(it->second.first * cfg.keywords_per_class +
                                      it->second.second)] = 1.0;
        }
        return x;
    };
    const auto train = parse_tsv(files.train);
    const auto dev = parse_tsv(files.dev);

    // plain batch-gradient logistic regression, C=2
    std::vector<double> w(static_cast<size_t>(n_feat), 0.0);
    double b = 0.0;
    for (int step = 0; step < 300; ++step) {
        std::vector<double> gw(w.size(), 0.0);
        double gb = 0.0;
        for (const auto& l : train) {
            const auto x = featurize(l);
            double z = b;
            for (size_t j = 0; j < w.size(); ++j) z += w[j] * x[j];
            const double p = 1.0 / (1.0 + std::exp(-z));
            const double err = p - l.label;
            for (size_t j = 0; j < w.size(); ++j) gw[j] += err * x[j];
            gb += err;
        }
        for (size_t j = 0; j < w.size(); ++j) w[j] -= 1.0 * gw[j] / train.size();
        b -= 1.0 * gb / train.size();
    }
    int correct = 0;
    for (const auto& l : dev) {
        const auto x = featurize(l);
        double z = b;
        for (size_t j = 0; j < w.size(); ++j) z += w[j] * x[j];
        correct += ((z > 0.0) ? 1 : 0) == l.label;
    }
    const double acc = static_cast<double>(correct) / dev.size();
    CHECK(acc >= 0.95);
}
