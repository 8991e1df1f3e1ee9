#include "flat/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "flat/rng.hpp"

namespace flat::corpus {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                out.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Vocab::Vocab() {
    id_to_word_ = {"<pad>", "<unk>"};
    word_to_id_ = {{"<pad>", kPad}, {"<unk>", kUnk}};
    counts_ = {0, 0};
}

Vocab Vocab::build(const std::vector<std::string>& lines, long long min_freq) {
    if (lines.empty()) throw std::invalid_argument("build_vocab: empty corpus");
    std::unordered_map<std::string, long long> freq;
    for (const auto& line : lines)
        for (auto& tok : tokenize(line)) ++freq[tok];
    std::vector<std::pair<std::string, long long>> kept;
    for (auto& [word, n] : freq)
        if (n >= min_freq) kept.emplace_back(word, n);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocab v;
    for (auto& [word, n] : kept) {
        v.word_to_id_.emplace(word, static_cast<int>(v.id_to_word_.size()));
        v.id_to_word_.push_back(word);
        v.counts_.push_back(n);
    }
    return v;
}

int Vocab::id_for(const std::string& word) const {
    auto it = word_to_id_.find(word);
    return it == word_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::word_for(int id) const {
    if (id < 0 || id >= size())
        throw std::out_of_range("vocab: id " + std::to_string(id) + " outside 0.." +
                                std::to_string(size() - 1));
    return id_to_word_[static_cast<size_t>(id)];
}

int Vocab::ensure(const std::string& word) {
    auto it = word_to_id_.find(word);
    if (it != word_to_id_.end()) return it->second;
    const int id = size();
    word_to_id_.emplace(word, id);
    id_to_word_.push_back(word);
    counts_.push_back(0);
    return id;
}

std::uint64_t Vocab::hash() const {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](unsigned char c) {
        h ^= c;
        h *= 1099511628211ull;
    };
    for (const auto& w : id_to_word_) {
        for (unsigned char c : w) mix(c);
        mix('\n');
    }
    return h;
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_vocab: cannot open " + path);
    for (size_t i = 2; i < id_to_word_.size(); ++i)
        out << id_to_word_[i] << '\t' << counts_[i] << '\n';
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_vocab: cannot open " + path);
    Vocab v;
    std::string line;
    long long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0)
            throw std::runtime_error("load_vocab: malformed line " + std::to_string(lineno));
        const std::string word = line.substr(0, tab);
        if (v.word_to_id_.count(word))
            throw std::runtime_error("load_vocab: duplicate word at line " + std::to_string(lineno));
        v.word_to_id_.emplace(word, v.size());
        v.id_to_word_.push_back(word);
        v.counts_.push_back(std::stoll(line.substr(tab + 1)));
    }
    return v;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

}  // namespace

Dataset load_dataset(const std::string& path, const Vocab& vocab, int max_len, int num_classes) {
    if (max_len < 1) throw std::invalid_argument("load_dataset: max_len must be positive");
    Dataset out;
    const auto lines = read_lines(path);
    for (size_t ln = 0; ln < lines.size(); ++ln) {
        const auto& line = lines[ln];
        if (line.empty()) continue;
        const auto fail = [&](const std::string& msg) {
            throw std::runtime_error(path + ":" + std::to_string(ln + 1) + ": " + msg);
        };
        const auto tab = line.find('\t');
        if (tab == std::string::npos) fail("expected label<TAB>text");
        int label = 0;
        try {
            size_t used = 0;
            label = std::stoi(line.substr(0, tab), &used);
            if (used != tab) fail("label is not an integer");
        } catch (const std::exception&) {
            fail("label is not an integer");
        }
        if (label < 0 || label >= num_classes)
            fail("label " + std::to_string(label) + " outside 0.." + std::to_string(num_classes - 1));
        Example ex;
        ex.label = label;
        ex.text = line.substr(tab + 1);
        const auto toks = tokenize(ex.text);
        ex.ids.assign(static_cast<size_t>(max_len), Vocab::kPad);
        const size_t n = std::min(toks.size(), static_cast<size_t>(max_len));
        for (size_t i = 0; i < n; ++i) ex.ids[i] = vocab.id_for(toks[i]);
        out.push_back(std::move(ex));
    }
    return out;
}

void save_dataset(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& ex : dataset) out << ex.label << '\t' << ex.text << '\n';
}

namespace {

int uf_find(std::unordered_map<int, int>& parent, int x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

}  // namespace

SynonymTable SynonymTable::from_edges(int vocab_size,
                                      const std::vector<std::pair<int, int>>& edges) {
    std::unordered_map<int, std::set<int>> adj;
    for (auto [a, b] : edges) {
        if (a < 0 || a >= vocab_size || b < 0 || b >= vocab_size)
            throw std::invalid_argument("synonym edge references id outside the vocabulary");
        if (a == b) continue;
        adj[a].insert(b);
        adj[b].insert(a);
    }
    SynonymTable t;
    std::unordered_map<int, int> parent;
    for (auto& [w, _] : adj) parent.emplace(w, w);
    for (auto& [w, ns] : adj) {
        t.table_.emplace(w, std::vector<int>(ns.begin(), ns.end()));
        for (int n : ns) {
            const int ra = uf_find(parent, w);
            const int rb = uf_find(parent, n);
            if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
    }
    for (auto& [w, _] : adj) t.root_.emplace(w, uf_find(parent, w));
    return t;
}

const std::vector<int>& SynonymTable::synonyms_of(int id) const {
    static const std::vector<int> kEmpty;
    auto it = table_.find(id);
    return it == table_.end() ? kEmpty : it->second;
}

bool SynonymTable::are_synonyms(int a, int b) const {
    const auto& s = synonyms_of(a);
    return std::binary_search(s.begin(), s.end(), b);
}

int SynonymTable::group(int id) const {
    auto it = root_.find(id);
    return it == root_.end() ? id : it->second;
}

std::vector<std::pair<int, int>> SynonymTable::all_pairs() const {
    std::vector<std::pair<int, int>> out;
    for (const auto& [a, ns] : table_)
        for (int b : ns)
            if (a < b) out.emplace_back(a, b);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> SynonymTable::members() const {
    std::vector<int> out;
    out.reserve(table_.size());
    for (const auto& [w, _] : table_) out.push_back(w);
    std::sort(out.begin(), out.end());
    return out;
}

SynonymTable load_synonyms(const std::string& path, const Vocab& vocab) {
    const auto lines = read_lines(path);
    std::vector<std::pair<int, int>> edges;
    std::set<std::string> seen_heads;
    for (size_t ln = 0; ln < lines.size(); ++ln) {
        const auto& line = lines[ln];
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(ln + 1) +
                                     ": expected word<TAB>syn1,syn2,...");
        const std::string head = line.substr(0, tab);
        if (!seen_heads.insert(head).second)
            std::cerr << "warning: " << path << ":" << (ln + 1) << ": duplicate headword '"
                      << head << "' merged\n";
        if (!vocab.contains(head)) continue;  // out-of-vocab: dropped
        const int head_id = vocab.id_for(head);
        std::stringstream rest(line.substr(tab + 1));
        std::string syn;
        while (std::getline(rest, syn, ',')) {
            if (syn.empty() || !vocab.contains(syn)) continue;
            const int syn_id = vocab.id_for(syn);
            if (syn_id != head_id) edges.emplace_back(head_id, syn_id);
        }
    }
    return SynonymTable::from_edges(vocab.size(), edges);
}

AdversarialPair make_adversarial_pair(Example original, std::vector<int> adv_ids,
                                      std::vector<Substitution> subs, const SynonymTable& synonyms,
                                      std::string attack_name, bool success, int queries) {
    if (adv_ids.size() != original.ids.size())
        throw std::invalid_argument("adversarial pair: length mismatch");
    std::vector<bool> substituted(adv_ids.size(), false);
    for (const auto& s : subs) {
        if (s.position < 0 || static_cast<size_t>(s.position) >= adv_ids.size())
            throw std::invalid_argument("adversarial pair: substitution position out of range");
        if (substituted[static_cast<size_t>(s.position)])
            throw std::invalid_argument("adversarial pair: duplicate substitution position");
        substituted[static_cast<size_t>(s.position)] = true;
        if (original.ids[static_cast<size_t>(s.position)] != s.orig_id)
            throw std::invalid_argument("adversarial pair: orig_id does not match original ids");
        if (adv_ids[static_cast<size_t>(s.position)] != s.adv_id)
            throw std::invalid_argument("adversarial pair: adv_id does not match adversarial ids");
        if (!synonyms.are_synonyms(s.orig_id, s.adv_id))
            throw std::invalid_argument("adversarial pair: substitution is not a table synonym");
    }
    for (size_t i = 0; i < adv_ids.size(); ++i)
        if (!substituted[i] && adv_ids[i] != original.ids[i])
            throw std::invalid_argument(
                "adversarial pair: ids differ outside the substitution map");
    AdversarialPair p;
    p.original = std::move(original);
    p.adv_ids = std::move(adv_ids);
    p.subs = std::move(subs);
    p.attack_name = std::move(attack_name);
    p.success = success;
    p.queries = queries;
    return p;
}

ad::Tensor init_embeddings(const Vocab& vocab, int dim, std::mt19937_64& rng) {
    ad::Tensor table = ad::Tensor::zeros({vocab.size(), dim});
    auto& v = table.values_mut();
    std::normal_distribution<double> dist(0.0, 0.1);
    // row 0 (PAD) stays zero
    for (int w = 1; w < vocab.size(); ++w)
        for (int j = 0; j < dim; ++j) v[static_cast<size_t>(w) * dim + j] = dist(rng);
    return table;
}

ad::Tensor load_embeddings(const std::string& path, const Vocab& vocab, int dim,
                           std::mt19937_64& rng) {
    ad::Tensor table = init_embeddings(vocab, dim, rng);
    auto& v = table.values_mut();
    const auto lines = read_lines(path);
    for (size_t ln = 0; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        std::stringstream ss(lines[ln]);
        std::string word;
        ss >> word;
        if (!vocab.contains(word)) continue;
        const int id = vocab.id_for(word);
        if (id == Vocab::kPad) continue;  // PAD row frozen at zero
        for (int j = 0; j < dim; ++j) {
            double x = 0.0;
            if (!(ss >> x))
                throw std::runtime_error(path + ":" + std::to_string(ln + 1) + ": row for '" +
                                         word + "' has fewer than " + std::to_string(dim) +
                                         " values");
            v[static_cast<size_t>(id) * dim + j] = x;
        }
    }
    return table;
}

}  // namespace flat::corpus
