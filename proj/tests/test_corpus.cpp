#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "flat/corpus.hpp"
#include "flat/rng.hpp"

using namespace flat::corpus;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on whitespace") {
    CHECK(tokenize("Good  Movie\ttonight") == std::vector<std::string>{"good", "movie", "tonight"});
    CHECK(tokenize("   ") == std::vector<std::string>{});
}

TEST_CASE("vocab build applies frequency threshold and deterministic ordering") {
    Vocab v = Vocab::build({"a a b"}, 2);
    CHECK(v.contains("a"));
    CHECK_FALSE(v.contains("b"));
    CHECK(v.id_for("b") == Vocab::kUnk);

    Vocab v0 = Vocab::build({"x y"}, 0);
    CHECK(v0.contains("x"));
    CHECK(v0.contains("y"));

    CHECK_THROWS_AS(Vocab::build({}, 1), std::invalid_argument);

    // ordering: freq desc, ties lexicographic, specials first
    Vocab ord = Vocab::build({"b b c a a a"}, 1);
    CHECK(ord.id_for("a") == 2);
    CHECK(ord.id_for("b") == 3);
    CHECK(ord.id_for("c") == 4);
    CHECK(ord.word_for(Vocab::kPad) == "<pad>");
    CHECK(ord.word_for(Vocab::kUnk) == "<unk>");
    CHECK(ord.freq(ord.id_for("a")) == 3);
}

TEST_CASE("vocab ensure extends without disturbing existing ids") {
    Vocab v = Vocab::build({"a b"}, 1);
    const int a = v.id_for("a");
    const auto h0 = v.hash();
    const int fresh = v.ensure("zzz");
    CHECK(fresh == v.size() - 1);
    CHECK(v.id_for("a") == a);
    CHECK(v.freq(fresh) == 0);
    CHECK(v.ensure("zzz") == fresh);  // idempotent
    CHECK(v.hash() != h0);            // hash tracks the word list
}

TEST_CASE("dataset loading pads, truncates, and maps unknowns") {
    const auto path = temp_path("flat_ds_test.tsv");
    write_file(path, "1\tgood movie\n0\talpha beta gamma delta epsilon zeta\n1\tgood mystery\n");
    Vocab v = Vocab::build({"good movie alpha beta gamma delta epsilon zeta"}, 1);
    auto ds = load_dataset(path, v, 4, 2);
    REQUIRE(ds.size() == 3);
    CHECK(ds[0].ids == std::vector<int>{v.id_for("good"), v.id_for("movie"), Vocab::kPad, Vocab::kPad});
    CHECK(ds[0].label == 1);
    CHECK(ds[1].ids.size() == 4);  // truncated to the first four tokens
    CHECK(ds[1].ids[3] == v.id_for("delta"));
    CHECK(ds[2].ids[1] == Vocab::kUnk);  // "mystery" unseen
}

TEST_CASE("dataset loader reports malformed lines with their line number") {
    Vocab v = Vocab::build({"ok"}, 1);
    const auto no_tab = temp_path("flat_ds_notab.tsv");
    write_file(no_tab, "0\tok\nbroken line\n");
    CHECK_THROWS_WITH_AS(load_dataset(no_tab, v, 4, 2), doctest::Contains(":2:"),
                         std::runtime_error);

    const auto bad_label = temp_path("flat_ds_badlabel.tsv");
    write_file(bad_label, "x\tok\n");
    CHECK_THROWS_WITH_AS(load_dataset(bad_label, v, 4, 2), doctest::Contains("label"),
                         std::runtime_error);

    const auto big_label = temp_path("flat_ds_biglabel.tsv");
    write_file(big_label, "0\tok\n2\tok\n");
    CHECK_THROWS_WITH_AS(load_dataset(big_label, v, 4, 2), doctest::Contains(":2:"),
                         std::runtime_error);
}

TEST_CASE("dataset save/load round-trips token ids") {
    Vocab v = Vocab::build({"alpha beta gamma delta"}, 1);
    const auto src = temp_path("flat_ds_rt_src.tsv");
    write_file(src, "0\talpha beta\n1\tgamma delta alpha\n1\tdelta\n");
    auto ds = load_dataset(src, v, 5, 2);
    const auto dst = temp_path("flat_ds_rt_dst.tsv");
    save_dataset(dst, ds);
    auto ds2 = load_dataset(dst, v, 5, 2);
    REQUIRE(ds2.size() == ds.size());
    for (size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds2[i].ids == ds[i].ids);
        CHECK(ds2[i].label == ds[i].label);
    }
}

TEST_CASE("synonym loading is symmetric, drops out-of-vocab, merges duplicates") {
    Vocab v = Vocab::build({"good great fine plot"}, 1);
    const auto path = temp_path("flat_syn_test.tsv");
    write_file(path, "good\tgreat,missingword\ngreat\tfine\ngood\tfine\n");
    auto t = load_synonyms(path, v);
    const int good = v.id_for("good"), great = v.id_for("great"), fine = v.id_for("fine");
    CHECK(t.are_synonyms(good, great));
    CHECK(t.are_synonyms(great, good));
    CHECK(t.are_synonyms(great, fine));
    // chain -> one equivalence group
    CHECK(t.same_group(good, fine));
    CHECK_FALSE(t.same_group(good, v.id_for("plot")));
    // "missingword" dropped silently
    for (int s : t.synonyms_of(good)) CHECK(s != Vocab::kUnk);
}

TEST_CASE("synonym table properties hold for random edge sets") {
    auto g = flat::rng::make_rng(123);
    for (int trial = 0; trial < 30; ++trial) {
        const int vocab_size = 40;
        std::uniform_int_distribution<int> pick(2, vocab_size - 1);
        std::vector<std::pair<int, int>> edges;
        const int n_edges = 1 + static_cast<int>(g() % 25);
        for (int e = 0; e < n_edges; ++e) edges.emplace_back(pick(g), pick(g));
        auto t = SynonymTable::from_edges(vocab_size, edges);

        // symmetry
        for (int a = 0; a < vocab_size; ++a)
            for (int b : t.synonyms_of(a)) CHECK(t.are_synonyms(b, a));

        // groups match a BFS-component oracle
        std::vector<int> comp(vocab_size, -1);
        int next = 0;
        for (int start = 0; start < vocab_size; ++start) {
            if (comp[start] != -1) continue;
            std::vector<int> stack = {start};
            comp[start] = next;
            while (!stack.empty()) {
                int cur = stack.back();
                stack.pop_back();
                for (int nb : t.synonyms_of(cur))
                    if (comp[nb] == -1) {
                        comp[nb] = next;
                        stack.push_back(nb);
                    }
            }
            ++next;
        }
        for (int a = 0; a < vocab_size; ++a)
            for (int b = 0; b < vocab_size; ++b)
                CHECK(t.same_group(a, b) == (comp[a] == comp[b]));

        // all_pairs lists each unordered linked pair exactly once
        std::set<std::pair<int, int>> seen;
        for (auto [a, b] : t.all_pairs()) {
            CHECK(a < b);
            CHECK(t.are_synonyms(a, b));
            CHECK(seen.insert({a, b}).second);
        }
    }
}

TEST_CASE("adversarial pair construction enforces the invariants") {
    Vocab v = Vocab::build({"good great bad awful movie plot"}, 1);
    auto t = SynonymTable::from_edges(
        v.size(), {{v.id_for("good"), v.id_for("great")}, {v.id_for("bad"), v.id_for("awful")}});
    Example ex;
    ex.label = 1;
    ex.ids = {v.id_for("good"), v.id_for("movie"), v.id_for("plot"), Vocab::kPad};

    auto adv = ex.ids;
    adv[0] = v.id_for("great");
    auto pair = make_adversarial_pair(ex, adv, {{0, v.id_for("good"), v.id_for("great")}}, t,
                                      "del", true, 17);
    CHECK(pair.success);
    CHECK(pair.queries == 17);
    CHECK(pair.original.label == 1);

    // change outside the substitution map
    auto sneaky = adv;
    sneaky[1] = v.id_for("plot");
    CHECK_THROWS_AS(make_adversarial_pair(ex, sneaky, {{0, v.id_for("good"), v.id_for("great")}},
                                          t, "del", true, 1),
                    std::invalid_argument);

    // non-synonym substitution
    auto wrong = ex.ids;
    wrong[0] = v.id_for("awful");
    CHECK_THROWS_AS(make_adversarial_pair(ex, wrong, {{0, v.id_for("good"), v.id_for("awful")}},
                                          t, "del", true, 1),
                    std::invalid_argument);

    // orig_id mismatch
    CHECK_THROWS_AS(make_adversarial_pair(ex, adv, {{0, v.id_for("movie"), v.id_for("great")}},
                                          t, "del", true, 1),
                    std::invalid_argument);

    // duplicate position
    CHECK_THROWS_AS(make_adversarial_pair(ex, adv,
                                          {{0, v.id_for("good"), v.id_for("great")},
                                           {0, v.id_for("good"), v.id_for("great")}},
                                          t, "del", true, 1),
                    std::invalid_argument);
}

TEST_CASE("embedding io: file rows override, missing words randomized, PAD frozen") {
    Vocab v = Vocab::build({"alpha beta"}, 1);
    const auto path = temp_path("flat_emb_test.txt");
    write_file(path, "alpha 1.0 2.0 3.0\nnotinvocab 9 9 9\n");
    auto g = flat::rng::make_rng(7);
    auto table = load_embeddings(path, v, 3, g);
    REQUIRE(table.dim(0) == v.size());
    const int alpha = v.id_for("alpha"), beta = v.id_for("beta");
    CHECK(table.values()[static_cast<size_t>(alpha) * 3 + 0] == 1.0);
    CHECK(table.values()[static_cast<size_t>(alpha) * 3 + 2] == 3.0);
    // PAD row all zero
    for (int j = 0; j < 3; ++j) CHECK(table.values()[static_cast<size_t>(j)] == 0.0);
    // beta initialized from N(0, 0.1): nonzero with prob 1
    bool any = false;
    for (int j = 0; j < 3; ++j) any = any || table.values()[static_cast<size_t>(beta) * 3 + j] != 0.0;
    CHECK(any);

    const auto short_row = temp_path("flat_emb_short.txt");
    write_file(short_row, "alpha 1.0\n");
    auto g2 = flat::rng::make_rng(7);
    CHECK_THROWS_AS(load_embeddings(short_row, v, 3, g2), std::runtime_error);
}

TEST_CASE("vocab save/load round-trips ids, counts, and hash") {
    auto v = Vocab::build({"the cat sat", "the dog sat", "the end"}, 1);
    v.ensure("extra");  // frequency-0 lexicon word survives the round trip

    const auto path = temp_path("flat_vocab_rt.tsv");
    v.save(path);
    const auto back = Vocab::load(path);

    REQUIRE(back.size() == v.size());
    for (int id = 0; id < v.size(); ++id) {
        CHECK(back.word_for(id) == v.word_for(id));
        CHECK(back.freq(id) == v.freq(id));
    }
    CHECK(back.hash() == v.hash());
    CHECK(back.id_for("the") == v.id_for("the"));
    CHECK(back.id_for("nonsense") == Vocab::kUnk);

    CHECK_THROWS_AS(Vocab::load(temp_path("flat_vocab_missing.tsv")), std::runtime_error);

    const auto bad = temp_path("flat_vocab_bad.tsv");
    std::ofstream(bad) << "nocount\n";
    CHECK_THROWS_AS(Vocab::load(bad), std::runtime_error);
}
