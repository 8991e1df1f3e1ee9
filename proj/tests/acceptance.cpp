// Release gates for the toolkit: eleven end-to-end checks, from raw gradient
// fidelity up to the scaled-down robustness experiment on the synthetic
// benchmark. Each check prints one [PASS]/[FAIL] line with the measured
// numbers; the exit code is the number of failed checks. Expect a few
// minutes of runtime — the experiment phase trains eighteen models.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flat/attack.hpp"
#include "flat/corpus.hpp"
#include "flat/interpret.hpp"
#include "flat/masks.hpp"
#include "flat/metrics.hpp"
#include "flat/model.hpp"
#include "flat/ops.hpp"
#include "flat/rng.hpp"
#include "flat/synthetic.hpp"
#include "flat/tensor.hpp"
#include "flat/train.hpp"

namespace fs = std::filesystem;
using namespace flat;

namespace {

struct Check {
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double lap() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

corpus::Example random_example(int len, int vocab, int classes, int pad_tail,
                               std::mt19937_64& g) {
    corpus::Example e;
    std::uniform_int_distribution<int> word(2, vocab - 1);
    for (int i = 0; i < len - pad_tail; ++i) e.ids.push_back(word(g));
    for (int i = 0; i < pad_tail; ++i) e.ids.push_back(corpus::Vocab::kPad);
    e.label = static_cast<int>(g() % static_cast<unsigned>(classes));
    return e;
}

// pairs valid against a fixed {2~3, 4~5} synonym table
std::vector<corpus::AdversarialPair> random_pairs(int count, int len, int vocab, int classes,
                                                  const corpus::SynonymTable& synonyms,
                                                  std::mt19937_64& g) {
    std::vector<corpus::AdversarialPair> pairs;
    for (int i = 0; i < count; ++i) {
        auto host = random_example(len, vocab, classes, i % 2, g);
        host.ids[0] = 2;
        host.ids[1] = 4;
        auto adv = host.ids;
        adv[0] = 3;
        adv[1] = 5;
        pairs.push_back(corpus::make_adversarial_pair(host, adv, {{0, 2, 3}, {1, 4, 5}},
                                                      synonyms, "oracle", true, 1));
    }
    return pairs;
}

// ---- 1. analytic gradients vs central finite differences -----------------

Check check_gradients() {
    Check c;
    Stopwatch sw;
    int entries = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        auto g = rng::make_rng(1000 + static_cast<std::uint64_t>(trial));
        const int vocab = 6 + static_cast<int>(g() % 5);
        const int dim = 3 + static_cast<int>(g() % 3);
        const int filters = 2 + static_cast<int>(g() % 3);
        const int classes = 2 + static_cast<int>(g() % 2);
        const int len = 6;
        auto net = model::TextCnn::init(vocab, dim, filters, classes, g, {2, 3});
        auto inet = masks::InferenceNet::zero_init(dim);
        // bend the inference net off its symmetric zero init
        for (auto& t : inet.params())
            for (auto& v : t.values_mut()) v = rng::normal(g, 0.0, 0.6);

        std::vector<corpus::Example> batch = {random_example(len, vocab, classes, 1, g),
                                              random_example(len, vocab, classes, 0, g)};
        const auto synonyms = corpus::SynonymTable::from_edges(vocab, {{2, 3}, {4, 5}});
        const auto pairs = random_pairs(1, len, vocab, classes, synonyms, g);

        train::FlatConfig cfg;
        cfg.use_masks = true;
        cfg.beta = 0.2;
        cfg.gamma = 0.7;
        cfg.tau = 0.8;

        // identical gumbel draws on every evaluation of the objective
        const std::uint64_t noise_seed = 9000 + static_cast<std::uint64_t>(trial);
        auto value = [&]() {
            auto noise = rng::make_rng(noise_seed);
            return train::flat_objective(batch, pairs, net, inet, cfg, noise).values()[0];
        };

        auto params = net.params();
        for (auto& p : inet.params()) params.push_back(p);
        for (auto& p : params) p.zero_grad();
        ad::Tape tape;
        {
            ad::TapeScope scope(tape);
            auto noise = rng::make_rng(noise_seed);
            auto loss = train::flat_objective(batch, pairs, net, inet, cfg, noise);
            tape.backward(loss);
        }

        const double h = 1e-5;
        for (const auto& p : params) {
            const auto n = static_cast<size_t>(p.numel());
            for (size_t idx : std::set<size_t>{0, n / 2, n - 1}) {
                auto& vals = p.values_mut();
                const double keep = vals[idx];
                vals[idx] = keep + h;
                const double up = value();
                p.values_mut()[idx] = keep - h;
                const double dn = value();
                p.values_mut()[idx] = keep;
                const double fd = (up - dn) / (2 * h);
                const double an = p.grad()[idx];
                const double rel =
                    std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
                worst = std::max(worst, rel);
                ++entries;
            }
        }
    }
    c.seconds = sw.lap();
    c.pass = worst <= 1e-4 && c.seconds < 60.0;
    c.detail = "20 nets, " + std::to_string(entries) + " entries, max rel err " + fmt(worst);
    return c;
}

// ---- 2. masked objective degrades to plain adversarial cross-entropy -----

double ce_oracle(const model::TextCnn& net, std::span<const int> ids, int label) {
    const auto out = model::forward(net, ids);
    double mx = out.logits[0];
    for (double v : out.logits) mx = std::max(mx, v);
    double lse = 0.0;
    for (double v : out.logits) lse += std::exp(v - mx);
    return -(out.logits[static_cast<size_t>(label)] - mx - std::log(lse));
}

Check check_plain_objective() {
    Check c;
    Stopwatch sw;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        auto g = rng::make_rng(2000 + static_cast<std::uint64_t>(i));
        const int vocab = 6 + static_cast<int>(g() % 5);
        const int dim = 3 + static_cast<int>(g() % 3);
        const int classes = 2 + static_cast<int>(g() % 2);
        const int len = 6;
        auto net = model::TextCnn::init(vocab, dim, 3, classes, g, {2, 3});
        auto inet = masks::InferenceNet::zero_init(dim);
        for (auto& t : inet.params())  // must be ignored entirely with masks off
            for (auto& v : t.values_mut()) v = rng::normal(g, 0.0, 1.0);

        std::vector<corpus::Example> batch;
        const int bsz = 1 + static_cast<int>(g() % 4);
        for (int b = 0; b < bsz; ++b) batch.push_back(random_example(len, vocab, classes, b % 2, g));
        const auto synonyms = corpus::SynonymTable::from_edges(vocab, {{2, 3}, {4, 5}});
        const auto pairs = random_pairs(i % 3, len, vocab, classes, synonyms, g);

        train::FlatConfig cfg;
        cfg.use_masks = false;
        cfg.beta = 0.0;
        cfg.gamma = 0.0;
        auto noise = rng::make_rng(1);
        const double got = train::flat_objective(batch, pairs, net, inet, cfg, noise).values()[0];

        double want = 0.0;
        for (const auto& e : batch) want += ce_oracle(net, e.ids, e.label);
        want /= static_cast<double>(batch.size());
        if (!pairs.empty()) {
            double adv = 0.0;
            for (const auto& pr : pairs) adv += ce_oracle(net, pr.adv_ids, pr.original.label);
            want += adv / static_cast<double>(pairs.size());
        }
        worst = std::max(worst, std::abs(got - want));
    }
    c.seconds = sw.lap();
    c.pass = worst <= 1e-9 && c.seconds < 60.0;
    c.detail = "100 batches vs hand-rolled cross-entropy, max |diff| " + fmt(worst);
    return c;
}

// ---- 3. relaxed bernoulli sampling fidelity -------------------------------

Check check_relaxation() {
    Check c;
    Stopwatch sw;
    auto g = rng::make_rng(4242);
    const int n = 10000;
    bool rates_ok = true;
    double worst_pull = 0.0;  // |rate - p| in units of the 3-SE band
    long long inside = 0;
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        int above = 0;
        for (int i = 0; i < n; ++i) {
            const double s = masks::relaxed_bernoulli(p, 0.5, rng::gumbel(g), rng::gumbel(g));
            if (s > 0.5) ++above;
        }
        const double rate = static_cast<double>(above) / n;
        const double band = 3.0 * std::sqrt(p * (1.0 - p) / n);
        rates_ok = rates_ok && std::abs(rate - p) <= band;
        worst_pull = std::max(worst_pull, std::abs(rate - p) / band);
        // near-zero temperature: samples should concentrate at the endpoints
        for (int i = 0; i < n; ++i) {
            const double s = masks::relaxed_bernoulli(p, 0.01, rng::gumbel(g), rng::gumbel(g));
            if (s >= 0.1 && s <= 0.9) ++inside;
        }
    }
    const double outside = 1.0 - static_cast<double>(inside) / (5.0 * n);
    c.seconds = sw.lap();
    c.pass = rates_ok && outside >= 0.99 && c.seconds < 60.0;
    c.detail = "threshold rate within " + fmt(worst_pull) +
               " of the 3-SE band at tau=0.5; " + fmt(100.0 * outside) +
               "% of tau=0.01 samples outside [0.1,0.9]";
    return c;
}

// ---- 5. rank metrics vs brute-force oracles -------------------------------

double tau_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    const int n = static_cast<int>(a.size());
    long long s = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const int sa = a[i] < a[j] ? -1 : (a[i] > a[j] ? 1 : 0);
            const int sb = b[i] < b[j] ? -1 : (b[i] > b[j] ? 1 : 0);
            s += sa * sb;
        }
    auto tie_pairs = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        long long t = 0;
        size_t i = 0;
        while (i < v.size()) {
            size_t j = i;
            while (j < v.size() && v[j] == v[i]) ++j;
            const auto run = static_cast<long long>(j - i);
            t += run * (run - 1) / 2;
            i = j;
        }
        return t;
    };
    const long long n0 = static_cast<long long>(n) * (n - 1) / 2;
    const double denom = std::sqrt(static_cast<double>(n0 - tie_pairs(a)) *
                                   static_cast<double>(n0 - tie_pairs(b)));
    return denom == 0.0 ? 0.0 : static_cast<double>(s) / denom;
}

struct Dsu {
    std::vector<int> parent;
    explicit Dsu(int n) : parent(static_cast<size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) { return parent[static_cast<size_t>(x)] == x
                                 ? x
                                 : parent[static_cast<size_t>(x)] = find(parent[static_cast<size_t>(x)]); }
    void unite(int a, int b) { parent[static_cast<size_t>(find(a))] = find(b); }
};

double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

Check check_metric_oracles() {
    Check c;
    Stopwatch sw;
    auto g = rng::make_rng(3000);
    double worst_tau = 0.0, worst_topk = 0.0, worst_r = 0.0;

    for (int i = 0; i < 1000; ++i) {
        const int n = 2 + static_cast<int>(g() % 11);
        std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
        for (auto& v : a) v = i % 2 ? rng::uniform01(g) : static_cast<double>(g() % 4);
        for (auto& v : b) v = i % 2 ? rng::uniform01(g) : static_cast<double>(g() % 4);
        worst_tau = std::max(worst_tau,
                             std::abs(metrics::kendall_tau_values(a, b) - tau_oracle(a, b)));
    }

    for (int i = 0; i < 1000; ++i) {
        const int n = 1 + static_cast<int>(g() % 8);
        const int pad = static_cast<int>(g() % 3);
        const int vocab = 10;
        interpret::AttributionVector a, b;
        for (int j = 0; j < n; ++j) {
            const int ida = 2 + static_cast<int>(g() % (vocab - 2));
            const int idb = 2 + static_cast<int>(g() % (vocab - 2));
            a.token_ids.push_back(ida);
            b.token_ids.push_back(idb);
            // deliberate duplicates so the tie-by-position rule gets exercised
            a.attributions.push_back(g() % 3 == 0 && j > 0 ? a.attributions.back()
                                                           : rng::uniform01(g));
            b.attributions.push_back(g() % 3 == 0 && j > 0 ? b.attributions.back()
                                                           : rng::uniform01(g));
        }
        for (int j = 0; j < pad; ++j) {
            a.token_ids.push_back(corpus::Vocab::kPad);
            b.token_ids.push_back(corpus::Vocab::kPad);
            a.attributions.push_back(0.0);
            b.attributions.push_back(0.0);
        }
        std::vector<std::pair<int, int>> edges;
        for (int e = 0; e < static_cast<int>(g() % 4); ++e)
            edges.emplace_back(2 + static_cast<int>(g() % (vocab - 2)),
                               2 + static_cast<int>(g() % (vocab - 2)));
        const auto synonyms = corpus::SynonymTable::from_edges(vocab, edges);
        const int k = 1 + static_cast<int>(g() % static_cast<unsigned>(n));

        // independent union-find + stable top-k selection + multiset matching
        Dsu dsu(vocab);
        for (auto [x, y] : edges)
            if (x != y) dsu.unite(x, y);
        auto top_groups = [&](const interpret::AttributionVector& v) {
            std::vector<int> order(static_cast<size_t>(n));
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
                return v.attributions[static_cast<size_t>(x)] >
                       v.attributions[static_cast<size_t>(y)];
            });
            std::vector<int> groups;
            for (int j = 0; j < k; ++j)
                groups.push_back(dsu.find(v.token_ids[static_cast<size_t>(order[static_cast<size_t>(j)])]));
            std::sort(groups.begin(), groups.end());
            return groups;
        };
        const auto ga = top_groups(a), gb = top_groups(b);
        std::vector<int> common;
        std::set_intersection(ga.begin(), ga.end(), gb.begin(), gb.end(),
                              std::back_inserter(common));
        const double want = static_cast<double>(common.size()) / k;
        const double got = metrics::top_k_intersection(a, b, k, synonyms);
        worst_topk = std::max(worst_topk, std::abs(got - want));
    }

    for (int i = 0; i < 1000; ++i) {
        const int n = 2 + static_cast<int>(g() % 39);
        std::vector<double> x(static_cast<size_t>(n)), y(static_cast<size_t>(n));
        for (auto& v : x) v = rng::normal(g, 0.0, 2.0);
        for (auto& v : y) v = rng::normal(g, 0.0, 2.0);
        worst_r = std::max(worst_r, std::abs(metrics::pearson(x, y) - pearson_oracle(x, y)));
    }

    c.seconds = sw.lap();
    c.pass = worst_tau <= 1e-12 && worst_topk <= 1e-12 && worst_r <= 1e-12 && c.seconds < 60.0;
    c.detail = "1000 instances each: tau " + fmt(worst_tau) + ", top-k " + fmt(worst_topk) +
               ", pearson " + fmt(worst_r) + " max |diff|";
    return c;
}

// ---- the benchmark experiment shared by checks 4 and 6-11 -----------------

struct SeedOutcome {
    double dev_base = 0, flip_rate = 0;
    double aa_base = 0, aa_adv = 0, aa_star = 0, aa_b0 = 0, aa_0g = 0, aa_00 = 0;
    double aa_base_sal = 0, aa_star_sal = 0;
    double gap_star = 0, gap_b0 = 0;
    double tau_base = 0, tau_star = 0, top5_base = 0, top5_star = 0;
    double phi_neutral = 0, phi_keyword = 0;
};

struct Experiment {
    std::vector<SeedOutcome> seeds;
    train::TrainState base0, flat0;  // seed-0 models kept for the attribution check
    corpus::Dataset test;
    double seconds = 0.0;
};

Experiment run_experiment() {
    Experiment out;
    Stopwatch sw;

    synthetic::SyntheticConfig scfg;
    scfg.classes = 2;
    scfg.keywords_per_class = 5;
    scfg.synonyms_per_keyword = 2;
    scfg.neutral_words = 100;
    scfg.sentence_len = 12;
    scfg.train_size = 2000;
    scfg.dev_size = 400;
    scfg.test_size = 400;
    scfg.p_syn = 0.05;
    scfg.seed = 0;

    char tmpl[] = "/tmp/flat_acceptance_XXXXXX";
    const char* dir = mkdtemp(tmpl);
    if (!dir) throw std::runtime_error("mkdtemp failed");
    const auto files = synthetic::generate_synthetic(scfg, dir);

    std::vector<std::string> texts;
    {
        std::ifstream in(files.train);
        std::string line;
        while (std::getline(in, line)) {
            const auto t = line.find('\t');
            if (t != std::string::npos) texts.push_back(line.substr(t + 1));
        }
    }
    auto vocab = corpus::Vocab::build(texts, 1);
    for (int cl = 0; cl < scfg.classes; ++cl)
        for (int k = 0; k < scfg.keywords_per_class; ++k) {
            vocab.ensure(synthetic::keyword_name(cl, k));
            for (int s = 0; s < scfg.synonyms_per_keyword; ++s)
                vocab.ensure(synthetic::synonym_name(cl, k, s));
        }
    for (int i = 0; i < scfg.neutral_words; ++i) vocab.ensure(synthetic::neutral_name(i));

    const auto train_set =
        corpus::load_dataset(files.train, vocab, scfg.sentence_len, scfg.classes);
    const auto dev_set = corpus::load_dataset(files.dev, vocab, scfg.sentence_len, scfg.classes);
    out.test = corpus::load_dataset(files.test, vocab, scfg.sentence_len, scfg.classes);
    const auto synonyms = corpus::load_synonyms(files.synonyms, vocab);
    fs::remove_all(dir);

    std::vector<int> neutral_ids, keyword_ids;
    for (int i = 0; i < scfg.neutral_words; ++i) {
        const int id = vocab.id_for(synthetic::neutral_name(i));
        if (id != corpus::Vocab::kUnk) neutral_ids.push_back(id);
    }
    for (int cl = 0; cl < scfg.classes; ++cl)
        for (int k = 0; k < scfg.keywords_per_class; ++k) {
            const int id = vocab.id_for(synthetic::keyword_name(cl, k));
            if (id != corpus::Vocab::kUnk) keyword_ids.push_back(id);
        }

    const train::ModelDims dims{vocab.size(), 32, 32, scfg.classes, vocab.hash()};
    const attack::AttackConfig deletion;  // deletion-importance, budget 2000
    attack::AttackConfig saliency = deletion;
    saliency.kind = attack::AttackKind::saliency_weighted;

    auto aa_of = [&](const train::TrainState& st, const attack::AttackConfig& acfg) {
        auto view = train::deployed_view(st);
        return metrics::after_attack_accuracy(
            attack::attack_dataset(view, out.test, synonyms, acfg, 1));
    };
    auto consistency = [&](const train::TrainState& st, const corpus::Dataset& originals,
                           const corpus::Dataset& advs, const std::vector<int>& golds,
                           double& tau, double& top5) {
        interpret::IgConfig ig;
        ig.steps = 50;
        const auto gi = train::state_importance(st);
        const auto ao = interpret::attribute_dataset(st.net, &gi, originals, ig, 1);
        const auto aa = interpret::attribute_dataset(st.net, &gi, advs, ig, 1);
        std::vector<metrics::ConsistencyPair> cp(golds.size());
        for (size_t i = 0; i < golds.size(); ++i) cp[i] = {ao[i], aa[i], golds[i]};
        const auto rep = metrics::consistency_report(cp, {5}, synonyms, scfg.classes);
        tau = rep.tau_macro;
        top5 = rep.topk_macro[0];
    };

    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
        SeedOutcome so;
        train::FlatConfig tcfg;
        tcfg.lr = 0.2;
        tcfg.epochs_per_round = 3;
        tcfg.batch_size = 32;
        tcfg.rounds = 3;
        tcfg.tau = 0.5;
        tcfg.seed = seed;
        tcfg.attack_sample = 0;  // attack the full train split each round

        auto plain_cfg = tcfg;
        plain_cfg.use_masks = false;
        plain_cfg.beta = 0.0;
        plain_cfg.gamma = 0.0;

        std::cerr << "  [experiment] seed " << seed << ": clean baseline\n";
        auto base = train::train_base(train_set, dev_set, plain_cfg, dims);
        so.dev_base = base.history.back().dev_acc;

        std::vector<attack::AttackResult> base_attack;
        {
            auto view = train::deployed_view(base);
            attack::AttackSummary sum;
            base_attack = attack::attack_dataset(view, out.test, synonyms, deletion, 1, &sum);
            so.aa_base = metrics::after_attack_accuracy(base_attack);
            so.flip_rate = sum.total > sum.skipped
                               ? static_cast<double>(sum.successes) / (sum.total - sum.skipped)
                               : 0.0;
        }
        so.aa_base_sal = aa_of(base, saliency);

        std::cerr << "  [experiment] seed " << seed << ": adversarial retraining\n";
        auto adv =
            train::train_traditional_adv(train_set, dev_set, synonyms, deletion, plain_cfg, dims);
        so.aa_adv = aa_of(adv, deletion);

        auto flat_cell = [&](double beta, double gamma) {
            auto cfg = tcfg;
            cfg.use_masks = true;
            cfg.beta = beta;
            cfg.gamma = gamma;
            return train::train_flat(train_set, dev_set, synonyms, deletion, cfg, dims);
        };
        std::cerr << "  [experiment] seed " << seed << ": masked grid\n";
        auto star = flat_cell(0.1, 0.001);
        auto b0 = flat_cell(0.1, 0.0);
        auto zg = flat_cell(0.0, 0.001);
        auto zz = flat_cell(0.0, 0.0);
        so.aa_star = aa_of(star, deletion);
        so.aa_b0 = aa_of(b0, deletion);
        so.aa_0g = aa_of(zg, deletion);
        so.aa_00 = aa_of(zz, deletion);
        so.aa_star_sal = aa_of(star, saliency);

        so.gap_star = train::mean_phi_gap(train::state_importance(star), synonyms);
        so.gap_b0 = train::mean_phi_gap(train::state_importance(b0), synonyms);

        // attribution agreement on the sentence pairs the baseline attack flipped
        corpus::Dataset originals, advs;
        std::vector<int> golds;
        for (size_t i = 0; i < base_attack.size(); ++i) {
            if (!base_attack[i].success || !base_attack[i].pair) continue;
            originals.push_back(out.test[i]);
            corpus::Example adv_ex;
            adv_ex.ids = base_attack[i].pair->adv_ids;
            adv_ex.label = out.test[i].label;
            advs.push_back(std::move(adv_ex));
            golds.push_back(out.test[i].label);
        }
        std::cerr << "  [experiment] seed " << seed << ": attribution over " << golds.size()
                  << " flipped pairs\n";
        consistency(base, originals, advs, golds, so.tau_base, so.top5_base);
        consistency(star, originals, advs, golds, so.tau_star, so.top5_star);

        const auto phi = train::state_importance(star);
        auto median_phi = [&](const std::vector<int>& ids) {
            std::vector<double> v;
            for (int id : ids) v.push_back(phi(id));
            return median(std::move(v));
        };
        so.phi_neutral = median_phi(neutral_ids);
        so.phi_keyword = median_phi(keyword_ids);

        if (seed == 0) {
            out.base0 = base;
            out.flat0 = star;
        }
        out.seeds.push_back(so);
    }
    out.seconds = sw.lap();
    return out;
}

template <typename F>
std::vector<double> per_seed(const Experiment& ex, F&& get) {
    std::vector<double> v;
    for (const auto& s : ex.seeds) v.push_back(get(s));
    return v;
}

// ---- 4. integrated gradients: completeness and linear exactness -----------

Check check_attribution(const Experiment& ex) {
    Check c;
    Stopwatch sw;

    interpret::IgConfig cfg;
    cfg.steps = 100;
    const auto phi = train::state_importance(ex.flat0);
    double worst_rel = 0.0;
    // attribution of the deployed predictor: importance-scaled embeddings
    for (int i = 0; i < 50; ++i) {
        const auto& exm = ex.test[static_cast<size_t>(i)];
        const auto& net = ex.flat0.net;
        const auto av = interpret::integrated_gradients(net, phi, exm.ids, cfg);
        const double f_in = model::predict_with_importance(net, phi, exm.ids)
                                .logits[static_cast<size_t>(av.target_class)];
        double f_zero;
        {
            ad::NoTapeScope quiet;
            const auto z = ad::Tensor::zeros({static_cast<int>(exm.ids.size()), net.dim});
            f_zero = net.logits_from_embeddings(z).values()[static_cast<size_t>(av.target_class)];
        }
        const double rel = av.completeness_residual / std::max(std::abs(f_in - f_zero), 1e-9);
        worst_rel = std::max(worst_rel, rel);
    }

    // a linear head is attributed exactly: weight * input, at any step count
    double worst_lin = 0.0;
    for (int t = 0; t < 20; ++t) {
        auto g = rng::make_rng(5000 + static_cast<std::uint64_t>(t));
        const int n = 3 + static_cast<int>(g() % 4);
        const int d = 2 + static_cast<int>(g() % 3);
        const int cls = 2 + static_cast<int>(g() % 2);
        auto w = ad::Tensor::zeros({d, cls});
        for (auto& v : w.values_mut()) v = rng::normal(g, 0.0, 1.0);
        auto b = ad::Tensor::zeros({cls});
        for (auto& v : b.values_mut()) v = rng::normal(g, 0.0, 1.0);
        const auto ones = ad::Tensor::full({1, n}, 1.0);
        auto x = ad::Tensor::zeros({n, d});
        for (auto& v : x.values_mut()) v = rng::normal(g, 0.0, 1.0);
        const int target = static_cast<int>(g() % static_cast<unsigned>(cls));
        auto linear = [&](const ad::Tensor& input) {
            return ad::add(ad::matmul(ones, ad::matmul(input, w)), b);
        };
        const auto av = interpret::integrated_gradients_fn(linear, x, target, 5);
        for (int i = 0; i < n; ++i) {
            double want = 0.0;
            for (int j = 0; j < d; ++j)
                want += x.values()[static_cast<size_t>(i * d + j)] *
                        w.values()[static_cast<size_t>(j * cls + target)];
            worst_lin = std::max(worst_lin,
                                 std::abs(av.attributions[static_cast<size_t>(i)] - want));
        }
        worst_lin = std::max(worst_lin, av.completeness_residual);
    }

    c.seconds = sw.lap();
    c.pass = worst_rel <= 0.01 && worst_lin <= 1e-9 && c.seconds < 60.0;
    c.detail = "50 deployed-model inputs: max completeness residual " + fmt(100.0 * worst_rel) +
               "% of the logit gap at 100 steps; linear attribution off by " + fmt(worst_lin);
    return c;
}

// ---- 6-11: reductions over the experiment ---------------------------------

Check check_robustness(const Experiment& ex) {
    Check c;
    bool dev_ok = true, flip_ok = true;
    for (const auto& s : ex.seeds) {
        dev_ok = dev_ok && s.dev_base >= 0.90;
        flip_ok = flip_ok && s.flip_rate >= 0.40;
    }
    const double base = median(per_seed(ex, [](const SeedOutcome& s) { return s.aa_base; }));
    const double adv = median(per_seed(ex, [](const SeedOutcome& s) { return s.aa_adv; }));
    const double star = median(per_seed(ex, [](const SeedOutcome& s) { return s.aa_star; }));
    c.pass = dev_ok && flip_ok && star + 1e-12 >= base + 0.20 && star + 1e-12 >= adv &&
             ex.seconds < 900.0;
    std::ostringstream d;
    d << "median after-attack acc masked " << fmt(star) << " vs adv " << fmt(adv) << " vs base "
      << fmt(base) << "; every seed: dev>=0.9 " << (dev_ok ? "yes" : "NO") << ", flip>=40% "
      << (flip_ok ? "yes" : "NO") << "; experiment took " << fmt(ex.seconds) << "s";
    c.detail = d.str();
    c.seconds = ex.seconds;
    return c;
}

Check check_consistency(const Experiment& ex) {
    Check c;
    const double dtau =
        median(per_seed(ex, [](const SeedOutcome& s) { return s.tau_star - s.tau_base; }));
    const double dtop =
        median(per_seed(ex, [](const SeedOutcome& s) { return s.top5_star - s.top5_base; }));
    c.pass = dtau >= 0.05 && dtop >= 0.05;
    c.detail = "median advantage on flipped pairs: kendall tau +" + fmt(dtau) + ", top-5 +" +
               fmt(dtop) + " (bar 0.05)";
    return c;
}

Check check_gap(const Experiment& ex) {
    Check c;
    const double with = median(per_seed(ex, [](const SeedOutcome& s) { return s.gap_star; }));
    const double without = median(per_seed(ex, [](const SeedOutcome& s) { return s.gap_b0; }));
    c.pass = with < without;
    c.detail = "median synonym |phi| gap " + fmt(with) + " with the pair regularizer vs " +
               fmt(without) + " without";
    return c;
}

Check check_ablation(const Experiment& ex) {
    Check c;
    const double star = median(per_seed(ex, [](const SeedOutcome& s) { return s.aa_star; }));
    const double b0 = median(per_seed(ex, [](const SeedOutcome& s) { return s.aa_b0; }));
    const double zg = median(per_seed(ex, [](const SeedOutcome& s) { return s.aa_0g; }));
    const double zz = median(per_seed(ex, [](const SeedOutcome& s) { return s.aa_00; }));
    const double adv = median(per_seed(ex, [](const SeedOutcome& s) { return s.aa_adv; }));
    const bool top = star + 1e-12 >= b0 && star + 1e-12 >= zg && star + 1e-12 >= zz;
    const bool near = std::abs(zz - adv) <= 0.02 + 1e-12;
    c.pass = top && near;
    std::ostringstream d;
    d << "grid medians (beta,gamma): full " << fmt(star) << ", beta-only " << fmt(b0)
      << ", gamma-only " << fmt(zg) << ", neither " << fmt(zz) << "; |neither - adv| = "
      << fmt(std::abs(zz - adv));
    c.detail = d.str();
    return c;
}

Check check_transfer(const Experiment& ex) {
    Check c;
    const double base = median(per_seed(ex, [](const SeedOutcome& s) { return s.aa_base_sal; }));
    const double star = median(per_seed(ex, [](const SeedOutcome& s) { return s.aa_star_sal; }));
    c.pass = star + 1e-12 >= base;
    c.detail = "median after-attack acc under the unseen saliency attack: masked " + fmt(star) +
               " vs base " + fmt(base);
    return c;
}

Check check_phi_shape(const Experiment& ex) {
    Check c;
    const double neutral =
        median(per_seed(ex, [](const SeedOutcome& s) { return s.phi_neutral; }));
    const double keyword =
        median(per_seed(ex, [](const SeedOutcome& s) { return s.phi_keyword; }));
    c.pass = neutral >= 0.35 && neutral <= 0.65 && keyword + 1e-12 >= neutral + 0.15;
    c.detail = "median phi: neutral filler " + fmt(neutral) + " (needs [0.35,0.65]), keywords " +
               fmt(keyword) + " (needs neutral+0.15)";
    return c;
}

}  // namespace

int main() {
    std::vector<std::pair<std::string, Check>> gates(11);
    std::cerr << "[acceptance] property checks\n";
    gates[0] = {"gradients match central finite differences", check_gradients()};
    gates[1] = {"masked objective degrades to plain adversarial cross-entropy",
                check_plain_objective()};
    gates[2] = {"relaxed bernoulli sampling is faithful and sharpens", check_relaxation()};
    gates[4] = {"rank metrics match brute-force oracles", check_metric_oracles()};

    std::cerr << "[acceptance] benchmark experiment (18 models, 3 seeds)\n";
    const auto ex = run_experiment();
    gates[3] = {"integrated gradients: completeness and linear exactness", check_attribution(ex)};
    gates[5] = {"robustness ordering masked >= adversarial > clean", check_robustness(ex)};
    gates[6] = {"interpretations stay more consistent under attack", check_consistency(ex)};
    gates[7] = {"synonym importance gap shrinks under the pair regularizer", check_gap(ex)};
    gates[8] = {"regularizer ablation grid keeps the full cell on top", check_ablation(ex)};
    gates[9] = {"robustness transfers to an unseen attack", check_transfer(ex)};
    gates[10] = {"importance separates planted keywords from filler", check_phi_shape(ex)};

    int failed = 0;
    for (size_t i = 0; i < gates.size(); ++i) {
        const auto& [name, chk] = gates[i];
        if (!chk.pass) ++failed;
        std::printf("[%s] %2zu. %s: %s (%.1fs)\n", chk.pass ? "PASS" : "FAIL", i + 1, name.c_str(),
                    chk.detail.c_str(), chk.seconds);
    }
    std::printf("%d/11 checks passed\n", 11 - failed);
    return failed;
}
