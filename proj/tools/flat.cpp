// Command-line front end: every run is a subcommand whose inputs come from
// flags or a --config file (flags win), whose outputs land in --out, and
// whose resolved configuration is dumped next to them.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "flat/attack.hpp"
#include "flat/corpus.hpp"
#include "flat/interpret.hpp"
#include "flat/metrics.hpp"
#include "flat/model.hpp"
#include "flat/synthetic.hpp"
#include "flat/train.hpp"

namespace fs = std::filesystem;
using namespace flat;

namespace {

// one bag of option storage; a single subcommand runs per process, so
// sharing the bag across all of them is safe
struct Cli {
    std::string out;
    std::string train_path, dev_path, test_path, data_path;
    std::string vocab_path, synonyms_path, ckpt_path, adv_dump;
    int max_len = 12;
    int num_classes = 2;
    int dim = 32;
    int filters = 32;
    int clusters = 8;
    int jobs = 1;
    int limit = 0;  // 0 = whole dataset
    train::FlatConfig tcfg;
    attack::AttackConfig acfg;
    std::string attack_kind = "deletion_importance";
    interpret::IgConfig igcfg;
    std::string ig_target = "predicted";
    std::vector<int> ks = {1, 5, 10};
    synthetic::SyntheticConfig scfg;
};

void write_resolved_config(CLI::App& root, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream f(out_dir + "/config.resolved.toml");
    f << root.config_to_str(true, true);
}

int check_artifacts(const std::vector<std::string>& paths) {
    for (const auto& p : paths)
        if (!fs::exists(p)) {
            std::cerr << "error: expected artifact was not written: " << p << "\n";
            return 1;
        }
    return 0;
}

std::vector<std::string> tsv_texts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::string> texts;
    std::string line;
    long long n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(n) + ": expected label<TAB>text");
        texts.push_back(line.substr(tab + 1));
    }
    return texts;
}

// pull every surface form out of a synonym lexicon so each gets a vocabulary
// id (and with it an embedding row) even when the training text never used it
void ensure_lexicon_words(corpus::Vocab& vocab, const std::string& synonyms_path) {
    std::ifstream in(synonyms_path);
    if (!in) throw std::runtime_error("cannot open " + synonyms_path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) continue;  // load_synonyms validates properly later
        vocab.ensure(line.substr(0, tab));
        std::stringstream rest(line.substr(tab + 1));
        std::string syn;
        while (std::getline(rest, syn, ','))
            if (!syn.empty()) vocab.ensure(syn);
    }
}

attack::AttackConfig resolve_attack(const Cli& c) {
    attack::AttackConfig a = c.acfg;
    a.kind = c.attack_kind == "saliency_weighted" ? attack::AttackKind::saliency_weighted
                                                  : attack::AttackKind::deletion_importance;
    a.validate();
    return a;
}

interpret::IgConfig resolve_ig(const Cli& c) {
    interpret::IgConfig ig = c.igcfg;
    ig.target = c.ig_target == "gold" ? interpret::IgTarget::gold : interpret::IgTarget::predicted;
    return ig;
}

corpus::Dataset maybe_limit(corpus::Dataset data, int limit) {
    if (limit > 0 && static_cast<size_t>(limit) < data.size())
        data.resize(static_cast<size_t>(limit));
    return data;
}

struct LoadedRun {
    corpus::Vocab vocab;
    train::TrainState state;
};

LoadedRun load_run(const Cli& c) {
    LoadedRun run;
    run.vocab = corpus::Vocab::load(c.vocab_path);
    // hash mismatch throws: a checkpoint never deploys against foreign ids
    run.state = train::from_checkpoint(model::load_checkpoint(c.ckpt_path, run.vocab.hash()));
    return run;
}

nlohmann::json summary_json(const attack::AttackSummary& s,
                            const std::vector<attack::AttackResult>& results) {
    return nlohmann::json{{"total", s.total},
                         {"successes", s.successes},
                         {"failures", s.failures},
                         {"skipped", s.skipped},
                         {"clean_accuracy", metrics::clean_accuracy(results)},
                         {"after_attack_accuracy", metrics::after_attack_accuracy(results)}};
}

// ---- option wiring shared by several subcommands ----

void add_out_opt(CLI::App* s, Cli& c) {
    s->add_option("--out", c.out, "output directory (created if needed)")
        ->envname("FLAT_OUT")
        ->required();
}

void add_corpus_opts(CLI::App* s, Cli& c, bool need_dev) {
    s->add_option("--train", c.train_path, "training TSV (label<TAB>text)")
        ->required()
        ->check(CLI::ExistingFile);
    auto* dev = s->add_option("--dev", c.dev_path, "dev TSV")->check(CLI::ExistingFile);
    if (need_dev) dev->required();
    s->add_option("--vocab", c.vocab_path, "vocabulary TSV from gen-data")
        ->required()
        ->check(CLI::ExistingFile);
    s->add_option("--max-len", c.max_len, "pad/truncate length")->capture_default_str();
    s->add_option("--classes", c.num_classes, "number of labels")->capture_default_str();
}

void add_model_opts(CLI::App* s, Cli& c) {
    s->add_option("--dim", c.dim, "embedding width")->capture_default_str();
    s->add_option("--filters", c.filters, "conv filters per width")->capture_default_str();
}

void add_sgd_opts(CLI::App* s, Cli& c) {
    s->add_option("--lr", c.tcfg.lr, "SGD learning rate")->capture_default_str();
    s->add_option("--clip-norm", c.tcfg.clip_norm, "global gradient norm cap; <=0 disables")
        ->capture_default_str();
    s->add_option("--epochs", c.tcfg.epochs_per_round, "epochs per training phase")
        ->capture_default_str();
    s->add_option("--batch-size", c.tcfg.batch_size, "minibatch size")->capture_default_str();
    s->add_option("--seed", c.tcfg.seed, "root random seed")->capture_default_str();
}

void add_mask_opts(CLI::App* s, Cli& c) {
    s->add_option("--beta", c.tcfg.beta, "entropy regularizer weight")->capture_default_str();
    s->add_option("--gamma", c.tcfg.gamma, "importance regularizer weight")->capture_default_str();
    s->add_option("--tau", c.tcfg.tau, "mask sampling temperature")->capture_default_str();
}

void add_attack_opts(CLI::App* s, Cli& c) {
    s->add_option("--attack-kind", c.attack_kind, "attack strategy")
        ->transform(CLI::IsMember({"deletion_importance", "saliency_weighted"}))
        ->capture_default_str();
    s->add_option("--ratio", c.acfg.max_sub_ratio, "max substituted fraction of real tokens")
        ->capture_default_str();
    s->add_option("--candidates", c.acfg.max_candidates, "synonym candidates per position")
        ->capture_default_str();
    s->add_option("--budget", c.acfg.query_budget, "model queries per example")
        ->capture_default_str();
}

void add_round_opts(CLI::App* s, Cli& c) {
    s->add_option("--rounds", c.tcfg.rounds, "attack/train rounds after the clean one")
        ->capture_default_str();
    s->add_option("--attack-sample", c.tcfg.attack_sample,
                  "training examples attacked per round; 0 = all")
        ->capture_default_str();
}

void add_jobs_opt(CLI::App* s, Cli& c) {
    s->add_option("--jobs", c.jobs, "worker threads")->capture_default_str();
}

void add_ckpt_data_opts(CLI::App* s, Cli& c) {
    s->add_option("--ckpt", c.ckpt_path, "model checkpoint")->required()->check(CLI::ExistingFile);
    s->add_option("--data", c.data_path, "evaluation TSV")->required()->check(CLI::ExistingFile);
    s->add_option("--vocab", c.vocab_path, "vocabulary TSV")->required()->check(CLI::ExistingFile);
    s->add_option("--max-len", c.max_len, "pad/truncate length")->capture_default_str();
    s->add_option("--classes", c.num_classes, "number of labels")->capture_default_str();
    s->add_option("--limit", c.limit, "evaluate only the first N examples; 0 = all")
        ->capture_default_str();
}

// ---- subcommand bodies ----

int run_gen_data(CLI::App& root, Cli& c) {
    write_resolved_config(root, c.out);
    const auto files = synthetic::generate_synthetic(c.scfg, c.out);

    auto vocab = corpus::Vocab::build(tsv_texts(files.train), 1);
    ensure_lexicon_words(vocab, files.synonyms);
    const auto vocab_file = c.out + "/vocab.tsv";
    vocab.save(vocab_file);

    std::cout << "wrote " << files.train << " (+dev/test), " << files.synonyms << ", "
              << files.meta << ", " << vocab_file << "\n";
    return check_artifacts({files.train, files.dev, files.test, files.synonyms, files.meta,
                            vocab_file, c.out + "/config.resolved.toml"});
}

int run_train_base(CLI::App& root, Cli& c) {
    write_resolved_config(root, c.out);
    const auto vocab = corpus::Vocab::load(c.vocab_path);
    const auto train_set = corpus::load_dataset(c.train_path, vocab, c.max_len, c.num_classes);
    const auto dev_set = corpus::load_dataset(c.dev_path, vocab, c.max_len, c.num_classes);
    train::ModelDims dims{vocab.size(), c.dim, c.filters, c.num_classes, vocab.hash()};

    auto state = train::train_base(train_set, dev_set, c.tcfg, dims, c.out);
    std::cout << "dev accuracy " << state.history.back().dev_acc << "\n";
    return check_artifacts({c.out + "/metrics.jsonl", c.out + "/round_0.ckpt"});
}

int run_train_attacked(CLI::App& root, Cli& c, bool masked) {
    write_resolved_config(root, c.out);
    auto vocab = corpus::Vocab::load(c.vocab_path);
    const auto train_set = corpus::load_dataset(c.train_path, vocab, c.max_len, c.num_classes);
    const auto dev_set = corpus::load_dataset(c.dev_path, vocab, c.max_len, c.num_classes);
    const auto synonyms = corpus::load_synonyms(c.synonyms_path, vocab);
    const auto acfg = resolve_attack(c);
    train::ModelDims dims{vocab.size(), c.dim, c.filters, c.num_classes, vocab.hash()};

    auto state = masked ? train::train_flat(train_set, dev_set, synonyms, acfg, c.tcfg, dims,
                                            c.out, c.jobs, &vocab)
                        : train::train_traditional_adv(train_set, dev_set, synonyms, acfg, c.tcfg,
                                                       dims, c.out, c.jobs, &vocab);
    const auto& last = state.history.back();
    std::cout << "dev accuracy " << last.dev_acc << ", after-attack "
              << (last.after_attack_acc ? std::to_string(*last.after_attack_acc) : "n/a")
              << ", adversarial pool " << state.dprime.size() << "\n";

    std::vector<std::string> artifacts = {c.out + "/metrics.jsonl"};
    for (int r = 0; r <= c.tcfg.rounds; ++r)
        artifacts.push_back(c.out + "/round_" + std::to_string(r) + ".ckpt");
    for (int r = 1; r <= c.tcfg.rounds; ++r)
        artifacts.push_back(c.out + "/adv_round_" + std::to_string(r) + ".jsonl");
    return check_artifacts(artifacts);
}

int run_train_groupmask(CLI::App& root, Cli& c) {
    write_resolved_config(root, c.out);
    const auto vocab = corpus::Vocab::load(c.vocab_path);
    const auto train_set = corpus::load_dataset(c.train_path, vocab, c.max_len, c.num_classes);
    const auto dev_set = corpus::load_dataset(c.dev_path, vocab, c.max_len, c.num_classes);
    train::ModelDims dims{vocab.size(), c.dim, c.filters, c.num_classes, vocab.hash()};

    auto state = train::train_group_mask(train_set, dev_set, c.clusters, c.tcfg, dims, c.out);
    std::cout << "dev accuracy " << state.history.back().dev_acc << "\n";
    return check_artifacts({c.out + "/metrics.jsonl", c.out + "/round_0.ckpt"});
}

int run_attack(CLI::App& root, Cli& c) {
    write_resolved_config(root, c.out);
    auto run = load_run(c);
    const auto data =
        maybe_limit(corpus::load_dataset(c.data_path, run.vocab, c.max_len, c.num_classes), c.limit);
    const auto synonyms = corpus::load_synonyms(c.synonyms_path, run.vocab);
    const auto acfg = resolve_attack(c);

    attack::AttackSummary summary;
    auto view = train::deployed_view(run.state);
    const auto results = attack::attack_dataset(view, data, synonyms, acfg, c.jobs, &summary);

    const auto dump = c.out + "/attacks.jsonl";
    attack::dump_attack_results(dump, data, results, run.vocab);
    const auto sj = summary_json(summary, results);
    std::ofstream(c.out + "/attack_summary.json") << sj.dump(2) << "\n";
    std::cout << sj.dump(2) << "\n";
    return check_artifacts({dump, c.out + "/attack_summary.json"});
}

int run_interpret(CLI::App& root, Cli& c) {
    write_resolved_config(root, c.out);
    auto run = load_run(c);
    const auto data =
        maybe_limit(corpus::load_dataset(c.data_path, run.vocab, c.max_len, c.num_classes), c.limit);
    const auto gi = train::state_importance(run.state);

    const auto attributions =
        interpret::attribute_dataset(run.state.net, &gi, data, resolve_ig(c), c.jobs);
    const auto dump = c.out + "/attributions.jsonl";
    interpret::dump_attributions(dump, data, attributions, run.vocab);

    double worst = 0.0;
    for (const auto& a : attributions) worst = std::max(worst, a.completeness_residual);
    std::cout << "attributed " << attributions.size() << " examples, max residual " << worst
              << "\n";
    return check_artifacts({dump});
}

int run_evaluate(CLI::App& root, Cli& c) {
    write_resolved_config(root, c.out);
    auto run = load_run(c);
    const auto data =
        maybe_limit(corpus::load_dataset(c.data_path, run.vocab, c.max_len, c.num_classes), c.limit);
    const auto synonyms = corpus::load_synonyms(c.synonyms_path, run.vocab);
    const auto acfg = resolve_attack(c);

    attack::AttackSummary summary;
    auto view = train::deployed_view(run.state);
    const auto results = attack::attack_dataset(view, data, synonyms, acfg, c.jobs, &summary);
    attack::dump_attack_results(c.out + "/attacks.jsonl", data, results, run.vocab);

    // interpretation consistency over the sentence pairs the attack actually flipped
    corpus::Dataset originals, adversaries;
    std::vector<int> golds;
    for (size_t i = 0; i < results.size(); ++i) {
        if (!results[i].success || !results[i].pair) continue;
        originals.push_back(data[i]);
        corpus::Example adv;
        adv.ids = results[i].pair->adv_ids;
        adv.label = data[i].label;
        adversaries.push_back(std::move(adv));
        golds.push_back(data[i].label);
    }
    // both sides attributed under the deployed rule (phi-scaled embeddings)
    const auto ig = resolve_ig(c);
    const auto gi = train::state_importance(run.state);
    const auto attr_orig = interpret::attribute_dataset(run.state.net, &gi, originals, ig, c.jobs);
    const auto attr_adv = interpret::attribute_dataset(run.state.net, &gi, adversaries, ig, c.jobs);

    std::vector<metrics::ConsistencyPair> cpairs(golds.size());
    for (size_t i = 0; i < golds.size(); ++i)
        cpairs[i] = {attr_orig[i], attr_adv[i], golds[i]};
    const auto report =
        metrics::consistency_report(cpairs, c.ks, synonyms, run.state.net.num_classes);
    metrics::write_topk_curve(c.out + "/topk_curve.tsv", report);

    nlohmann::json rj = summary_json(summary, results);
    rj["pairs"] = cpairs.size();
    rj["ks"] = report.ks;
    rj["tau_macro"] = report.tau_macro;
    rj["topk_macro"] = report.topk_macro;
    rj["empty_classes"] = report.empty_classes;
    auto& per = rj["per_class"] = nlohmann::json::object();
    for (const auto& [cls, tau] : report.tau_per_class) {
        per[std::to_string(cls)] = {{"tau", tau},
                                    {"topk", report.topk_per_class.at(cls)},
                                    {"pairs", report.pairs_per_class.at(cls)}};
    }
    std::ofstream(c.out + "/consistency.json") << rj.dump(2) << "\n";
    std::cout << rj.dump(2) << "\n";
    return check_artifacts(
        {c.out + "/attacks.jsonl", c.out + "/consistency.json", c.out + "/topk_curve.tsv"});
}

int run_ablate(CLI::App& root, Cli& c) {
    write_resolved_config(root, c.out);
    auto vocab = corpus::Vocab::load(c.vocab_path);
    const auto train_set = corpus::load_dataset(c.train_path, vocab, c.max_len, c.num_classes);
    const auto dev_set = corpus::load_dataset(c.dev_path, vocab, c.max_len, c.num_classes);
    const auto test_set = corpus::load_dataset(c.test_path, vocab, c.max_len, c.num_classes);
    const auto synonyms = corpus::load_synonyms(c.synonyms_path, vocab);
    const auto acfg = resolve_attack(c);
    train::ModelDims dims{vocab.size(), c.dim, c.filters, c.num_classes, vocab.hash()};

    const double beta_star = c.tcfg.beta, gamma_star = c.tcfg.gamma;
    const std::vector<std::pair<double, double>> grid = {
        {beta_star, gamma_star}, {beta_star, 0.0}, {0.0, gamma_star}, {0.0, 0.0}};

    nlohmann::json rows = nlohmann::json::array();
    std::cout << std::left << std::setw(10) << "beta" << std::setw(10) << "gamma" << std::setw(12)
              << "test_acc" << std::setw(14) << "after_attack" << "\n";
    for (const auto& [beta, gamma] : grid) {
        auto cell_cfg = c.tcfg;
        cell_cfg.beta = beta;
        cell_cfg.gamma = gamma;
        const std::string cell_dir = c.out + "/cell_b" + (beta > 0 ? "star" : "0") + "_g" +
                                     (gamma > 0 ? "star" : "0");
        auto state = train::train_flat(train_set, dev_set, synonyms, acfg, cell_cfg, dims,
                                       cell_dir, c.jobs, &vocab);

        const double test_acc = train::dataset_accuracy(state, test_set);
        auto view = train::deployed_view(state);
        const auto results = attack::attack_dataset(view, test_set, synonyms, acfg, c.jobs);
        const double aa = metrics::after_attack_accuracy(results);

        rows.push_back({{"beta", beta},
                        {"gamma", gamma},
                        {"dev_acc", state.history.back().dev_acc},
                        {"test_acc", test_acc},
                        {"after_attack_acc", aa}});
        std::cout << std::left << std::setw(10) << beta << std::setw(10) << gamma << std::setw(12)
                  << test_acc << std::setw(14) << aa << "\n";
    }

    std::ofstream(c.out + "/ablation.json")
        << nlohmann::json{{"beta_star", beta_star}, {"gamma_star", gamma_star}, {"rows", rows}}
               .dump(2)
        << "\n";
    return check_artifacts({c.out + "/ablation.json"});
}

int run_export_importance(CLI::App& root, Cli& c) {
    write_resolved_config(root, c.out);
    auto vocab = corpus::Vocab::load(c.vocab_path);
    const auto ckpt = model::load_checkpoint(c.ckpt_path, vocab.hash());
    const auto state = train::from_checkpoint(ckpt);
    const auto gi = train::state_importance(state);

    // substitution counts come from an attack dump when one is supplied;
    // only the substitution lists are rebuilt — that is all the counting needs
    std::vector<corpus::AdversarialPair> dprime;
    if (!c.adv_dump.empty()) {
        std::ifstream in(c.adv_dump);
        if (!in) throw std::runtime_error("cannot open " + c.adv_dump);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            if (!j.value("success", false)) continue;
            corpus::AdversarialPair p;
            for (const auto& s : j.at("subs"))
                p.subs.push_back({s.at(0).get<int>(), vocab.id_for(s.at(1).get<std::string>()),
                                  vocab.id_for(s.at(2).get<std::string>())});
            dprime.push_back(std::move(p));
        }
    }

    const auto wc = metrics::correlation_analysis(gi, vocab, dprime);
    const auto series = c.out + "/importance.tsv";
    metrics::write_correlation_series(series, wc, vocab);

    nlohmann::json stats{{"words", wc.word_ids.size()},
                         {"r_importance_trainfreq",
                          wc.r_wi_wf ? nlohmann::json(*wc.r_wi_wf) : nlohmann::json()},
                         {"r_importance_subfreq",
                          wc.r_wi_sf ? nlohmann::json(*wc.r_wi_sf) : nlohmann::json()},
                         {"r_trainfreq_subfreq",
                          wc.r_wf_sf ? nlohmann::json(*wc.r_wf_sf) : nlohmann::json()}};
    std::ofstream(c.out + "/importance_stats.json") << stats.dump(2) << "\n";
    std::cout << stats.dump(2) << "\n";
    return check_artifacts({series, c.out + "/importance_stats.json"});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feature-level adversarial training toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // lets --config appear after the subcommand name
    app.set_config("--config", "", "key=value file; [subcommand] sections; flags override");
    Cli c;

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic keyword benchmark");
    add_out_opt(gen, c);
    gen->add_option("--classes", c.scfg.classes)->capture_default_str();
    gen->add_option("--keywords", c.scfg.keywords_per_class)->capture_default_str();
    gen->add_option("--synonyms-per-keyword", c.scfg.synonyms_per_keyword)->capture_default_str();
    gen->add_option("--neutral", c.scfg.neutral_words)->capture_default_str();
    gen->add_option("--len", c.scfg.sentence_len)->capture_default_str();
    gen->add_option("--train-size", c.scfg.train_size)->capture_default_str();
    gen->add_option("--dev-size", c.scfg.dev_size)->capture_default_str();
    gen->add_option("--test-size", c.scfg.test_size)->capture_default_str();
    gen->add_option("--p-syn", c.scfg.p_syn, "train-only synonym surfacing rate")
        ->capture_default_str();
    gen->add_option("--min-keywords", c.scfg.min_keywords)->capture_default_str();
    gen->add_option("--max-keywords", c.scfg.max_keywords)->capture_default_str();
    gen->add_option("--seed", c.scfg.seed)->capture_default_str();

    auto* tbase = app.add_subcommand("train-base", "train the plain classifier");
    add_out_opt(tbase, c);
    add_corpus_opts(tbase, c, true);
    add_model_opts(tbase, c);
    add_sgd_opts(tbase, c);

    auto* tflat = app.add_subcommand("train-flat", "masked training with attack augmentation");
    add_out_opt(tflat, c);
    add_corpus_opts(tflat, c, true);
    tflat->add_option("--synonyms", c.synonyms_path)->required()->check(CLI::ExistingFile);
    add_model_opts(tflat, c);
    add_sgd_opts(tflat, c);
    add_mask_opts(tflat, c);
    add_round_opts(tflat, c);
    add_attack_opts(tflat, c);
    add_jobs_opt(tflat, c);

    auto* tadv = app.add_subcommand("train-adv",
                                    "adversarial-augmentation training without masks");
    add_out_opt(tadv, c);
    add_corpus_opts(tadv, c, true);
    tadv->add_option("--synonyms", c.synonyms_path)->required()->check(CLI::ExistingFile);
    add_model_opts(tadv, c);
    add_sgd_opts(tadv, c);
    add_round_opts(tadv, c);
    add_attack_opts(tadv, c);
    add_jobs_opt(tadv, c);

    auto* tgroup = app.add_subcommand("train-groupmask",
                                      "baseline with one learned scale per word cluster");
    add_out_opt(tgroup, c);
    add_corpus_opts(tgroup, c, true);
    add_model_opts(tgroup, c);
    add_sgd_opts(tgroup, c);
    tgroup->add_option("--clusters", c.clusters)->capture_default_str();

    auto* atk = app.add_subcommand("attack", "attack a trained checkpoint");
    add_out_opt(atk, c);
    add_ckpt_data_opts(atk, c);
    atk->add_option("--synonyms", c.synonyms_path)->required()->check(CLI::ExistingFile);
    add_attack_opts(atk, c);
    add_jobs_opt(atk, c);

    auto* interp = app.add_subcommand("interpret", "integrated-gradients attributions");
    add_out_opt(interp, c);
    add_ckpt_data_opts(interp, c);
    interp->add_option("--steps", c.igcfg.steps)->capture_default_str();
    interp->add_option("--target", c.ig_target)
        ->transform(CLI::IsMember({"predicted", "gold"}))
        ->capture_default_str();
    add_jobs_opt(interp, c);

    auto* eval = app.add_subcommand("evaluate",
                                    "attack, attribute the flipped pairs, report consistency");
    add_out_opt(eval, c);
    add_ckpt_data_opts(eval, c);
    eval->add_option("--synonyms", c.synonyms_path)->required()->check(CLI::ExistingFile);
    add_attack_opts(eval, c);
    eval->add_option("--steps", c.igcfg.steps)->capture_default_str();
    eval->add_option("--target", c.ig_target)
        ->transform(CLI::IsMember({"predicted", "gold"}))
        ->capture_default_str();
    eval->add_option("--top-k", c.ks, "k values for the intersection metric")
        ->delimiter(',')
        ->capture_default_str();
    add_jobs_opt(eval, c);

    auto* abl = app.add_subcommand("ablate", "2x2 regularizer grid over beta/gamma");
    add_out_opt(abl, c);
    add_corpus_opts(abl, c, true);
    abl->add_option("--test", c.test_path)->required()->check(CLI::ExistingFile);
    abl->add_option("--synonyms", c.synonyms_path)->required()->check(CLI::ExistingFile);
    add_model_opts(abl, c);
    add_sgd_opts(abl, c);
    add_mask_opts(abl, c);
    add_round_opts(abl, c);
    add_attack_opts(abl, c);
    add_jobs_opt(abl, c);

    auto* exp = app.add_subcommand("export-importance",
                                   "per-word importance series and frequency correlations");
    add_out_opt(exp, c);
    exp->add_option("--ckpt", c.ckpt_path)->required()->check(CLI::ExistingFile);
    exp->add_option("--vocab", c.vocab_path)->required()->check(CLI::ExistingFile);
    exp->add_option("--adv-dump", c.adv_dump, "attack JSONL supplying substitution counts")
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);  // unknown flag / missing file / bad value -> nonzero
    }

    try {
        if (app.got_subcommand(gen)) return run_gen_data(app, c);
        if (app.got_subcommand(tbase)) return run_train_base(app, c);
        if (app.got_subcommand(tflat)) return run_train_attacked(app, c, true);
        if (app.got_subcommand(tadv)) return run_train_attacked(app, c, false);
        if (app.got_subcommand(tgroup)) return run_train_groupmask(app, c);
        if (app.got_subcommand(atk)) return run_attack(app, c);
        if (app.got_subcommand(interp)) return run_interpret(app, c);
        if (app.got_subcommand(eval)) return run_evaluate(app, c);
        if (app.got_subcommand(abl)) return run_ablate(app, c);
        if (app.got_subcommand(exp)) return run_export_importance(app, c);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;  // unreachable: require_subcommand(1)
}
