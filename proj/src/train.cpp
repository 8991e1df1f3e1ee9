#include "flat/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "flat/metrics.hpp"
#include "flat/ops.hpp"
#include "flat/rng.hpp"

namespace flat::train {

void FlatConfig::validate() const {
    if (beta < 0.0) throw std::invalid_argument("train: beta must be nonnegative");
    if (gamma < 0.0) throw std::invalid_argument("train: gamma must be nonnegative");
    if (!(tau > 0.0)) throw std::invalid_argument("train: tau must be positive");
    if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
    if (epochs_per_round < 1) throw std::invalid_argument("train: epochs_per_round must be >= 1");
    if (rounds < 1 || rounds > 5) throw std::invalid_argument("train: rounds must lie in [1,5]");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (attack_sample < 0) throw std::invalid_argument("train: attack_sample must be >= 0");
}

std::string FlatConfig::to_json() const {
    nlohmann::json j{{"beta", beta},
                     {"gamma", gamma},
                     {"tau", tau},
                     {"lr", lr},
                     {"clip_norm", clip_norm},
                     {"epochs_per_round", epochs_per_round},
                     {"rounds", rounds},
                     {"batch_size", batch_size},
                     {"seed", seed},
                     {"use_masks", use_masks},
                     {"attack_sample", attack_sample}};
    return j.dump();
}

namespace {

std::vector<bool> pad_flags_of(std::span<const int> ids) {
    std::vector<bool> flags(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) flags[i] = ids[i] == corpus::Vocab::kPad;
    return flags;
}

/// CE(f(emb*mask), y) − β·H as a graph for one example.
ad::Tensor example_loss(const corpus::Example& ex, const model::TextCnn& net,
                        const masks::InferenceNet& inet, const FlatConfig& cfg,
                        std::mt19937_64& rng) {
    ad::Tensor emb = ad::embedding_lookup(net.embedding, ex.ids);
    ad::Tensor logits;
    ad::Tensor entropy;
    if (cfg.use_masks) {
        const auto flags = pad_flags_of(ex.ids);
        ad::Tensor mask = masks::sampled_masks_graph(inet, emb, cfg.tau, flags, rng);
        logits = net.logits_from_embeddings(ad::mul(emb, mask));
        if (cfg.beta != 0.0) entropy = masks::entropy_graph(inet, emb, flags);
    } else {
        logits = net.logits_from_embeddings(emb);
    }
    ad::Tensor ce =
        ad::scalar_mul(ad::select_column(ad::log_softmax(logits), ex.label), -1.0);
    if (entropy.defined()) ce = ad::add(ce, ad::scalar_mul(entropy, -cfg.beta));
    return ce;
}

}  // namespace

ad::Tensor prediction_loss(std::span<const corpus::Example> batch, const model::TextCnn& net,
                           const masks::InferenceNet& inet, const FlatConfig& cfg,
                           std::mt19937_64& rng) {
    if (batch.empty()) throw std::invalid_argument("prediction_loss: empty batch");
    ad::Tensor total;
    for (const auto& ex : batch) {
        ad::Tensor l = example_loss(ex, net, inet, cfg, rng);
        total = total.defined() ? ad::add(total, l) : l;
    }
    return ad::scalar_mul(total, 1.0 / static_cast<double>(batch.size()));
}

ad::Tensor importance_regularizer(std::span<const corpus::AdversarialPair> pairs,
                                  const masks::InferenceNet& inet,
                                  const ad::Tensor& embedding_table) {
    std::vector<int> orig_ids, adv_ids;
    for (const auto& p : pairs)
        for (const auto& s : p.subs) {
            orig_ids.push_back(s.orig_id);
            adv_ids.push_back(s.adv_id);
        }
    if (orig_ids.empty()) return ad::Tensor::scalar(0.0);

    ad::Tensor phi_orig =
        masks::select_probs_graph(inet, ad::embedding_lookup(embedding_table, orig_ids));
    ad::Tensor phi_adv =
        masks::select_probs_graph(inet, ad::embedding_lookup(embedding_table, adv_ids));
    ad::Tensor gaps = ad::abs_val(ad::sub(phi_orig, phi_adv));
    return ad::scalar_mul(ad::sum(gaps), 1.0 / static_cast<double>(pairs.size()));
}

ad::Tensor flat_objective(std::span<const corpus::Example> orig_batch,
                          std::span<const corpus::AdversarialPair> adv_batch,
                          const model::TextCnn& net, const masks::InferenceNet& inet,
                          const FlatConfig& cfg, std::mt19937_64& rng) {
    ad::Tensor loss = prediction_loss(orig_batch, net, inet, cfg, rng);
    if (adv_batch.empty()) return loss;

    std::vector<corpus::Example> adv_examples;
    adv_examples.reserve(adv_batch.size());
    for (const auto& p : adv_batch) {
        corpus::Example ex;
        ex.ids = p.adv_ids;
        ex.label = p.original.label;  // label preserved by construction
        adv_examples.push_back(std::move(ex));
    }
    loss = ad::add(loss, prediction_loss(adv_examples, net, inet, cfg, rng));
    if (cfg.gamma != 0.0)
        loss = ad::add(loss,
                       ad::scalar_mul(importance_regularizer(adv_batch, inet, net.embedding),
                                      cfg.gamma));
    return loss;
}

// ---- shared training loop ----

namespace {

struct ViewExtras {
    std::shared_ptr<masks::GlobalImportance> gi;  // keeps φ alive inside the closure
};

void zero_pad_row(const model::TextCnn& net) {
    auto& vals = net.embedding.values_mut();
    for (int j = 0; j < net.dim; ++j) vals[static_cast<size_t>(j)] = 0.0;
}

std::vector<ad::Tensor> trainable_params(TrainState& state, bool with_inference_net) {
    std::vector<ad::Tensor> params = state.net.params();
    if (with_inference_net)
        for (auto& t : state.inference_net.params()) params.push_back(t);
    if (state.group_scales.defined()) params.push_back(state.group_scales);
    return params;
}

nlohmann::json metrics_line(const RoundMetrics& m) {
    nlohmann::json j{{"round", m.round},
                     {"dev_acc", m.dev_acc},
                     {"mean_phi_gap", m.mean_phi_gap},
                     {"loss", m.loss}};
    if (m.after_attack_acc)
        j["after_attack_acc"] = *m.after_attack_acc;
    else
        j["after_attack_acc"] = nullptr;
    return j;
}

struct LoopContext {
    const corpus::Dataset& train_set;
    const corpus::Dataset& dev_set;
    const corpus::SynonymTable* synonyms = nullptr;     // null: no attacks
    const attack::AttackConfig* attack_cfg = nullptr;   // null: no attacks
    const FlatConfig& cfg;
    const ModelDims& dims;
    std::string out_dir;
    int attack_jobs = 1;
    const corpus::Vocab* vocab = nullptr;  // enables per-round attack dumps
};

void save_round_checkpoint(const LoopContext& ctx, const TrainState& state, int round) {
    if (ctx.out_dir.empty()) return;
    std::filesystem::create_directories(ctx.out_dir);
    const auto path = ctx.out_dir + "/round_" + std::to_string(round) + ".ckpt";
    model::save_checkpoint(path, to_checkpoint(state, ctx.dims, ctx.cfg));
}

double run_train_phase(TrainState& state, const LoopContext& ctx, std::mt19937_64& shuffle_rng,
                       std::mt19937_64& mask_rng) {
    const auto& cfg = ctx.cfg;
    auto params = trainable_params(state, cfg.use_masks);
    const std::optional<double> clip =
        cfg.clip_norm > 0.0 ? std::optional<double>(cfg.clip_norm) : std::nullopt;

    std::vector<size_t> order(ctx.train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<size_t> adv_order(state.dprime.size());
    std::iota(adv_order.begin(), adv_order.end(), 0);

    double loss_sum = 0.0;
    long long steps = 0;
    for (int epoch = 0; epoch < cfg.epochs_per_round; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        if (!adv_order.empty()) std::shuffle(adv_order.begin(), adv_order.end(), shuffle_rng);
        size_t adv_cursor = 0;

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<corpus::Example> batch;
            batch.reserve(stop - start);
            for (size_t i = start; i < stop; ++i) batch.push_back(ctx.train_set[order[i]]);

            std::vector<corpus::AdversarialPair> adv_batch;
            if (!state.dprime.empty()) {
                const size_t take = std::min(state.dprime.size(), static_cast<size_t>(cfg.batch_size));
                for (size_t k = 0; k < take; ++k) {
                    adv_batch.push_back(state.dprime[adv_order[adv_cursor]]);
                    adv_cursor = (adv_cursor + 1) % adv_order.size();
                }
            }

            ad::Tape tape;
            ad::TapeScope scope(tape);
            ad::Tensor loss =
                flat_objective(batch, adv_batch, state.net, state.inference_net, cfg, mask_rng);
            loss_sum += loss.values()[0];
            ++steps;
            tape.backward(loss);
            ad::sgd_step(params, cfg.lr, clip);
            zero_pad_row(state.net);
        }
    }
    return loss_sum / static_cast<double>(steps);
}

void emit_round(TrainState& state, const LoopContext& ctx, int round, double loss,
                std::ofstream* metrics_out) {
    RoundMetrics m;
    m.round = round;
    m.loss = loss;
    m.dev_acc = dataset_accuracy(state, ctx.dev_set);
    if (ctx.attack_cfg && ctx.synonyms) {
        auto view = deployed_view(state);
        auto results =
            attack::attack_dataset(view, ctx.dev_set, *ctx.synonyms, *ctx.attack_cfg, ctx.attack_jobs);
        m.after_attack_acc = metrics::after_attack_accuracy(results);
    }
    if (ctx.synonyms)
        m.mean_phi_gap = mean_phi_gap(state_importance(state), *ctx.synonyms);
    state.history.push_back(m);
    if (metrics_out && metrics_out->is_open()) *metrics_out << metrics_line(m).dump() << "\n";
}

TrainState run_regime(std::string kind, LoopContext ctx) {
    ctx.cfg.validate();
    if (ctx.dims.vocab_size < 2) throw std::invalid_argument("train: vocab_size must cover specials");
    if (ctx.train_set.empty()) throw std::invalid_argument("train: empty training set");

    TrainState state;
    state.kind = std::move(kind);
    auto init_rng = rng::make_rng(rng::sub_seed(ctx.cfg.seed, "init"));
    state.net = model::TextCnn::init(ctx.dims.vocab_size, ctx.dims.dim, ctx.dims.filters,
                                     ctx.dims.num_classes, init_rng);
    state.inference_net = masks::InferenceNet::zero_init(ctx.dims.dim);

    auto shuffle_rng = rng::make_rng(rng::sub_seed(ctx.cfg.seed, "shuffle"));
    auto mask_rng = rng::make_rng(rng::sub_seed(ctx.cfg.seed, "masks"));
    auto sample_rng = rng::make_rng(rng::sub_seed(ctx.cfg.seed, "attack-sample"));

    std::ofstream metrics_out;
    if (!ctx.out_dir.empty()) {
        std::filesystem::create_directories(ctx.out_dir);
        metrics_out.open(ctx.out_dir + "/metrics.jsonl");
    }

    // round 0: clean data only
    double loss = run_train_phase(state, ctx, shuffle_rng, mask_rng);
    emit_round(state, ctx, 0, loss, &metrics_out);
    save_round_checkpoint(ctx, state, 0);

    const bool attacking = ctx.attack_cfg != nullptr && ctx.synonyms != nullptr;
    if (!attacking) return state;

    for (int r = 1; r <= ctx.cfg.rounds; ++r) {
        state.round = r;

        // attack the latest model on (a sample of) the training data
        corpus::Dataset targets;
        if (ctx.cfg.attack_sample > 0 &&
            static_cast<size_t>(ctx.cfg.attack_sample) < ctx.train_set.size()) {
            std::vector<size_t> idx(ctx.train_set.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::shuffle(idx.begin(), idx.end(), sample_rng);
            idx.resize(static_cast<size_t>(ctx.cfg.attack_sample));
            std::sort(idx.begin(), idx.end());  // stable evaluation order
            for (size_t i : idx) targets.push_back(ctx.train_set[i]);
        } else {
            targets = ctx.train_set;
        }

        {
            auto view = deployed_view(state);
            auto results = attack::attack_dataset(view, targets, *ctx.synonyms, *ctx.attack_cfg,
                                                  ctx.attack_jobs);
            if (!ctx.out_dir.empty() && ctx.vocab)
                attack::dump_attack_results(ctx.out_dir + "/adv_round_" + std::to_string(r) + ".jsonl",
                                            targets, results, *ctx.vocab);
            size_t added = 0;
            for (auto& res : results)
                if (res.success && res.pair) {
                    state.dprime.push_back(std::move(*res.pair));
                    ++added;
                }
            if (r == 1 && added == 0)
                std::cerr << "train(" << state.kind
                          << "): round 1 attack produced no adversarial examples; continuing\n";
        }

        loss = run_train_phase(state, ctx, shuffle_rng, mask_rng);
        emit_round(state, ctx, r, loss, &metrics_out);
        save_round_checkpoint(ctx, state, r);
    }
    return state;
}

}  // namespace

TrainState train_flat(const corpus::Dataset& train_set, const corpus::Dataset& dev_set,
                      const corpus::SynonymTable& synonyms, const attack::AttackConfig& attack_cfg,
                      FlatConfig cfg, const ModelDims& dims, const std::string& out_dir,
                      int attack_jobs, const corpus::Vocab* vocab) {
    cfg.use_masks = true;
    LoopContext ctx{train_set, dev_set, &synonyms, &attack_cfg, cfg, dims, out_dir, attack_jobs,
                    vocab};
    return run_regime("flat", std::move(ctx));
}

TrainState train_traditional_adv(const corpus::Dataset& train_set, const corpus::Dataset& dev_set,
                                 const corpus::SynonymTable& synonyms,
                                 const attack::AttackConfig& attack_cfg, FlatConfig cfg,
                                 const ModelDims& dims, const std::string& out_dir,
                                 int attack_jobs, const corpus::Vocab* vocab) {
    cfg.use_masks = false;  // masks pinned to 1
    cfg.beta = 0.0;
    cfg.gamma = 0.0;
    LoopContext ctx{train_set, dev_set, &synonyms, &attack_cfg, cfg, dims, out_dir, attack_jobs,
                    vocab};
    return run_regime("adv", std::move(ctx));
}

TrainState train_base(const corpus::Dataset& train_set, const corpus::Dataset& dev_set,
                      FlatConfig cfg, const ModelDims& dims, const std::string& out_dir) {
    cfg.use_masks = false;
    cfg.beta = 0.0;
    cfg.gamma = 0.0;
    LoopContext ctx{train_set, dev_set, nullptr, nullptr, cfg, dims, out_dir, 1};
    return run_regime("base", std::move(ctx));
}

TrainState train_group_mask(const corpus::Dataset& train_set, const corpus::Dataset& dev_set,
                            int clusters, FlatConfig cfg, const ModelDims& dims,
                            const std::string& out_dir) {
    if (clusters < 1) throw std::invalid_argument("train_group_mask: clusters must be >= 1");
    if (clusters > dims.vocab_size)
        throw std::invalid_argument("train_group_mask: more clusters than vocabulary words");
    cfg.use_masks = false;
    cfg.beta = 0.0;
    cfg.gamma = 0.0;
    cfg.validate();

    TrainState state;
    state.kind = "groupmask";
    auto init_rng = rng::make_rng(rng::sub_seed(cfg.seed, "init"));
    state.net = model::TextCnn::init(dims.vocab_size, dims.dim, dims.filters, dims.num_classes,
                                     init_rng);
    state.inference_net = masks::InferenceNet::zero_init(dims.dim);

    // k-means over embedding rows
    auto km_rng = rng::make_rng(rng::sub_seed(cfg.seed, "kmeans"));
    const auto& emb = state.net.embedding.values();
    const int v = dims.vocab_size, d = dims.dim;
    std::vector<int> assign(static_cast<size_t>(v), 0);
    std::vector<double> centroids(static_cast<size_t>(clusters) * d);
    {
        // initial centers: distinct random rows
        std::vector<int> rows(static_cast<size_t>(v));
        std::iota(rows.begin(), rows.end(), 0);
        std::shuffle(rows.begin(), rows.end(), km_rng);
        for (int c = 0; c < clusters; ++c)
            for (int j = 0; j < d; ++j)
                centroids[static_cast<size_t>(c) * d + j] =
                    emb[static_cast<size_t>(rows[static_cast<size_t>(c)]) * d + j];
    }
    for (int iter = 0; iter < 25; ++iter) {
        bool moved = false;
        for (int w = 0; w < v; ++w) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < clusters; ++c) {
                double dist = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double diff = emb[static_cast<size_t>(w) * d + j] -
                                        centroids[static_cast<size_t>(c) * d + j];
                    dist += diff * diff;
                }
                if (dist < best_d) {
                    best_d = dist;
                    best = c;
                }
            }
            if (assign[static_cast<size_t>(w)] != best) moved = true;
            assign[static_cast<size_t>(w)] = best;
        }
        std::vector<double> sums(static_cast<size_t>(clusters) * d, 0.0);
        std::vector<int> counts(static_cast<size_t>(clusters), 0);
        for (int w = 0; w < v; ++w) {
            ++counts[static_cast<size_t>(assign[static_cast<size_t>(w)])];
            for (int j = 0; j < d; ++j)
                sums[static_cast<size_t>(assign[static_cast<size_t>(w)]) * d + j] +=
                    emb[static_cast<size_t>(w) * d + j];
        }
        for (int c = 0; c < clusters; ++c)
            if (counts[static_cast<size_t>(c)] > 0)  // empty cluster keeps its centroid
                for (int j = 0; j < d; ++j)
                    centroids[static_cast<size_t>(c) * d + j] =
                        sums[static_cast<size_t>(c) * d + j] / counts[static_cast<size_t>(c)];
        if (!moved) break;
    }
    state.group_of = std::move(assign);
    state.group_scales = ad::Tensor::full({clusters, 1}, 1.0);  // shared masks start at 1
    state.group_scales.set_tracked(true);

    auto shuffle_rng = rng::make_rng(rng::sub_seed(cfg.seed, "shuffle"));
    auto params = state.net.params();
    params.push_back(state.group_scales);
    const std::optional<double> clip =
        cfg.clip_norm > 0.0 ? std::optional<double>(cfg.clip_norm) : std::nullopt;

    std::ofstream metrics_out;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        metrics_out.open(out_dir + "/metrics.jsonl");
    }

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    double loss_sum = 0.0;
    long long steps = 0;
    for (int epoch = 0; epoch < cfg.epochs_per_round; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            ad::Tape tape;
            ad::TapeScope scope(tape);
            ad::Tensor total;
            for (size_t i = start; i < stop; ++i) {
                const auto& ex = train_set[order[i]];
                std::vector<int> gids(ex.ids.size());
                for (size_t k = 0; k < ex.ids.size(); ++k)
                    gids[k] = state.group_of[static_cast<size_t>(ex.ids[k])];
                ad::Tensor scale =
                    ad::select_column(ad::embedding_lookup(state.group_scales, gids), 0);
                ad::Tensor logits = state.net.logits_graph(ex.ids, scale);
                ad::Tensor ce =
                    ad::scalar_mul(ad::select_column(ad::log_softmax(logits), ex.label), -1.0);
                total = total.defined() ? ad::add(total, ce) : ce;
            }
            ad::Tensor loss = ad::scalar_mul(total, 1.0 / static_cast<double>(stop - start));
            loss_sum += loss.values()[0];
            ++steps;
            tape.backward(loss);
            ad::sgd_step(params, cfg.lr, clip);
            zero_pad_row(state.net);
        }
    }

    RoundMetrics m;
    m.round = 0;
    m.loss = loss_sum / static_cast<double>(steps);
    m.dev_acc = dataset_accuracy(state, dev_set);
    state.history.push_back(m);
    if (metrics_out.is_open()) metrics_out << metrics_line(m).dump() << "\n";
    if (!out_dir.empty())
        model::save_checkpoint(out_dir + "/round_0.ckpt", to_checkpoint(state, dims, cfg));
    return state;
}

// ---- deployment helpers ----

masks::GlobalImportance state_importance(const TrainState& state) {
    masks::GlobalImportance gi;
    if (state.kind == "flat") {
        return masks::global_importance(state.inference_net, state.net.embedding);
    }
    if (state.kind == "groupmask" && state.group_scales.defined()) {
        const auto& s = state.group_scales.values();
        gi.phi.resize(state.group_of.size());
        for (size_t w = 0; w < state.group_of.size(); ++w)
            gi.phi[w] = s[static_cast<size_t>(state.group_of[w])];
        return gi;
    }
    gi.phi.assign(static_cast<size_t>(state.net.embedding.dim(0)), 1.0);
    return gi;
}

attack::ModelView deployed_view(const TrainState& state) {
    attack::ModelView v;
    v.num_classes = state.net.num_classes;
    if (state.kind == "flat") {
        auto gi = std::make_shared<masks::GlobalImportance>(state_importance(state));
        const model::TextCnn* net = &state.net;
        v.eval = [net, gi](std::span<const int> ids, int occlude) {
            std::vector<double> m(ids.size());
            for (size_t i = 0; i < ids.size(); ++i)
                m[i] = ids[i] == corpus::Vocab::kPad ? 0.0 : (*gi)(ids[i]);
            if (occlude >= 0) m[static_cast<size_t>(occlude)] = 0.0;
            return model::forward(*net, ids, m);
        };
        return v;
    }
    if (state.kind == "groupmask") {
        // group scales are unbounded scalars, so this bypasses the [0,1]
        // mask validation in forward()
        auto gi = std::make_shared<masks::GlobalImportance>(state_importance(state));
        const model::TextCnn* net = &state.net;
        v.eval = [net, gi](std::span<const int> ids, int occlude) {
            ad::NoTapeScope pure;
            std::vector<double> m(ids.size());
            for (size_t i = 0; i < ids.size(); ++i)
                m[i] = ids[i] == corpus::Vocab::kPad ? 0.0 : (*gi)(ids[i]);
            if (occlude >= 0) m[static_cast<size_t>(occlude)] = 0.0;
            ad::Tensor scale = ad::Tensor::from({static_cast<int>(m.size())}, m);
            return model::output_from_logits(net->logits_graph(ids, scale));
        };
        return v;
    }
    return attack::make_base_view(state.net);
}

double dataset_accuracy(const TrainState& state, const corpus::Dataset& data) {
    if (data.empty()) throw std::invalid_argument("dataset_accuracy: empty dataset");
    auto view = deployed_view(state);
    int correct = 0;
    for (const auto& ex : data)
        if (view.eval(ex.ids, -1).predicted == ex.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double mean_phi_gap(const masks::GlobalImportance& phi, const corpus::SynonymTable& synonyms) {
    const auto pairs = synonyms.all_pairs();
    if (pairs.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [a, b] : pairs) sum += std::abs(phi(a) - phi(b));
    return sum / static_cast<double>(pairs.size());
}

model::Checkpoint to_checkpoint(const TrainState& state, const ModelDims& dims,
                                const FlatConfig& cfg) {
    model::Checkpoint ckpt;
    ckpt.net = state.net;
    ckpt.kind = state.kind;
    ckpt.vocab_hash = dims.vocab_hash;
    ckpt.config_json = cfg.to_json();
    if (state.kind == "flat") ckpt.inference_net = state.inference_net;
    if (state.kind == "groupmask") {
        ckpt.group_scales = state.group_scales;
        ckpt.group_of = state.group_of;
    }
    return ckpt;
}

TrainState from_checkpoint(const model::Checkpoint& ckpt) {
    TrainState state;
    state.net = ckpt.net;
    state.kind = ckpt.kind;
    if (ckpt.inference_net)
        state.inference_net = *ckpt.inference_net;
    else
        state.inference_net = masks::InferenceNet::zero_init(state.net.dim);
    state.group_scales = ckpt.group_scales;
    state.group_of = ckpt.group_of;
    return state;
}

}  // namespace flat::train
