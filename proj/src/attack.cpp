#include "flat/attack.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace flat::attack {

namespace {

std::vector<double> importance_mask(const model::TextCnn& net, const masks::GlobalImportance& phi,
                                    std::span<const int> ids) {
    std::vector<double> m(ids.size(), 0.0);
    for (size_t i = 0; i < ids.size(); ++i)
        m[i] = ids[i] == corpus::Vocab::kPad ? 0.0 : phi(ids[i]);
    return m;
}

int count_nonpad(std::span<const int> ids) {
    int n = 0;
    for (int id : ids)
        if (id != corpus::Vocab::kPad) ++n;
    return n;
}

/// Bookkeeping shared by both attacks: budgeted evaluation and the greedy
/// commit loop state.
struct Session {
    const ModelView& view;
    const AttackConfig& config;
    int gold;
    int queries = 0;

    std::optional<model::ModelOutput> eval(std::span<const int> ids, int occlude = -1) {
        if (queries >= config.query_budget) return std::nullopt;
        ++queries;
        return view.eval(ids, occlude);
    }

    double p_gold(const model::ModelOutput& out) const {
        return out.probabilities[static_cast<size_t>(gold)];
    }
};

AttackResult finish(Session& s, const corpus::Example& example, std::vector<int> cur_ids,
                    std::vector<corpus::Substitution> subs, const corpus::SynonymTable& synonyms,
                    AttackKind kind, bool flipped, int pred_before, int pred_after,
                    std::vector<double> trace) {
    AttackResult r;
    r.success = flipped;
    r.queries = s.queries;
    r.pred_before = pred_before;
    r.pred_after = pred_after;
    r.prob_trace = std::move(trace);
    if (!subs.empty()) {
        r.pair = corpus::make_adversarial_pair(example, std::move(cur_ids), std::move(subs),
                                               synonyms, attack_name(kind), flipped, s.queries);
    }
    return r;
}

}  // namespace

std::string attack_name(AttackKind kind) {
    return kind == AttackKind::deletion_importance ? "deletion_importance" : "saliency_weighted";
}

void AttackConfig::validate() const {
    if (!(max_sub_ratio > 0.0 && max_sub_ratio <= 1.0))
        throw std::invalid_argument("attack: max_sub_ratio must be in (0,1]");
    if (max_candidates < 1) throw std::invalid_argument("attack: max_candidates must be >= 1");
    if (query_budget < 1) throw std::invalid_argument("attack: query_budget must be >= 1");
}

ModelView make_base_view(const model::TextCnn& net) {
    ModelView v;
    v.num_classes = net.num_classes;
    v.eval = [&net](std::span<const int> ids, int occlude) {
        if (occlude < 0) return model::forward(net, ids);
        std::vector<double> m(ids.size(), 1.0);
        m[static_cast<size_t>(occlude)] = 0.0;
        return model::forward(net, ids, m);
    };
    return v;
}

ModelView make_importance_view(const model::TextCnn& net, const masks::GlobalImportance& phi) {
    ModelView v;
    v.num_classes = net.num_classes;
    v.eval = [&net, &phi](std::span<const int> ids, int occlude) {
        auto m = importance_mask(net, phi, ids);
        if (occlude >= 0) m[static_cast<size_t>(occlude)] = 0.0;
        return model::forward(net, ids, m);
    };
    return v;
}

AttackResult deletion_importance_attack(const ModelView& view, const corpus::Example& example,
                                        const corpus::SynonymTable& synonyms,
                                        const AttackConfig& config) {
    config.validate();
    Session s{view, config, example.label};

    const auto base = s.eval(example.ids);
    if (!base) throw std::logic_error("attack: budget exhausted before the first evaluation");
    if (base->predicted != example.label) {
        AttackResult r;
        r.skipped = true;
        r.queries = s.queries;
        r.pred_before = base->predicted;
        r.pred_after = base->predicted;
        return r;
    }

    const double p0 = s.p_gold(*base);
    std::vector<double> trace{p0};

    // occlusion importance, computed while budget lasts; positions the budget
    // never reached simply are not attacked
    struct Ranked {
        int pos;
        double importance;
    };
    std::vector<Ranked> order;
    for (size_t i = 0; i < example.ids.size(); ++i) {
        if (example.ids[i] == corpus::Vocab::kPad) continue;
        if (synonyms.synonyms_of(example.ids[i]).empty()) continue;  // nothing to try anyway
        auto out = s.eval(example.ids, static_cast<int>(i));
        if (!out) break;
        order.push_back({static_cast<int>(i), p0 - s.p_gold(*out)});
    }
    std::stable_sort(order.begin(), order.end(), [](const Ranked& a, const Ranked& b) {
        if (a.importance != b.importance) return a.importance > b.importance;
        return a.pos < b.pos;
    });

    const int max_subs = static_cast<int>(
        std::ceil(config.max_sub_ratio * static_cast<double>(count_nonpad(example.ids))));

    std::vector<int> cur = example.ids;
    std::vector<corpus::Substitution> subs;
    double p_cur = p0;
    int pred_after = base->predicted;
    bool flipped = false;

    for (const auto& rk : order) {
        if (flipped || static_cast<int>(subs.size()) >= max_subs ||
            s.queries >= config.query_budget)
            break;
        const int orig_id = example.ids[static_cast<size_t>(rk.pos)];
        const auto& cands = synonyms.synonyms_of(orig_id);
        const int limit = std::min<int>(config.max_candidates, static_cast<int>(cands.size()));

        int best_id = -1;
        double best_p = p_cur;
        int best_pred = -1;
        std::vector<int> trial = cur;
        for (int c = 0; c < limit; ++c) {
            trial[static_cast<size_t>(rk.pos)] = cands[static_cast<size_t>(c)];
            auto out = s.eval(trial);
            if (!out) break;
            const double p = s.p_gold(*out);
            if (out->predicted != example.label) {  // flip ends the attack
                best_id = cands[static_cast<size_t>(c)];
                best_p = p;
                best_pred = out->predicted;
                flipped = true;
                break;
            }
            if (p < best_p) {  // strictly best decrease so far
                best_id = cands[static_cast<size_t>(c)];
                best_p = p;
                best_pred = out->predicted;
            }
        }
        if (best_id >= 0) {
            cur[static_cast<size_t>(rk.pos)] = best_id;
            subs.push_back({rk.pos, orig_id, best_id});
            p_cur = best_p;
            pred_after = best_pred;
            trace.push_back(p_cur);
        }
    }

    return finish(s, example, std::move(cur), std::move(subs), synonyms,
                  AttackKind::deletion_importance, flipped, base->predicted, pred_after,
                  std::move(trace));
}

AttackResult saliency_weighted_attack(const ModelView& view, const corpus::Example& example,
                                      const corpus::SynonymTable& synonyms,
                                      const AttackConfig& config) {
    config.validate();
    Session s{view, config, example.label};

    const auto base = s.eval(example.ids);
    if (!base) throw std::logic_error("attack: budget exhausted before the first evaluation");
    if (base->predicted != example.label) {
        AttackResult r;
        r.skipped = true;
        r.queries = s.queries;
        r.pred_before = base->predicted;
        r.pred_after = base->predicted;
        return r;
    }

    const double p0 = s.p_gold(*base);
    std::vector<double> trace{p0};

    // phase 1: UNK saliency and, per position, the synonym with the largest
    // drop measured on the unmodified sentence
    struct Scored {
        int pos;
        double saliency;
        double drop;
        int best_syn;
    };
    std::vector<Scored> scored;
    std::vector<int> probe = example.ids;
    for (size_t i = 0; i < example.ids.size(); ++i) {
        const int orig_id = example.ids[i];
        if (orig_id == corpus::Vocab::kPad) continue;
        const auto& cands = synonyms.synonyms_of(orig_id);
        if (cands.empty()) continue;

        probe[i] = corpus::Vocab::kUnk;
        auto unk_out = s.eval(probe);
        probe[i] = orig_id;
        if (!unk_out) break;
        const double sal = p0 - s.p_gold(*unk_out);

        const int limit = std::min<int>(config.max_candidates, static_cast<int>(cands.size()));
        double best_drop = -1.0;  // any real drop beats "never evaluated"
        int best_syn = -1;
        bool exhausted = false;
        for (int c = 0; c < limit; ++c) {
            probe[i] = cands[static_cast<size_t>(c)];
            auto out = s.eval(probe);
            if (!out) {
                exhausted = true;
                break;
            }
            const double drop = p0 - s.p_gold(*out);
            if (drop > best_drop) {
                best_drop = drop;
                best_syn = cands[static_cast<size_t>(c)];
            }
        }
        probe[i] = orig_id;
        if (best_syn >= 0) scored.push_back({static_cast<int>(i), sal, best_drop, best_syn});
        if (exhausted) break;
    }

    // softmax over the saliencies actually computed
    double smax = -1e300;
    for (const auto& sc : scored) smax = std::max(smax, sc.saliency);
    double z = 0.0;
    for (const auto& sc : scored) z += std::exp(sc.saliency - smax);
    std::vector<std::pair<double, int>> order;  // (score, index into scored)
    for (size_t k = 0; k < scored.size(); ++k) {
        const double w = std::exp(scored[k].saliency - smax) / z;
        order.emplace_back(w * scored[k].drop, static_cast<int>(k));
    }
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return scored[static_cast<size_t>(a.second)].pos < scored[static_cast<size_t>(b.second)].pos;
    });

    const int max_subs = static_cast<int>(
        std::ceil(config.max_sub_ratio * static_cast<double>(count_nonpad(example.ids))));

    std::vector<int> cur = example.ids;
    std::vector<corpus::Substitution> subs;
    double p_cur = p0;
    int pred_after = base->predicted;
    bool flipped = false;

    for (const auto& [score, k] : order) {
        if (flipped || static_cast<int>(subs.size()) >= max_subs ||
            s.queries >= config.query_budget)
            break;
        const auto& sc = scored[static_cast<size_t>(k)];
        std::vector<int> trial = cur;
        trial[static_cast<size_t>(sc.pos)] = sc.best_syn;
        auto out = s.eval(trial);  // re-evaluate against the current sentence
        if (!out) break;
        const double p = s.p_gold(*out);
        const bool flips = out->predicted != example.label;
        if (flips || p < p_cur) {
            cur = std::move(trial);
            subs.push_back({sc.pos, example.ids[static_cast<size_t>(sc.pos)], sc.best_syn});
            p_cur = p;
            pred_after = out->predicted;
            trace.push_back(p_cur);
            flipped = flips;
        }
    }

    return finish(s, example, std::move(cur), std::move(subs), synonyms,
                  AttackKind::saliency_weighted, flipped, base->predicted, pred_after,
                  std::move(trace));
}

AttackResult run_attack(const ModelView& view, const corpus::Example& example,
                        const corpus::SynonymTable& synonyms, const AttackConfig& config) {
    return config.kind == AttackKind::deletion_importance
               ? deletion_importance_attack(view, example, synonyms, config)
               : saliency_weighted_attack(view, example, synonyms, config);
}

std::vector<AttackResult> attack_dataset(const ModelView& view, const corpus::Dataset& examples,
                                         const corpus::SynonymTable& synonyms,
                                         const AttackConfig& config, int jobs,
                                         AttackSummary* summary) {
    config.validate();
    if (jobs < 1) throw std::invalid_argument("attack_dataset: jobs must be >= 1");

    std::vector<AttackResult> results(examples.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= examples.size()) return;
            results[i] = run_attack(view, examples[i], synonyms, config);
        }
    };
    if (jobs == 1 || examples.size() < 2) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int n = std::min<int>(jobs, static_cast<int>(examples.size()));
        pool.reserve(static_cast<size_t>(n));
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    if (summary) {
        *summary = {};
        summary->total = static_cast<int>(results.size());
        for (const auto& r : results) {
            if (r.skipped)
                ++summary->skipped;
            else if (r.success)
                ++summary->successes;
            else
                ++summary->failures;
        }
    }
    return results;
}

void dump_attack_results(const std::string& path, const corpus::Dataset& examples,
                         const std::vector<AttackResult>& results, const corpus::Vocab& vocab) {
    if (examples.size() != results.size())
        throw std::invalid_argument("dump_attack_results: examples/results size mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_attack_results: cannot open " + path);

    for (size_t i = 0; i < results.size(); ++i) {
        const auto& ex = examples[i];
        const auto& r = results[i];
        const std::vector<int>& adv = r.pair ? r.pair->adv_ids : ex.ids;

        auto words = [&vocab](const std::vector<int>& ids) {
            std::vector<std::string> w;
            for (int id : ids)
                if (id != corpus::Vocab::kPad) w.push_back(vocab.word_for(id));
            return w;
        };
        nlohmann::json subs = nlohmann::json::array();
        if (r.pair)
            for (const auto& s : r.pair->subs)
                subs.push_back({s.position, vocab.word_for(s.orig_id), vocab.word_for(s.adv_id)});

        nlohmann::json line{{"id", i},
                            {"orig_tokens", words(ex.ids)},
                            {"adv_tokens", words(adv)},
                            {"subs", subs},
                            {"gold", ex.label},
                            {"pred_before", r.pred_before},
                            {"pred_after", r.pred_after},
                            {"success", r.success},
                            {"queries", r.queries}};
        out << line.dump() << "\n";
    }
}

}  // namespace flat::attack
