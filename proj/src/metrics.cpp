#include "flat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

namespace flat::metrics {

double after_attack_accuracy(const std::vector<attack::AttackResult>& results) {
    if (results.empty()) throw std::invalid_argument("after_attack_accuracy: empty result set");
    int correct = 0;
    for (const auto& r : results)
        if (!r.skipped && !r.success) ++correct;
    return static_cast<double>(correct) / static_cast<double>(results.size());
}

double clean_accuracy(const std::vector<attack::AttackResult>& results) {
    if (results.empty()) throw std::invalid_argument("clean_accuracy: empty result set");
    int correct = 0;
    for (const auto& r : results)
        if (!r.skipped) ++correct;
    return static_cast<double>(correct) / static_cast<double>(results.size());
}

double kendall_tau_values(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("kendall_tau: length mismatch");
    const size_t n = a.size();
    long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0.0) ++ties_a;
            if (db == 0.0) ++ties_b;
            if (da == 0.0 || db == 0.0) continue;
            if ((da > 0) == (db > 0))
                ++concordant;
            else
                ++discordant;
        }
    const long long n0 = static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;
    const double denom = std::sqrt(static_cast<double>(n0 - ties_a)) *
                         std::sqrt(static_cast<double>(n0 - ties_b));
    if (denom == 0.0) return 0.0;
    return static_cast<double>(concordant - discordant) / denom;
}

namespace {

/// Positions where real tokens live; demands identical PAD layout on both
/// sides (substitution attacks never move padding).
std::vector<size_t> shared_nonpad(const interpret::AttributionVector& a,
                                  const interpret::AttributionVector& b) {
    if (a.token_ids.size() != b.token_ids.size() ||
        a.attributions.size() != b.attributions.size() ||
        a.attributions.size() != a.token_ids.size())
        throw std::invalid_argument("attribution comparison: length mismatch");
    std::vector<size_t> keep;
    for (size_t i = 0; i < a.token_ids.size(); ++i) {
        const bool pa = a.token_ids[i] == corpus::Vocab::kPad;
        const bool pb = b.token_ids[i] == corpus::Vocab::kPad;
        if (pa != pb) throw std::invalid_argument("attribution comparison: pad layout mismatch");
        if (!pa) keep.push_back(i);
    }
    return keep;
}

}  // namespace

double kendall_tau(const interpret::AttributionVector& a, const interpret::AttributionVector& b) {
    const auto keep = shared_nonpad(a, b);
    std::vector<double> av, bv;
    av.reserve(keep.size());
    bv.reserve(keep.size());
    for (size_t i : keep) {
        av.push_back(a.attributions[i]);
        bv.push_back(b.attributions[i]);
    }
    return kendall_tau_values(av, bv);
}

namespace {

/// Non-PAD positions ordered by attribution descending, ties by position.
std::vector<size_t> ranked_positions(const interpret::AttributionVector& v,
                                     const std::vector<size_t>& keep) {
    std::vector<size_t> order = keep;
    std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
        return v.attributions[x] > v.attributions[y];
    });
    return order;
}

}  // namespace

double top_k_intersection(const interpret::AttributionVector& a,
                          const interpret::AttributionVector& b, int k,
                          const corpus::SynonymTable& synonyms) {
    const auto keep = shared_nonpad(a, b);
    if (k < 1) throw std::invalid_argument("top_k_intersection: k must be >= 1");
    if (static_cast<size_t>(k) > keep.size())
        throw std::invalid_argument("top_k_intersection: k exceeds the non-PAD length");

    const auto oa = ranked_positions(a, keep);
    const auto ob = ranked_positions(b, keep);

    // words sharing a synonym component collapse to its representative
    std::map<int, int> count_a, count_b;
    for (int i = 0; i < k; ++i) {
        ++count_a[synonyms.group(a.token_ids[oa[static_cast<size_t>(i)]])];
        ++count_b[synonyms.group(b.token_ids[ob[static_cast<size_t>(i)]])];
    }
    int matches = 0;
    for (const auto& [rep, ca] : count_a) {
        auto it = count_b.find(rep);
        if (it != count_b.end()) matches += std::min(ca, it->second);
    }
    return static_cast<double>(matches) / static_cast<double>(k);
}

ConsistencyReport consistency_report(const std::vector<ConsistencyPair>& pairs,
                                     std::vector<int> ks, const corpus::SynonymTable& synonyms,
                                     int num_classes) {
    if (num_classes < 1) throw std::invalid_argument("consistency_report: num_classes must be >= 1");
    ConsistencyReport rep;
    rep.ks = std::move(ks);

    std::map<int, std::vector<const ConsistencyPair*>> by_class;
    for (const auto& p : pairs) {
        if (p.gold < 0 || p.gold >= num_classes)
            throw std::invalid_argument("consistency_report: gold label out of range");
        by_class[p.gold].push_back(&p);
    }

    for (int c = 0; c < num_classes; ++c) {
        auto it = by_class.find(c);
        if (it == by_class.end() || it->second.empty()) {
            std::cerr << "consistency_report: class " << c
                      << " has no pairs; excluded from the macro average\n";
            rep.empty_classes.push_back(c);
            continue;
        }
        const auto& group = it->second;
        double tau_sum = 0.0;
        std::vector<double> topk_sum(rep.ks.size(), 0.0);
        for (const auto* p : group) {
            tau_sum += kendall_tau(p->original, p->adversarial);
            for (size_t ki = 0; ki < rep.ks.size(); ++ki)
                topk_sum[ki] += top_k_intersection(p->original, p->adversarial, rep.ks[ki], synonyms);
        }
        const double m = static_cast<double>(group.size());
        rep.pairs_per_class[c] = static_cast<int>(group.size());
        rep.tau_per_class[c] = tau_sum / m;
        auto& per = rep.topk_per_class[c];
        per.resize(rep.ks.size());
        for (size_t ki = 0; ki < rep.ks.size(); ++ki) per[ki] = topk_sum[ki] / m;
    }

    const double populated = static_cast<double>(rep.tau_per_class.size());
    rep.topk_macro.assign(rep.ks.size(), 0.0);
    if (populated > 0) {
        for (const auto& [c, t] : rep.tau_per_class) rep.tau_macro += t / populated;
        for (const auto& [c, per] : rep.topk_per_class)
            for (size_t ki = 0; ki < per.size(); ++ki) rep.topk_macro[ki] += per[ki] / populated;
    }
    return rep;
}

void write_topk_curve(const std::string& path, const ConsistencyReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_topk_curve: cannot open " + path);
    for (size_t ki = 0; ki < report.ks.size(); ++ki)
        out << report.ks[ki] << "\t" << report.topk_macro[ki] << "\n";
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("pearson: need at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance series");
    return sxy / (std::sqrt(sxx) * std::sqrt(syy));
}

WordCorrelations correlation_analysis(const masks::GlobalImportance& phi,
                                      const corpus::Vocab& vocab,
                                      const std::vector<corpus::AdversarialPair>& dprime) {
    WordCorrelations wc;
    std::vector<long long> subs(static_cast<size_t>(vocab.size()), 0);
    for (const auto& pair : dprime)
        for (const auto& s : pair.subs) ++subs[static_cast<size_t>(s.orig_id)];

    for (int id = 2; id < vocab.size(); ++id) {  // skip <pad>/<unk>
        wc.word_ids.push_back(id);
        wc.phi.push_back(phi(id));
        wc.train_freq.push_back(static_cast<double>(vocab.freq(id)));
        wc.sub_freq.push_back(static_cast<double>(subs[static_cast<size_t>(id)]));
    }

    auto safe_r = [](std::span<const double> a, std::span<const double> b) -> std::optional<double> {
        try {
            return pearson(a, b);
        } catch (const std::invalid_argument&) {
            return std::nullopt;  // degenerate series: r undefined
        }
    };
    wc.r_wi_wf = safe_r(wc.phi, wc.train_freq);
    wc.r_wi_sf = safe_r(wc.phi, wc.sub_freq);
    wc.r_wf_sf = safe_r(wc.train_freq, wc.sub_freq);
    return wc;
}

void write_correlation_series(const std::string& path, const WordCorrelations& wc,
                              const corpus::Vocab& vocab) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_correlation_series: cannot open " + path);
    out << "word\tphi\ttrain_freq\tsub_freq\n";
    for (size_t i = 0; i < wc.word_ids.size(); ++i)
        out << vocab.word_for(wc.word_ids[i]) << "\t" << wc.phi[i] << "\t" << wc.train_freq[i]
            << "\t" << wc.sub_freq[i] << "\n";
}

}  // namespace flat::metrics
