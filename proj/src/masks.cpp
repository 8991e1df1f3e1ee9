#include "flat/masks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "flat/ops.hpp"
#include "flat/rng.hpp"

namespace flat::masks {

InferenceNet InferenceNet::zero_init(int dim) {
    InferenceNet net;
    net.w = ad::Tensor::zeros({dim, 2});
    net.b = ad::Tensor::zeros({2});
    net.w.set_tracked(true);
    net.b.set_tracked(true);
    return net;
}

namespace {

double stable_sigmoid(double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

void check_pad_flags(const char* fn, const std::vector<bool>& pad_flags, int n) {
    if (!pad_flags.empty() && static_cast<int>(pad_flags.size()) != n)
        throw std::invalid_argument(std::string(fn) + ": pad flag length mismatch");
}

}  // namespace

MaskDistribution mask_probs(const InferenceNet& net, const ad::Tensor& embeddings,
                            const std::vector<bool>& pad_flags) {
    if (embeddings.ndim() != 2 || embeddings.dim(1) != net.dim())
        throw ad::ShapeError("mask_probs", ad::shape_str(embeddings.shape()));
    const int n = embeddings.dim(0), d = embeddings.dim(1);
    check_pad_flags("mask_probs", pad_flags, n);
    MaskDistribution dist;
    dist.p.resize(static_cast<size_t>(n));
    dist.is_pad.assign(static_cast<size_t>(n), false);
    for (size_t i = 0; i < pad_flags.size(); ++i) dist.is_pad[i] = pad_flags[i];
    const auto& e = embeddings.values();
    const auto& wv = net.w.values();
    const auto& bv = net.b.values();
    for (int i = 0; i < n; ++i) {
        double sel = bv[0], drop = bv[1];
        for (int j = 0; j < d; ++j) {
            const double x = e[static_cast<size_t>(i) * d + j];
            sel += x * wv[static_cast<size_t>(j) * 2];
            drop += x * wv[static_cast<size_t>(j) * 2 + 1];
        }
        dist.p[static_cast<size_t>(i)] = stable_sigmoid(sel - drop);
    }
    return dist;
}

double relaxed_bernoulli(double p, double tau, double g_sel, double g_drop) {
    if (!(tau > 0.0)) throw std::invalid_argument("relaxed_bernoulli: temperature must be positive");
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("relaxed_bernoulli: p must be strictly inside (0,1)");
    const double a = (std::log(p) + g_sel) / tau;
    const double c = (std::log1p(-p) + g_drop) / tau;
    double m = stable_sigmoid(a - c);
    // sigmoid saturates to exactly 0/1 in doubles for |arg| > ~37 even though the
    // true value is interior; keep the documented open-interval contract.
    if (m >= 1.0) m = std::nextafter(1.0, 0.0);
    if (m <= 0.0) m = std::nextafter(0.0, 1.0);
    return m;
}

double relaxed_bernoulli_dp(double p, double tau, double g_sel, double g_drop) {
    const double m = relaxed_bernoulli(p, tau, g_sel, g_drop);
    return m * (1.0 - m) * (1.0 / p + 1.0 / (1.0 - p)) / tau;
}

std::vector<double> sample_masks(const MaskDistribution& dist, double tau, std::mt19937_64& rng) {
    if (!(tau > 0.0)) throw std::invalid_argument("sample_masks: temperature must be positive");
    std::vector<double> out(dist.p.size(), 0.0);
    for (size_t i = 0; i < dist.p.size(); ++i) {
        const double g_sel = rng::gumbel(rng);
        const double g_drop = rng::gumbel(rng);
        if (!dist.is_pad.empty() && dist.is_pad[i]) continue;  // forced 0
        out[i] = relaxed_bernoulli(dist.p[i], tau, g_sel, g_drop);
    }
    return out;
}

double bernoulli_entropy(const MaskDistribution& dist) {
    double h = 0.0;
    for (size_t i = 0; i < dist.p.size(); ++i) {
        if (!dist.is_pad.empty() && dist.is_pad[i]) continue;
        const double p = dist.p[i];
        h -= p * std::log(p) + (1.0 - p) * std::log(1.0 - p);
    }
    return h;
}

ad::Tensor logits_graph(const InferenceNet& net, const ad::Tensor& embeddings) {
    return ad::add(ad::matmul(embeddings, net.w), net.b);
}

ad::Tensor select_probs_graph(const InferenceNet& net, const ad::Tensor& embeddings) {
    return ad::select_column(ad::softmax(logits_graph(net, embeddings)), 0);
}

ad::Tensor sampled_masks_graph(const InferenceNet& net, const ad::Tensor& embeddings, double tau,
                               const std::vector<bool>& pad_flags, std::mt19937_64& rng) {
    if (!(tau > 0.0))
        throw std::invalid_argument("sampled_masks_graph: temperature must be positive");
    const int n = embeddings.dim(0);
    check_pad_flags("sampled_masks_graph", pad_flags, n);
    // log q + Gumbel noise, tempered softmax, select coordinate
    ad::Tensor logq = ad::log_softmax(logits_graph(net, embeddings));
    ad::Tensor noise = ad::Tensor::zeros({n, 2});
    {
        auto& nv = noise.values_mut();
        for (auto& v : nv) v = rng::gumbel(rng);
    }
    ad::Tensor tempered = ad::scalar_mul(ad::add(logq, noise), 1.0 / tau);
    ad::Tensor sel = ad::select_column(ad::softmax(tempered), 0);
    if (pad_flags.empty()) return sel;
    ad::Tensor keep = ad::Tensor::zeros({n});
    auto& kv = keep.values_mut();
    for (int i = 0; i < n; ++i) kv[static_cast<size_t>(i)] = pad_flags[static_cast<size_t>(i)] ? 0.0 : 1.0;
    return ad::mul(sel, keep);
}

ad::Tensor entropy_graph(const InferenceNet& net, const ad::Tensor& embeddings,
                         const std::vector<bool>& pad_flags) {
    const int n = embeddings.dim(0);
    check_pad_flags("entropy_graph", pad_flags, n);
    ad::Tensor logits = logits_graph(net, embeddings);
    ad::Tensor q = ad::softmax(logits);
    ad::Tensor logq = ad::log_softmax(logits);
    ad::Tensor plogp = ad::mul(q, logq);  // [n,2]
    ad::Tensor keep = ad::Tensor::full({n}, 1.0);
    if (!pad_flags.empty()) {
        auto& kv = keep.values_mut();
        for (int i = 0; i < n; ++i)
            kv[static_cast<size_t>(i)] = pad_flags[static_cast<size_t>(i)] ? 0.0 : 1.0;
    }
    return ad::scalar_mul(ad::sum(ad::mul(plogp, keep)), -1.0);
}

GlobalImportance global_importance(const InferenceNet& net, const ad::Tensor& embedding_table) {
    GlobalImportance gi;
    gi.phi = mask_probs(net, embedding_table).p;
    return gi;
}

const GlobalImportance& ImportanceCache::get(const InferenceNet& net,
                                             const ad::Tensor& embedding_table) {
    const bool fresh = valid_ && w_ver_ == net.w.version() && b_ver_ == net.b.version() &&
                       table_ver_ == embedding_table.version();
    if (!fresh) {
        cached_ = global_importance(net, embedding_table);
        w_ver_ = net.w.version();
        b_ver_ = net.b.version();
        table_ver_ = embedding_table.version();
        valid_ = true;
    }
    return cached_;
}

void export_importance(const std::string& path, const GlobalImportance& importance,
                       const corpus::Vocab& vocab) {
    if (importance.size() != vocab.size())
        throw std::invalid_argument("export_importance: size mismatch with vocabulary");
    std::vector<int> order(static_cast<size_t>(importance.size()));
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return importance(a) > importance(b); });
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (int id : order) out << vocab.word_for(id) << '\t' << importance(id) << '\n';
}

}  // namespace flat::masks
