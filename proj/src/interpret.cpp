#include "flat/interpret.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "flat/ops.hpp"

namespace flat::interpret {

namespace {

/// Freezes a parameter set for the duration of an attribution: gradients flow
/// only through the input leaf, never into the model.
struct FreezeParams {
    std::vector<ad::Tensor> params;
    explicit FreezeParams(std::vector<ad::Tensor> p) : params(std::move(p)) {
        for (auto& t : params) t.set_tracked(false);
    }
    ~FreezeParams() {
        for (auto& t : params) t.set_tracked(true);
    }
};

double target_logit(const std::function<ad::Tensor(const ad::Tensor&)>& logit_of,
                    const ad::Tensor& point, int target) {
    ad::NoTapeScope pure;
    const ad::Tensor logits = logit_of(point);
    return logits.values()[static_cast<size_t>(target)];
}

}  // namespace

AttributionVector integrated_gradients_fn(
    const std::function<ad::Tensor(const ad::Tensor&)>& logit_of, const ad::Tensor& input_point,
    int target_class, int steps) {
    if (steps < 1) throw std::invalid_argument("integrated_gradients: steps must be >= 1");
    if (input_point.ndim() != 2)
        throw ad::ShapeError("integrated_gradients", ad::shape_str(input_point.shape()));
    const int n = input_point.dim(0), d = input_point.dim(1);
    const auto& end = input_point.values();

    // zero baseline: the path is t * input, t = k/m
    std::vector<double> grad_sum(end.size(), 0.0);
    for (int k = 1; k <= steps; ++k) {
        const double t = static_cast<double>(k) / steps;
        std::vector<double> point(end.size());
        for (size_t i = 0; i < end.size(); ++i) point[i] = t * end[i];
        ad::Tensor leaf = ad::Tensor::from({n, d}, std::move(point));
        leaf.set_tracked(true);

        ad::Tape tape;
        ad::TapeScope scope(tape);
        ad::Tensor logits = logit_of(leaf);
        if (logits.ndim() != 2 || logits.dim(0) != 1)
            throw ad::ShapeError("integrated_gradients logits", ad::shape_str(logits.shape()));
        if (target_class < 0 || target_class >= logits.dim(1))
            throw std::invalid_argument("integrated_gradients: target class out of range");
        tape.backward(ad::select_column(logits, target_class));

        const auto& g = leaf.grad();
        for (size_t i = 0; i < g.size(); ++i) grad_sum[i] += g[i];
    }

    AttributionVector out;
    out.target_class = target_class;
    out.attributions.assign(static_cast<size_t>(n), 0.0);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double a = 0.0;
        for (int j = 0; j < d; ++j) {
            const size_t idx = static_cast<size_t>(i) * d + j;
            a += end[idx] * grad_sum[idx] / steps;  // (e - b) with b = 0
        }
        out.attributions[static_cast<size_t>(i)] = a;
        total += a;
    }

    const double f_end = target_logit(logit_of, input_point, target_class);
    const double f_base = target_logit(logit_of, ad::Tensor::zeros({n, d}), target_class);
    out.completeness_residual = std::abs(total - (f_end - f_base));
    return out;
}

namespace {

/// Core attribution with the parameter set already untracked by the caller.
AttributionVector ig_over_cnn_frozen(const model::TextCnn& net, std::span<const int> token_ids,
                                     const std::vector<double>& scale, const IgConfig& config) {
    const int n = static_cast<int>(token_ids.size());
    const int d = net.dim;

    // the deployed predictor's input: per-token embedding rows, pre-scaled
    std::vector<double> point(static_cast<size_t>(n) * d, 0.0);
    const auto& table = net.embedding.values();
    for (int i = 0; i < n; ++i) {
        const int id = token_ids[static_cast<size_t>(i)];
        for (int j = 0; j < d; ++j)
            point[static_cast<size_t>(i) * d + j] =
                scale[static_cast<size_t>(i)] * table[static_cast<size_t>(id) * d + j];
    }
    ad::Tensor input_point = ad::Tensor::from({n, d}, std::move(point));

    int target;
    if (config.target == IgTarget::predicted) {
        ad::NoTapeScope pure;
        target = model::output_from_logits(net.logits_from_embeddings(input_point)).predicted;
    } else {
        if (config.gold_label < 0)
            throw std::invalid_argument("integrated_gradients: gold target requested without a label");
        target = config.gold_label;
    }

    auto logit_of = [&net](const ad::Tensor& leaf) { return net.logits_from_embeddings(leaf); };
    auto out = integrated_gradients_fn(logit_of, input_point, target, config.steps);
    out.token_ids.assign(token_ids.begin(), token_ids.end());
    return out;
}

AttributionVector ig_over_cnn(const model::TextCnn& net, std::span<const int> token_ids,
                              const std::vector<double>& scale, const IgConfig& config) {
    FreezeParams frozen(net.params());
    return ig_over_cnn_frozen(net, token_ids, scale, config);
}

std::vector<double> deploy_scale(std::span<const int> token_ids,
                                 const masks::GlobalImportance* importance) {
    std::vector<double> scale(token_ids.size());
    for (size_t i = 0; i < token_ids.size(); ++i)
        scale[i] = token_ids[i] == corpus::Vocab::kPad ? 0.0
                   : importance                        ? (*importance)(token_ids[i])
                                                       : 1.0;
    return scale;
}

}  // namespace

AttributionVector integrated_gradients(const model::TextCnn& net,
                                       const masks::GlobalImportance& phi,
                                       std::span<const int> token_ids, const IgConfig& config) {
    return ig_over_cnn(net, token_ids, deploy_scale(token_ids, &phi), config);
}

AttributionVector integrated_gradients_plain(const model::TextCnn& net,
                                             std::span<const int> token_ids,
                                             const IgConfig& config) {
    return ig_over_cnn(net, token_ids, deploy_scale(token_ids, nullptr), config);
}

std::vector<AttributionVector> attribute_dataset(const model::TextCnn& net,
                                                 const masks::GlobalImportance* importance,
                                                 const corpus::Dataset& examples,
                                                 const IgConfig& config, int jobs) {
    if (jobs < 1) throw std::invalid_argument("attribute_dataset: jobs must be >= 1");
    std::vector<AttributionVector> out(examples.size());
    if (examples.empty()) return out;

    FreezeParams frozen(net.params());  // one freeze for the whole sweep
    auto one = [&](size_t i) {
        IgConfig c = config;
        if (c.target == IgTarget::gold) c.gold_label = examples[i].label;
        out[i] = ig_over_cnn_frozen(net, examples[i].ids,
                                    deploy_scale(examples[i].ids, importance), c);
    };

    if (jobs == 1 || examples.size() < 2) {
        for (size_t i = 0; i < examples.size(); ++i) one(i);
        return out;
    }

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < examples.size(); i = next.fetch_add(1)) one(i);
    };
    std::vector<std::thread> pool;
    const size_t n_threads = std::min<size_t>(static_cast<size_t>(jobs), examples.size());
    pool.reserve(n_threads);
    for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return out;
}

void dump_attributions(const std::string& path, const corpus::Dataset& examples,
                       const std::vector<AttributionVector>& attributions,
                       const corpus::Vocab& vocab) {
    if (examples.size() != attributions.size())
        throw std::invalid_argument("dump_attributions: examples/attributions size mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_attributions: cannot open " + path);
    for (size_t i = 0; i < attributions.size(); ++i) {
        const auto& a = attributions[i];
        // pads stay in: tokens[k] must align with attributions[k]
        std::vector<std::string> tokens;
        for (int id : examples[i].ids) tokens.push_back(vocab.word_for(id));
        nlohmann::json line{{"id", i},
                            {"tokens", tokens},
                            {"attributions", a.attributions},
                            {"target", a.target_class},
                            {"residual", a.completeness_residual}};
        out << line.dump() << "\n";
    }
}

}  // namespace flat::interpret
