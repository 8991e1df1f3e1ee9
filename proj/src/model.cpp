#include "flat/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "flat/corpus.hpp"
#include "flat/ops.hpp"
#include "flat/rng.hpp"

namespace flat::model {

TextCnn TextCnn::init(int vocab_size, int dim, int filters, int num_classes,
                      std::mt19937_64& rng, std::vector<int> widths) {
    if (vocab_size < 2 || dim < 1 || filters < 1 || num_classes < 2 || widths.empty())
        throw std::invalid_argument("TextCnn::init: bad configuration");
    TextCnn net;
    net.widths = std::move(widths);
    net.num_classes = num_classes;
    net.filters = filters;
    net.dim = dim;
    std::normal_distribution<double> init(0.0, 0.1);
    net.embedding = ad::Tensor::zeros({vocab_size, dim});
    {
        auto& v = net.embedding.values_mut();
        for (int w = 1; w < vocab_size; ++w)  // PAD row stays zero
            for (int j = 0; j < dim; ++j) v[static_cast<size_t>(w) * dim + j] = init(rng);
    }
    for (int w : net.widths) {
        ad::Tensor cw = ad::Tensor::zeros({filters, w, dim});
        for (auto& v : cw.values_mut()) v = init(rng);
        net.conv_w.push_back(cw);
        net.conv_b.push_back(ad::Tensor::zeros({filters}));
    }
    const int pooled = static_cast<int>(net.widths.size()) * filters;
    net.head_w = ad::Tensor::zeros({pooled, num_classes});
    for (auto& v : net.head_w.values_mut()) v = init(rng);
    net.head_b = ad::Tensor::zeros({num_classes});
    for (auto& p : net.params()) p.set_tracked(true);
    return net;
}

std::vector<ad::Tensor> TextCnn::params() const {
    std::vector<ad::Tensor> out = {embedding};
    for (size_t i = 0; i < conv_w.size(); ++i) {
        out.push_back(conv_w[i]);
        out.push_back(conv_b[i]);
    }
    out.push_back(head_w);
    out.push_back(head_b);
    return out;
}

int TextCnn::max_width() const { return *std::max_element(widths.begin(), widths.end()); }

ad::Tensor TextCnn::logits_from_embeddings(const ad::Tensor& embeddings) const {
    if (embeddings.ndim() != 2 || embeddings.dim(1) != dim)
        throw ad::ShapeError("model forward", ad::shape_str(embeddings.shape()));
    if (embeddings.dim(0) < max_width())
        throw std::invalid_argument("model forward: sequence length " +
                                    std::to_string(embeddings.dim(0)) + " shorter than widest filter " +
                                    std::to_string(max_width()) + "; pad upstream");
    std::vector<ad::Tensor> pooled;
    pooled.reserve(widths.size());
    for (size_t i = 0; i < widths.size(); ++i) {
        ad::Tensor conv = ad::add(ad::conv1d(embeddings, conv_w[i]), conv_b[i]);
        pooled.push_back(ad::max_pool_over_time(ad::relu(conv)));  // [1,F]
    }
    ad::Tensor features = ad::concat(pooled, 1);  // [1, widths*F]
    return ad::add(ad::matmul(features, head_w), head_b);
}

ad::Tensor TextCnn::logits_graph(std::span<const int> token_ids, const ad::Tensor& scale) const {
    ad::Tensor emb = ad::embedding_lookup(embedding, token_ids);
    if (scale.defined()) emb = ad::mul(emb, scale);
    return logits_from_embeddings(emb);
}

ModelOutput output_from_logits(const ad::Tensor& logits) {
    ad::NoTapeScope pure;
    ModelOutput out;
    out.logits = logits.values();
    const ad::Tensor probs = ad::softmax(logits);
    out.probabilities = probs.values();
    out.predicted = static_cast<int>(std::max_element(out.probabilities.begin(),
                                                      out.probabilities.end()) -
                                     out.probabilities.begin());
    return out;
}

ModelOutput forward(const TextCnn& net, std::span<const int> token_ids,
                    std::span<const double> mask_values) {
    ad::NoTapeScope pure;  // inference never grows a caller's graph
    ad::Tensor scale;
    if (!mask_values.empty()) {
        if (mask_values.size() != token_ids.size())
            throw std::invalid_argument("forward: mask length does not match token length");
        for (double m : mask_values)
            if (!(m >= 0.0 && m <= 1.0))
                throw std::invalid_argument("forward: mask values must lie in [0,1]");
        scale = ad::Tensor::from({static_cast<int>(mask_values.size())},
                                 std::vector<double>(mask_values.begin(), mask_values.end()));
    }
    return output_from_logits(net.logits_graph(token_ids, scale));
}

ModelOutput predict_with_importance(const TextCnn& net, const masks::GlobalImportance& importance,
                                    std::span<const int> token_ids) {
    std::vector<double> mask(token_ids.size());
    for (size_t i = 0; i < token_ids.size(); ++i)
        mask[i] = token_ids[i] == corpus::Vocab::kPad ? 0.0 : importance(token_ids[i]);
    return forward(net, token_ids, mask);
}

// ---- checkpoint serialization ----

namespace {

constexpr char kMagic[8] = {'F', 'L', 'A', 'T', 'C', 'K', 'P', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_tensor(std::ostream& out, const std::string& name, const ad::Tensor& t) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) write_u32(out, static_cast<std::uint32_t>(t.dim(i)));
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.values().size() * sizeof(double)));
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
std::string read_string(std::istream& in) {
    const auto n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}
std::pair<std::string, ad::Tensor> read_tensor(std::istream& in) {
    std::string name = read_string(in);
    const auto nd = read_u32(in);
    std::vector<int> shape(nd);
    std::size_t numel = 1;
    for (auto& d : shape) {
        d = static_cast<int>(read_u32(in));
        numel *= static_cast<std::size_t>(d);
    }
    std::vector<double> values(numel);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    return {std::move(name), ad::Tensor::from(std::move(shape), std::move(values))};
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kMagic, sizeof kMagic);
    write_u32(out, 1);  // format version
    write_u64(out, ckpt.vocab_hash);
    write_string(out, ckpt.kind);
    write_string(out, ckpt.config_json);
    // model geometry
    write_u32(out, static_cast<std::uint32_t>(ckpt.net.num_classes));
    write_u32(out, static_cast<std::uint32_t>(ckpt.net.filters));
    write_u32(out, static_cast<std::uint32_t>(ckpt.net.dim));
    write_u32(out, static_cast<std::uint32_t>(ckpt.net.widths.size()));
    for (int w : ckpt.net.widths) write_u32(out, static_cast<std::uint32_t>(w));

    std::vector<std::pair<std::string, ad::Tensor>> tensors;
    tensors.emplace_back("embedding", ckpt.net.embedding);
    for (size_t i = 0; i < ckpt.net.widths.size(); ++i) {
        const auto suffix = std::to_string(ckpt.net.widths[i]);
        tensors.emplace_back("conv_w" + suffix, ckpt.net.conv_w[i]);
        tensors.emplace_back("conv_b" + suffix, ckpt.net.conv_b[i]);
    }
    tensors.emplace_back("head_w", ckpt.net.head_w);
    tensors.emplace_back("head_b", ckpt.net.head_b);
    if (ckpt.inference_net) {
        tensors.emplace_back("inference_w", ckpt.inference_net->w);
        tensors.emplace_back("inference_b", ckpt.inference_net->b);
    }
    if (ckpt.group_scales.defined()) {
        tensors.emplace_back("group_scales", ckpt.group_scales);
        ad::Tensor assign = ad::Tensor::zeros({static_cast<int>(ckpt.group_of.size())});
        auto& av = assign.values_mut();
        for (size_t i = 0; i < ckpt.group_of.size(); ++i) av[i] = ckpt.group_of[i];
        tensors.emplace_back("group_of", assign);
    }
    write_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) write_tensor(out, name, t);
    if (!out) throw std::runtime_error("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error(path + ": not a checkpoint file");
    const auto version = read_u32(in);
    if (version != 1)
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    Checkpoint ckpt;
    ckpt.vocab_hash = read_u64(in);
    if (expected_vocab_hash != 0 && ckpt.vocab_hash != expected_vocab_hash)
        throw std::runtime_error(path +
                                 ": vocabulary hash mismatch — checkpoint was trained against a "
                                 "different vocabulary");
    ckpt.kind = read_string(in);
    ckpt.config_json = read_string(in);
    ckpt.net.num_classes = static_cast<int>(read_u32(in));
    ckpt.net.filters = static_cast<int>(read_u32(in));
    ckpt.net.dim = static_cast<int>(read_u32(in));
    const auto n_widths = read_u32(in);
    ckpt.net.widths.resize(n_widths);
    for (auto& w : ckpt.net.widths) w = static_cast<int>(read_u32(in));
    ckpt.net.conv_w.resize(n_widths);
    ckpt.net.conv_b.resize(n_widths);

    const auto count = read_u32(in);
    ad::Tensor inf_w, inf_b;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, t] = read_tensor(in);
        if (!in) throw std::runtime_error(path + ": truncated checkpoint");
        if (name == "embedding") {
            ckpt.net.embedding = t;
        } else if (name.rfind("conv_w", 0) == 0 || name.rfind("conv_b", 0) == 0) {
            const int width = std::stoi(name.substr(6));
            const auto it = std::find(ckpt.net.widths.begin(), ckpt.net.widths.end(), width);
            if (it == ckpt.net.widths.end())
                throw std::runtime_error(path + ": tensor " + name + " for unknown width");
            const auto idx = static_cast<size_t>(it - ckpt.net.widths.begin());
            (name[5] == 'w' ? ckpt.net.conv_w : ckpt.net.conv_b)[idx] = t;
        } else if (name == "head_w") {
            ckpt.net.head_w = t;
        } else if (name == "head_b") {
            ckpt.net.head_b = t;
        } else if (name == "inference_w") {
            inf_w = t;
        } else if (name == "inference_b") {
            inf_b = t;
        } else if (name == "group_scales") {
            ckpt.group_scales = t;
        } else if (name == "group_of") {
            ckpt.group_of.resize(t.values().size());
            for (size_t j = 0; j < ckpt.group_of.size(); ++j)
                ckpt.group_of[j] = static_cast<int>(t.values()[j]);
        } else {
            throw std::runtime_error(path + ": unknown tensor '" + name + "'");
        }
    }
    for (size_t i = 0; i < ckpt.net.widths.size(); ++i)
        if (!ckpt.net.conv_w[i].defined() || !ckpt.net.conv_b[i].defined())
            throw std::runtime_error(path + ": missing conv tensors");
    if (!ckpt.net.embedding.defined() || !ckpt.net.head_w.defined() || !ckpt.net.head_b.defined())
        throw std::runtime_error(path + ": missing model tensors");
    if (inf_w.defined() != inf_b.defined())
        throw std::runtime_error(path + ": incomplete inference net");
    if (inf_w.defined()) {
        masks::InferenceNet inf;
        inf.w = inf_w;
        inf.b = inf_b;
        ckpt.inference_net = inf;
    }
    for (auto& p : ckpt.net.params()) p.set_tracked(true);
    if (ckpt.inference_net)
        for (auto& p : ckpt.inference_net->params()) p.set_tracked(true);
    return ckpt;
}

}  // namespace flat::model
