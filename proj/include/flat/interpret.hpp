#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flat/corpus.hpp"
#include "flat/masks.hpp"
#include "flat/model.hpp"

namespace flat::interpret {

enum class IgTarget { predicted, gold };

struct IgConfig {
    int steps = 50;                        // Riemann steps m >= 1
    IgTarget target = IgTarget::predicted;
    int gold_label = -1;                   // required when target == gold
};

struct AttributionVector {
    std::vector<double> attributions;  // per position, PAD = 0
    std::vector<int> token_ids;
    int target_class = 0;
    /// |sum(attributions) - (f(input) - f(baseline))|; shrinks as steps grow.
    double completeness_residual = 0.0;
};

/// Path integral of d logit_target / d input from the zero baseline to
/// input_point ([n,d]), right-Riemann with config.steps steps. logit_of must
/// build a differentiable [1,C] logits graph from a tracked [n,d] leaf.
AttributionVector integrated_gradients_fn(
    const std::function<ad::Tensor(const ad::Tensor&)>& logit_of, const ad::Tensor& input_point,
    int target_class, int steps);

/// Attribution for the deployed predictor: the input point is the embedding
/// sequence scaled by global importance (PAD rows zero), the target defaults
/// to the model's own prediction.
AttributionVector integrated_gradients(const model::TextCnn& net,
                                       const masks::GlobalImportance& phi,
                                       std::span<const int> token_ids, const IgConfig& config);

/// Same, for a model deployed without masks (scale 1 everywhere, PAD 0).
AttributionVector integrated_gradients_plain(const model::TextCnn& net,
                                             std::span<const int> token_ids,
                                             const IgConfig& config);

/// Attribution for every example, parallel across examples (the model is a
/// frozen read-only snapshot for the whole sweep). importance == nullptr
/// deploys without masks. With target == gold, each example's own label is
/// the target and config.gold_label is ignored.
std::vector<AttributionVector> attribute_dataset(const model::TextCnn& net,
                                                 const masks::GlobalImportance* importance,
                                                 const corpus::Dataset& examples,
                                                 const IgConfig& config, int jobs = 1);

/// JSON lines {id, tokens, attributions, target, residual}.
void dump_attributions(const std::string& path, const corpus::Dataset& examples,
                       const std::vector<AttributionVector>& attributions,
                       const corpus::Vocab& vocab);

}  // namespace flat::interpret
