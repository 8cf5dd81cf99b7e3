#pragma once

#include <string>
#include <vector>

#include "gpda/autodiff.hpp"
#include "gpda/graph.hpp"

namespace gpda::models {

/// Layer widths of the five networks. Defaults are the desk-scale shapes for
/// the synthetic tasks; the digit runs override input_dim/class_count.
struct Architecture {
    int input_dim = 2;
    int class_count = 6;
    std::vector<int> extractor_hidden = {128};
    int feature_dim = 64;
    std::vector<int> gcn_dims = {64, 64};
    std::vector<int> domain_hidden = {32};
    bool use_gcn = true;

    int domain_input_dim() const { return use_gcn ? gcn_dims.back() : feature_dim; }
    int graph_feature_dim() const { return domain_input_dim(); }
};

struct DenseLayer {
    ad::Tensor W;  // in x out
    ad::Tensor b;  // 1 x out
};

/// Plain MLP, rectifier on hidden layers, linear output.
struct MlpStack {
    std::vector<DenseLayer> layers;

    ad::Tensor forward(const ad::Tensor& x) const;
    int input_dim() const { return layers.front().W.rows(); }
    int output_dim() const { return layers.back().W.cols(); }
};

/// Stack of GCN filters, rectifier between layers, none after the last.
/// Per layer: Z = act(P X Theta).
struct GcnHead {
    std::vector<ad::Tensor> filters;  // F_l x F_{l+1}

    int input_dim() const { return filters.front().rows(); }
    int output_dim() const { return filters.back().cols(); }
};

/// The five parametric components: feature extractor E, GCN head G,
/// classifiers F_s / F_t, domain classifier D.
struct ModelSet {
    MlpStack extractor;
    MlpStack source_classifier;
    MlpStack target_classifier;
    GcnHead gcn;  // empty when the architecture drops the graph
    MlpStack domain_classifier;
    Architecture arch;

    std::vector<ad::Tensor> parameters() const;
    std::vector<std::pair<std::string, ad::Tensor>> named_parameters() const;
    void zero_grads() const;
    bool all_finite() const;
};

/// Glorot-uniform weights, zero biases; deterministic per seed.
ModelSet init_models(const Architecture& arch, std::uint64_t seed);

/// X_i = E(x_i), stacked row-wise.
ad::Tensor feature_extract(const MlpStack& extractor, const Mat& inputs);

/// Layerwise Z = relu(P X Theta), no activation after the last filter.
ad::Tensor gcn_forward(const GcnHead& gcn, const ad::Tensor& x, const graph::LabelGraph& g);

/// Raw logits; softmax happens inside the losses.
ad::Tensor classify(const MlpStack& classifier, const ad::Tensor& feats);

/// Gradient reversal, then D, then logistic squashing to (0,1).
ad::Tensor discriminate(const MlpStack& domain_classifier, const ad::Tensor& graph_feats,
                        double grl_coeff);

}  // namespace gpda::models
