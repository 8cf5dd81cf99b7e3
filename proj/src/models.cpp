#include "gpda/models.hpp"

#include <cmath>
#include <utility>

namespace gpda::models {

namespace {

Mat glorot_uniform(int fan_in, int fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Mat w(fan_in, fan_out);
    for (double& x : w.a) x = rng.uniform(-a, a);
    return w;
}

MlpStack make_mlp(const std::vector<int>& sizes, Rng& rng) {
    MlpStack mlp;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        DenseLayer layer;
        layer.W = ad::Tensor::param(glorot_uniform(sizes[l], sizes[l + 1], rng));
        layer.b = ad::Tensor::param(Mat(1, sizes[l + 1]));
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

}  // namespace

ad::Tensor MlpStack::forward(const ad::Tensor& x) const {
    if (x.cols() != input_dim())
        throw ShapeError("MlpStack: input width " + std::to_string(x.cols()) + " != " +
                         std::to_string(input_dim()));
    ad::Tensor h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        h = ad::add_row_broadcast(ad::matmul(h, layers[l].W), layers[l].b);
        if (l + 1 < layers.size()) h = ad::relu(h);
    }
    return h;
}

std::vector<ad::Tensor> ModelSet::parameters() const {
    std::vector<ad::Tensor> ps;
    for (const auto& [name, p] : named_parameters()) ps.push_back(p);
    return ps;
}

std::vector<std::pair<std::string, ad::Tensor>> ModelSet::named_parameters() const {
    std::vector<std::pair<std::string, ad::Tensor>> ps;
    auto add_mlp = [&ps](const char* tag, const MlpStack& m) {
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            ps.emplace_back(std::string(tag) + "." + std::to_string(l) + ".W", m.layers[l].W);
            ps.emplace_back(std::string(tag) + "." + std::to_string(l) + ".b", m.layers[l].b);
        }
    };
    add_mlp("E", extractor);
    add_mlp("Fs", source_classifier);
    add_mlp("Ft", target_classifier);
    for (std::size_t l = 0; l < gcn.filters.size(); ++l)
        ps.emplace_back("G." + std::to_string(l), gcn.filters[l]);
    add_mlp("D", domain_classifier);
    return ps;
}

void ModelSet::zero_grads() const {
    for (const auto& p : parameters()) p.zero_grad();
}

bool ModelSet::all_finite() const {
    for (const auto& p : parameters())
        if (!p.value().all_finite()) return false;
    return true;
}

ModelSet init_models(const Architecture& arch, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x6d6f64656c73ULL));
    ModelSet m;
    m.arch = arch;

    std::vector<int> e_sizes = {arch.input_dim};
    e_sizes.insert(e_sizes.end(), arch.extractor_hidden.begin(), arch.extractor_hidden.end());
    e_sizes.push_back(arch.feature_dim);
    m.extractor = make_mlp(e_sizes, rng);

    m.source_classifier = make_mlp({arch.feature_dim, arch.class_count}, rng);
    m.target_classifier = make_mlp({arch.feature_dim, arch.class_count}, rng);

    if (arch.use_gcn) {
        int in = arch.feature_dim;
        for (int out : arch.gcn_dims) {
            m.gcn.filters.push_back(ad::Tensor::param(glorot_uniform(in, out, rng)));
            in = out;
        }
    }

    std::vector<int> d_sizes = {arch.domain_input_dim()};
    d_sizes.insert(d_sizes.end(), arch.domain_hidden.begin(), arch.domain_hidden.end());
    d_sizes.push_back(1);
    m.domain_classifier = make_mlp(d_sizes, rng);
    return m;
}

ad::Tensor feature_extract(const MlpStack& extractor, const Mat& inputs) {
    return extractor.forward(ad::Tensor::constant(inputs));
}

ad::Tensor gcn_forward(const GcnHead& gcn, const ad::Tensor& x, const graph::LabelGraph& g) {
    if (gcn.filters.empty()) throw ContractError("gcn_forward: no filters");
    if (g.n != x.rows())
        throw ShapeError("gcn_forward: graph has " + std::to_string(g.n) + " nodes, features " +
                         x.value().shape_str());
    if (x.cols() != gcn.input_dim())
        throw ShapeError("gcn_forward: feature width " + std::to_string(x.cols()) +
                         " != filter input " + std::to_string(gcn.input_dim()));
    ad::Tensor p = ad::Tensor::constant(g.P);
    ad::Tensor z = x;
    for (std::size_t l = 0; l < gcn.filters.size(); ++l) {
        z = ad::matmul(ad::matmul(p, z), gcn.filters[l]);
        if (l + 1 < gcn.filters.size()) z = ad::relu(z);
    }
    return z;
}

ad::Tensor classify(const MlpStack& classifier, const ad::Tensor& feats) {
    return classifier.forward(feats);
}

ad::Tensor discriminate(const MlpStack& domain_classifier, const ad::Tensor& graph_feats,
                        double grl_coeff) {
    ad::Tensor reversed = ad::gradient_reversal(graph_feats, grl_coeff);
    return ad::sigmoid(domain_classifier.forward(reversed));
}

}  // namespace gpda::models
