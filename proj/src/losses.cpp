#include "gpda/losses.hpp"

#include <cmath>
#include <string>

namespace gpda::losses {

ad::Tensor loss_source(const ad::Tensor& logits, const Mat& labels_onehot) {
    if (logits.rows() < 1) throw ContractError("loss_source: empty batch");
    std::vector<double> unit(static_cast<std::size_t>(logits.rows()), 1.0);
    return ad::softmax_cross_entropy(logits, labels_onehot, unit);
}

ad::Tensor loss_target_weighted(const ad::Tensor& logits, const Mat& labels_onehot,
                                const ClassWeights& gamma) {
    const int n = logits.rows();
    if (n < 1) throw ContractError("loss_target_weighted: empty batch");
    if (gamma.classes() != logits.cols())
        throw ShapeError("loss_target_weighted: gamma has " + std::to_string(gamma.classes()) +
                         " classes, logits " + std::to_string(logits.cols()));
    for (double g : gamma.gamma)
        if (!std::isfinite(g)) throw NumericError("loss_target_weighted: non-finite gamma");
    // w_i = <gamma, y_i>; equals gamma[y_i] for one-hot labels
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int c = 0; c < labels_onehot.cols; ++c)
            s += gamma.gamma[static_cast<std::size_t>(c)] * labels_onehot(i, c);
        w[static_cast<std::size_t>(i)] = s;
    }
    return ad::softmax_cross_entropy(logits, labels_onehot, w);
}

ClassWeights estimate_gamma(const Mat& target_probs, bool normalize) {
    const int n = target_probs.rows;
    const int c = target_probs.cols;
    if (n == 0) throw ContractError("estimate_gamma: empty target set");
    ClassWeights out;
    out.gamma.assign(static_cast<std::size_t>(c), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) out.gamma[static_cast<std::size_t>(j)] += target_probs(i, j);
    for (double& g : out.gamma) g /= static_cast<double>(n);
    if (normalize) {
        double mx = 0.0;
        for (double g : out.gamma) mx = std::max(mx, g);
        if (mx > 0.0)
            for (double& g : out.gamma) g /= mx;
    }
    return out;
}

ad::Tensor loss_domain(const ad::Tensor& domain_probs, const std::vector<int>& domain_labels,
                       const std::vector<double>& sample_weights, int n_s, int n_t) {
    const int n = domain_probs.rows();
    if (static_cast<int>(domain_labels.size()) != n ||
        static_cast<int>(sample_weights.size()) != n)
        throw ShapeError("loss_domain: labels/weights length mismatch");
    if (n_s < 1 || n_t < 1) throw ContractError("loss_domain: both domains must be non-empty");
    std::vector<double> targets(static_cast<std::size_t>(n));
    std::vector<double> coeffs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int d = domain_labels[static_cast<std::size_t>(i)];
        if (d != 0 && d != 1) throw ContractError("loss_domain: domain label must be 0 or 1");
        targets[static_cast<std::size_t>(i)] = static_cast<double>(d);
        coeffs[static_cast<std::size_t>(i)] =
            sample_weights[static_cast<std::size_t>(i)] /
            static_cast<double>(d == 1 ? n_s : n_t);
    }
    return ad::bce_sum(domain_probs, targets, coeffs);
}

double loss_centroid_separation(const CentroidBank& bank, int offset) {
    if (offset < 1 || offset >= bank.classes)
        throw ContractError("loss_centroid_separation: offset " + std::to_string(offset) +
                            " outside [1, " + std::to_string(bank.classes - 1) + "]");
    double total = 0.0;
    for (int k = 0; k < bank.classes; ++k) {
        const int j = (k + offset) % bank.classes;
        if (!bank.seen_s[static_cast<std::size_t>(k)] || !bank.seen_t[static_cast<std::size_t>(j)])
            continue;
        double d2 = 0.0;
        for (int f = 0; f < bank.dim; ++f) {
            const double d = bank.c_s(k, f) - bank.c_t(j, f);
            d2 += d * d;
        }
        total -= d2;
    }
    return total;
}

ad::Tensor total_loss(const ad::Tensor& l_s, const ad::Tensor& l_t, const ad::Tensor& l_d,
                      const ad::Tensor& l_cs, double lambda1, double lambda2) {
    return ad::add(ad::add(l_s, l_t),
                   ad::add(ad::scale(l_d, lambda1), ad::scale(l_cs, lambda2)));
}

}  // namespace gpda::losses
