#include "gpda/graph.hpp"

#include <cmath>
#include <string>

namespace gpda::graph {

LabelGraph build_adjacency(const NodeLabels& labels) {
    const int n = labels.size();
    const int c = labels.classes();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j)
            if (labels.rows(i, j) < 0.0)
                throw ContractError("build_adjacency: negative label entry at row " +
                                    std::to_string(i));

    LabelGraph g;
    g.n = n;
    g.A = Mat(n, n);
    // A_ij = sum_c y_ic y_jc, mirrored so symmetry is bitwise
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < c; ++k) s += labels.rows(i, k) * labels.rows(j, k);
            g.A(i, j) = s;
            g.A(j, i) = s;
        }

    g.A_tilde = g.A;
    for (int i = 0; i < n; ++i) g.A_tilde(i, i) += 1.0;

    g.d_tilde.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += g.A_tilde(i, j);
        g.d_tilde[static_cast<std::size_t>(i)] = s;  // >= 1 thanks to the self-loop
    }

    g.P = Mat(n, n);
    // A_ij / sqrt(d_i d_j): exact for perfect-square degree products, which
    // keeps P = I bitwise when every node sits in its own class
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = g.A_tilde(i, j) /
                             std::sqrt(g.d_tilde[static_cast<std::size_t>(i)] *
                                       g.d_tilde[static_cast<std::size_t>(j)]);
            g.P(i, j) = v;
            g.P(j, i) = v;
        }
    return g;
}

namespace {

void check_simplex_row(const Mat& probs, int i) {
    double s = 0.0;
    for (int j = 0; j < probs.cols; ++j) {
        if (probs(i, j) < 0.0)
            throw ContractError("pseudo labels: negative probability in row " + std::to_string(i));
        s += probs(i, j);
    }
    if (std::abs(s - 1.0) > 1e-9)
        throw ContractError("pseudo labels: row " + std::to_string(i) + " sums to " +
                            std::to_string(s));
}

}  // namespace

NodeLabels assign_pseudo_labels(const Mat& probs, double threshold) {
    if (threshold <= 0.0 || threshold > 1.0)
        throw ContractError("assign_pseudo_labels: threshold must lie in (0, 1]");
    NodeLabels out;
    out.rows = Mat(probs.rows, probs.cols);
    out.kind.assign(static_cast<std::size_t>(probs.rows), LabelKind::unlabeled);
    for (int i = 0; i < probs.rows; ++i) {
        check_simplex_row(probs, i);
        const int best = argmax_row(probs, i);
        if (probs(i, best) >= threshold) {
            out.rows(i, best) = 1.0;
            out.kind[static_cast<std::size_t>(i)] = LabelKind::pseudo;
        }
    }
    return out;
}

NodeLabels soft_pseudo_labels(const Mat& probs) {
    NodeLabels out;
    out.rows = probs;
    out.kind.assign(static_cast<std::size_t>(probs.rows), LabelKind::pseudo);
    for (int i = 0; i < probs.rows; ++i) check_simplex_row(probs, i);
    return out;
}

NodeLabels ground_truth_labels(const std::vector<int>& class_ids, int classes) {
    NodeLabels out;
    out.rows = one_hot(class_ids, classes);
    out.kind.assign(class_ids.size(), LabelKind::ground_truth);
    return out;
}

NodeLabels concat(const NodeLabels& a, const NodeLabels& b) {
    if (a.classes() != b.classes())
        throw ShapeError("NodeLabels concat: class counts disagree: " +
                         std::to_string(a.classes()) + " vs " + std::to_string(b.classes()));
    NodeLabels out;
    out.rows = Mat(a.size() + b.size(), a.classes());
    std::copy(a.rows.a.begin(), a.rows.a.end(), out.rows.a.begin());
    std::copy(b.rows.a.begin(), b.rows.a.end(), out.rows.a.begin() + a.rows.a.size());
    out.kind = a.kind;
    out.kind.insert(out.kind.end(), b.kind.begin(), b.kind.end());
    return out;
}

}  // namespace gpda::graph
