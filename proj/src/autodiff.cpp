#include "gpda/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace gpda::ad {

namespace {

thread_local Tape* g_current_tape = nullptr;

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (g_current_tape == nullptr) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

// Input node id as seen by the current tape. Tensors recorded by some other
// tape behave like leaves here.
int input_id(const Tensor& t) {
    if (t.data()->tape == g_current_tape) return t.node_id();
    return -1;
}

void accum(const std::shared_ptr<TensorData>& d, const Mat& contribution) {
    if (!d->requires_grad) return;
    for (std::size_t i = 0; i < d->grad.a.size(); ++i) d->grad.a[i] += contribution.a[i];
}

}  // namespace

Tape* Tape::current() { return g_current_tape; }

TapeScope::TapeScope(Tape& t) : prev_(g_current_tape) { g_current_tape = &t; }
TapeScope::~TapeScope() { g_current_tape = prev_; }

int Tape::record(const char* op, std::vector<int> input_ids, const Tensor& output,
                 std::function<void()> backward_fn) {
    const int id = static_cast<int>(nodes_.size());
    auto d = output.data();
    d->node_id = id;
    d->tape = this;
    d->requires_grad = true;
    nodes_.push_back(TapeNode{op, std::move(input_ids), id, d, std::move(backward_fn)});
    return id;
}

void Tape::backward(const Tensor& root) {
    if (root.rows() != 1 || root.cols() != 1)
        throw ContractError("backward: root must be scalar, got " + root.value().shape_str());
    // Interior adjoints are per-sweep; only leaf grads persist and accumulate.
    for (auto& n : nodes_) n.output->grad.fill(0.0);
    root.data()->grad(0, 0) += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

void backward(const Tensor& root) {
    Tape* t = Tape::current();
    if (t == nullptr) throw ContractError("backward: no active tape");
    t->backward(root);
}

namespace {

Tensor make_output(Mat value) { return Tensor::constant(std::move(value)); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions disagree: " + a.value().shape_str() + " vs " +
                         b.value().shape_str());
    Tensor out = make_output(mat_mul(a.value(), b.value()));
    if (should_record({&a, &b})) {
        auto ad = a.data(), bd = b.data(), od = out.data();
        g_current_tape->record("matmul", {input_id(a), input_id(b)}, out, [ad, bd, od] {
            const Mat& g = od->grad;
            if (ad->requires_grad) accum(ad, mat_mul_nt(g, bd->value));
            if (bd->requires_grad) accum(bd, mat_mul_tn(ad->value, g));
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.value().same_shape(b.value()))
        throw ShapeError("add: shapes disagree: " + a.value().shape_str() + " vs " +
                         b.value().shape_str());
    Mat v = a.value();
    for (std::size_t i = 0; i < v.a.size(); ++i) v.a[i] += b.value().a[i];
    Tensor out = make_output(std::move(v));
    if (should_record({&a, &b})) {
        auto ad = a.data(), bd = b.data(), od = out.data();
        g_current_tape->record("add", {input_id(a), input_id(b)}, out, [ad, bd, od] {
            accum(ad, od->grad);
            accum(bd, od->grad);
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.value().same_shape(b.value()))
        throw ShapeError("sub: shapes disagree: " + a.value().shape_str() + " vs " +
                         b.value().shape_str());
    Mat v = a.value();
    for (std::size_t i = 0; i < v.a.size(); ++i) v.a[i] -= b.value().a[i];
    Tensor out = make_output(std::move(v));
    if (should_record({&a, &b})) {
        auto ad = a.data(), bd = b.data(), od = out.data();
        g_current_tape->record("sub", {input_id(a), input_id(b)}, out, [ad, bd, od] {
            accum(ad, od->grad);
            if (bd->requires_grad) {
                Mat neg = od->grad;
                for (double& x : neg.a) x = -x;
                accum(bd, neg);
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.value().same_shape(b.value()))
        throw ShapeError("mul: shapes disagree: " + a.value().shape_str() + " vs " +
                         b.value().shape_str());
    Mat v = a.value();
    for (std::size_t i = 0; i < v.a.size(); ++i) v.a[i] *= b.value().a[i];
    Tensor out = make_output(std::move(v));
    if (should_record({&a, &b})) {
        auto ad = a.data(), bd = b.data(), od = out.data();
        g_current_tape->record("mul", {input_id(a), input_id(b)}, out, [ad, bd, od] {
            const Mat& g = od->grad;
            if (ad->requires_grad) {
                Mat c = g;
                for (std::size_t i = 0; i < c.a.size(); ++i) c.a[i] *= bd->value.a[i];
                accum(ad, c);
            }
            if (bd->requires_grad) {
                Mat c = g;
                for (std::size_t i = 0; i < c.a.size(); ++i) c.a[i] *= ad->value.a[i];
                accum(bd, c);
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Mat v = a.value();
    for (double& x : v.a) x *= c;
    Tensor out = make_output(std::move(v));
    if (should_record({&a})) {
        auto ad = a.data(), od = out.data();
        g_current_tape->record("scale", {input_id(a)}, out, [ad, od, c] {
            Mat g = od->grad;
            for (double& x : g.a) x *= c;
            accum(ad, g);
        });
    }
    return out;
}

Tensor add_row_broadcast(const Tensor& x, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != x.cols())
        throw ShapeError("add_row_broadcast: row is " + row.value().shape_str() +
                         ", expected 1x" + std::to_string(x.cols()));
    Mat v = x.value();
    for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < v.cols; ++j) v(i, j) += row.value()(0, j);
    Tensor out = make_output(std::move(v));
    if (should_record({&x, &row})) {
        auto xd = x.data(), rd = row.data(), od = out.data();
        g_current_tape->record("add_row_broadcast", {input_id(x), input_id(row)}, out,
                               [xd, rd, od] {
                                   const Mat& g = od->grad;
                                   accum(xd, g);
                                   if (rd->requires_grad) {
                                       Mat c(1, g.cols);
                                       for (int i = 0; i < g.rows; ++i)
                                           for (int j = 0; j < g.cols; ++j) c(0, j) += g(i, j);
                                       accum(rd, c);
                                   }
                               });
    }
    return out;
}

Tensor relu(const Tensor& a) {
    Mat v = a.value();
    for (double& x : v.a) x = x > 0.0 ? x : 0.0;
    Tensor out = make_output(std::move(v));
    if (should_record({&a})) {
        auto ad = a.data(), od = out.data();
        g_current_tape->record("relu", {input_id(a)}, out, [ad, od] {
            Mat g = od->grad;
            for (std::size_t i = 0; i < g.a.size(); ++i)
                if (ad->value.a[i] <= 0.0) g.a[i] = 0.0;
            accum(ad, g);
        });
    }
    return out;
}

Tensor sigmoid(const Tensor& a) {
    // Output saturated to [1e-7, 1-1e-7]: float64 rounds the logistic to
    // exactly 0/1 past |x| ~ 37, and the backward below uses the stored
    // output, so saturation also keeps sigmoid->bce chains equal to p - t
    // instead of dying at the extremes.
    constexpr double kSat = 1e-7;
    Mat v = a.value();
    for (double& x : v.a) {
        if (x >= 0.0) {
            x = 1.0 / (1.0 + std::exp(-x));
        } else {
            double e = std::exp(x);
            x = e / (1.0 + e);
        }
        x = std::min(1.0 - kSat, std::max(kSat, x));
    }
    Tensor out = make_output(std::move(v));
    if (should_record({&a})) {
        auto ad = a.data(), od = out.data();
        g_current_tape->record("sigmoid", {input_id(a)}, out, [ad, od] {
            Mat g = od->grad;
            for (std::size_t i = 0; i < g.a.size(); ++i) {
                double s = od->value.a[i];
                g.a[i] *= s * (1.0 - s);
            }
            accum(ad, g);
        });
    }
    return out;
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw ContractError("clamp: lo > hi");
    Mat v = a.value();
    for (double& x : v.a) x = std::min(hi, std::max(lo, x));
    Tensor out = make_output(std::move(v));
    if (should_record({&a})) {
        auto ad = a.data(), od = out.data();
        g_current_tape->record("clamp", {input_id(a)}, out, [ad, od, lo, hi] {
            Mat g = od->grad;
            for (std::size_t i = 0; i < g.a.size(); ++i) {
                const double x = ad->value.a[i];
                if (x <= lo || x >= hi) g.a[i] = 0.0;
            }
            accum(ad, g);
        });
    }
    return out;
}

Tensor gradient_reversal(const Tensor& a, double coeff) {
    if (coeff < 0.0) throw ContractError("gradient_reversal: coeff must be >= 0");
    Tensor out = make_output(a.value());
    if (should_record({&a})) {
        auto ad = a.data(), od = out.data();
        g_current_tape->record("gradient_reversal", {input_id(a)}, out, [ad, od, coeff] {
            Mat g = od->grad;
            for (double& x : g.a) x *= -coeff;
            accum(ad, g);
        });
    }
    return out;
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double x : a.value().a) s += x;
    Mat v(1, 1);
    v(0, 0) = s;
    Tensor out = make_output(std::move(v));
    if (should_record({&a})) {
        auto ad = a.data(), od = out.data();
        g_current_tape->record("sum", {input_id(a)}, out, [ad, od] {
            Mat c(ad->value.rows, ad->value.cols, od->grad(0, 0));
            accum(ad, c);
        });
    }
    return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols())
        throw ShapeError("concat_rows: column counts disagree: " + a.value().shape_str() +
                         " vs " + b.value().shape_str());
    Mat v(a.rows() + b.rows(), a.cols());
    std::copy(a.value().a.begin(), a.value().a.end(), v.a.begin());
    std::copy(b.value().a.begin(), b.value().a.end(), v.a.begin() + a.value().a.size());
    Tensor out = make_output(std::move(v));
    if (should_record({&a, &b})) {
        auto ad = a.data(), bd = b.data(), od = out.data();
        g_current_tape->record("concat_rows", {input_id(a), input_id(b)}, out, [ad, bd, od] {
            const Mat& g = od->grad;
            if (ad->requires_grad) {
                Mat c(ad->value.rows, ad->value.cols);
                std::copy(g.a.begin(), g.a.begin() + c.a.size(), c.a.begin());
                accum(ad, c);
            }
            if (bd->requires_grad) {
                Mat c(bd->value.rows, bd->value.cols);
                std::copy(g.a.begin() + ad->value.a.size(), g.a.end(), c.a.begin());
                accum(bd, c);
            }
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& a, int begin, int end) {
    if (begin < 0 || end > a.rows() || begin > end)
        throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for " + a.value().shape_str());
    Mat v(end - begin, a.cols());
    std::copy(a.value().a.begin() + static_cast<std::size_t>(begin) * a.cols(),
              a.value().a.begin() + static_cast<std::size_t>(end) * a.cols(), v.a.begin());
    Tensor out = make_output(std::move(v));
    if (should_record({&a})) {
        auto ad = a.data(), od = out.data();
        g_current_tape->record("slice_rows", {input_id(a)}, out, [ad, od, begin] {
            Mat c(ad->value.rows, ad->value.cols);
            std::copy(od->grad.a.begin(), od->grad.a.end(),
                      c.a.begin() + static_cast<std::size_t>(begin) * c.cols);
            accum(ad, c);
        });
    }
    return out;
}

Tensor mean_rows_subset(const Tensor& a, std::vector<int> row_ids) {
    if (row_ids.empty()) throw ContractError("mean_rows_subset: empty row set");
    for (int r : row_ids)
        if (r < 0 || r >= a.rows())
            throw ContractError("mean_rows_subset: row " + std::to_string(r) + " out of range");
    Mat v(1, a.cols());
    for (int r : row_ids)
        for (int j = 0; j < a.cols(); ++j) v(0, j) += a.value()(r, j);
    const double inv = 1.0 / static_cast<double>(row_ids.size());
    for (double& x : v.a) x *= inv;
    Tensor out = make_output(std::move(v));
    if (should_record({&a})) {
        auto ad = a.data(), od = out.data();
        g_current_tape->record("mean_rows_subset", {input_id(a)}, out,
                               [ad, od, rows = std::move(row_ids), inv] {
                                   Mat c(ad->value.rows, ad->value.cols);
                                   for (int r : rows)
                                       for (int j = 0; j < c.cols; ++j)
                                           c(r, j) += od->grad(0, j) * inv;
                                   accum(ad, c);
                               });
    }
    return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const Mat& labels,
                             const std::vector<double>& weights) {
    const int n = logits.rows(), c = logits.cols();
    if (!labels.same_shape(logits.value()))
        throw ShapeError("softmax_cross_entropy: labels " + labels.shape_str() +
                         " vs logits " + logits.value().shape_str());
    if (static_cast<int>(weights.size()) != n)
        throw ShapeError("softmax_cross_entropy: " + std::to_string(weights.size()) +
                         " weights for " + std::to_string(n) + " rows");
    if (n == 0) throw ContractError("softmax_cross_entropy: empty batch");
    if (!logits.value().all_finite())
        throw NumericError("softmax_cross_entropy: non-finite logits");
    for (int i = 0; i < n; ++i) {
        double rs = 0.0;
        for (int j = 0; j < c; ++j) {
            if (labels(i, j) < 0.0)
                throw ContractError("softmax_cross_entropy: negative label entry");
            rs += labels(i, j);
        }
        if (std::abs(rs - 1.0) > 1e-9)
            throw ContractError("softmax_cross_entropy: label row " + std::to_string(i) +
                                " sums to " + std::to_string(rs));
        if (weights[i] < 0.0) throw ContractError("softmax_cross_entropy: negative weight");
    }

    Mat probs = softmax_rows(logits.value());
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        // log-softmax recomputed stably; -sum_c y * log s
        double mx = logits.value()(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, logits.value()(i, j));
        double lse = 0.0;
        for (int j = 0; j < c; ++j) lse += std::exp(logits.value()(i, j) - mx);
        lse = std::log(lse) + mx;
        double ce = 0.0;
        for (int j = 0; j < c; ++j)
            if (labels(i, j) != 0.0) ce += labels(i, j) * (lse - logits.value()(i, j));
        loss += weights[i] * ce;
    }
    Mat v(1, 1);
    v(0, 0) = loss * inv_n;
    Tensor out = make_output(std::move(v));
    if (should_record({&logits})) {
        auto ld = logits.data(), od = out.data();
        g_current_tape->record(
            "softmax_cross_entropy", {input_id(logits)}, out,
            [ld, od, probs = std::move(probs), labels, weights, inv_n] {
                const double g = od->grad(0, 0);
                Mat c(ld->value.rows, ld->value.cols);
                for (int i = 0; i < c.rows; ++i) {
                    const double w = g * weights[static_cast<std::size_t>(i)] * inv_n;
                    for (int j = 0; j < c.cols; ++j)
                        c(i, j) = w * (probs(i, j) - labels(i, j));
                }
                accum(ld, c);
            });
    }
    return out;
}

Tensor bce_sum(const Tensor& probs, const std::vector<double>& targets,
               const std::vector<double>& coeffs) {
    const int n = probs.rows();
    if (probs.cols() != 1)
        throw ShapeError("bce_sum: expected n x 1 probabilities, got " +
                         probs.value().shape_str());
    if (static_cast<int>(targets.size()) != n || static_cast<int>(coeffs.size()) != n)
        throw ShapeError("bce_sum: targets/coeffs length mismatch");
    constexpr double kEps = 1e-7;  // the log is undefined at the boundary
    double loss = 0.0;
    std::vector<double> clamped(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double p = probs.value()(i, 0);
        if (!std::isfinite(p)) throw NumericError("bce_sum: non-finite probability");
        p = std::min(1.0 - kEps, std::max(kEps, p));
        clamped[static_cast<std::size_t>(i)] = p;
        loss -= coeffs[static_cast<std::size_t>(i)] *
                (targets[static_cast<std::size_t>(i)] * std::log(p) +
                 (1.0 - targets[static_cast<std::size_t>(i)]) * std::log(1.0 - p));
    }
    Mat v(1, 1);
    v(0, 0) = loss;
    Tensor out = make_output(std::move(v));
    if (should_record({&probs})) {
        auto pd = probs.data(), od = out.data();
        g_current_tape->record("bce_sum", {input_id(probs)}, out,
                               [pd, od, targets, coeffs, clamped = std::move(clamped)] {
                                   const double g = od->grad(0, 0);
                                   Mat c(pd->value.rows, 1);
                                   for (int i = 0; i < c.rows; ++i) {
                                       const double raw = pd->value(i, 0);
                                       if (raw <= 1e-7 || raw >= 1.0 - 1e-7) continue;  // clamped flat
                                       const double p = clamped[static_cast<std::size_t>(i)];
                                       const double t = targets[static_cast<std::size_t>(i)];
                                       c(i, 0) = g * coeffs[static_cast<std::size_t>(i)] *
                                                 (-t / p + (1.0 - t) / (1.0 - p));
                                   }
                                   accum(pd, c);
                               });
    }
    return out;
}

Tensor detach(const Tensor& a) { return Tensor::constant(a.value()); }

Mat softmax_rows(const Mat& logits) {
    Mat out = logits;
    for (int i = 0; i < out.rows; ++i) {
        double mx = out(i, 0);
        for (int j = 1; j < out.cols; ++j) mx = std::max(mx, out(i, j));
        double s = 0.0;
        for (int j = 0; j < out.cols; ++j) {
            out(i, j) = std::exp(out(i, j) - mx);
            s += out(i, j);
        }
        for (int j = 0; j < out.cols; ++j) out(i, j) /= s;
    }
    return out;
}

}  // namespace gpda::ad
