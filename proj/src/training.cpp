#include "gpda/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace gpda::training {

void TrainConfig::validate() const {
    if (epochs < 0) throw ContractError("TrainConfig: epochs must be >= 0");
    if (batch_per_domain < 1) throw ContractError("TrainConfig: batch size must be >= 1");
    if (base_lr <= 0.0) throw ContractError("TrainConfig: learning rate must be positive");
    if (sgd_momentum < 0.0 || sgd_momentum >= 1.0)
        throw ContractError("TrainConfig: momentum must lie in [0, 1)");
    if (lambda1 < 0.0 || lambda2 < 0.0) throw ContractError("TrainConfig: lambdas must be >= 0");
    if (gamma_refresh_period < 1)
        throw ContractError("TrainConfig: gamma refresh period must be >= 1");
    if (pseudo_threshold <= 0.0 || pseudo_threshold > 1.0)
        throw ContractError("TrainConfig: pseudo-label threshold must lie in (0, 1]");
    if (centroid_momentum < 0.0 || centroid_momentum >= 1.0)
        throw ContractError("TrainConfig: centroid momentum must lie in [0, 1)");
    if (separation_radius <= 0.0)
        throw ContractError("TrainConfig: separation radius must be positive");
    if (grad_clip_norm <= 0.0)
        throw ContractError("TrainConfig: gradient clip norm must be positive");
    const AblationFlags f = ablation;
    if (f.baseline && !(f.normalized().no_graph && f.normalized().no_cs))
        throw ContractError("TrainConfig: baseline implies no_graph and no_cs");
}

SgdMomentum::SgdMomentum(double momentum, std::vector<ad::Tensor> params)
    : momentum_(momentum), params_(std::move(params)) {
    for (const auto& p : params_) velocity_.emplace_back(p.rows(), p.cols());
}

void SgdMomentum::step(double lr) {
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Mat& v = velocity_[k];
        Mat& theta = params_[k].value();
        const Mat& g = params_[k].grad();
        for (std::size_t i = 0; i < v.a.size(); ++i) {
            v.a[i] = momentum_ * v.a[i] + g.a[i];
            theta.a[i] -= lr * v.a[i];
        }
    }
}

double grl_coefficient(double p) {
    if (p < 0.0 || p > 1.0) throw ContractError("grl_coefficient: p must lie in [0, 1]");
    return 2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0;
}

double learning_rate(double eta0, double p) {
    if (p < 0.0 || p > 1.0) throw ContractError("learning_rate: p must lie in [0, 1]");
    return eta0 / std::pow(1.0 + 10.0 * p, 0.75);
}

JointBatch make_joint_batch(const Mat& source_x, const std::vector<int>& source_labels,
                            const Mat& target_x, const losses::ClassWeights& gamma, int classes) {
    if (source_x.rows == 0 || target_x.rows == 0)
        throw ContractError("make_joint_batch: both domains must be non-empty");
    if (static_cast<int>(source_labels.size()) != source_x.rows)
        throw ShapeError("make_joint_batch: label count mismatch");
    if (gamma.classes() != classes)
        throw ShapeError("make_joint_batch: gamma class count mismatch");
    JointBatch b;
    b.source_x = source_x;
    b.source_labels = source_labels;
    b.source_onehot = one_hot(source_labels, classes);
    b.target_x = target_x;
    b.n_s = source_x.rows;
    b.n_t = target_x.rows;
    b.domain_flags.assign(static_cast<std::size_t>(b.n_s), 1);
    b.domain_flags.insert(b.domain_flags.end(), static_cast<std::size_t>(b.n_t), 0);
    for (int l : source_labels) b.sample_weights.push_back(gamma.gamma[static_cast<std::size_t>(l)]);
    b.sample_weights.insert(b.sample_weights.end(), static_cast<std::size_t>(b.n_t), 1.0);
    return b;
}

namespace {

/// F_t(E(x)) softmax rows, forward-only.
Mat target_class_probs(const models::ModelSet& models, const Mat& inputs) {
    ad::Tensor feats = models::feature_extract(models.extractor, inputs);
    ad::Tensor logits = models::classify(models.target_classifier, feats);
    return ad::softmax_rows(logits.value());
}

/// Joint-batch row indices per (class, domain); unlabeled rows are skipped.
/// domain index 0 = source, 1 = target.
std::vector<std::vector<int>> group_rows(const graph::NodeLabels& labels,
                                         const std::vector<int>& domain_flags, int classes) {
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(2 * classes));
    for (int r = 0; r < labels.size(); ++r) {
        if (labels.kind[static_cast<std::size_t>(r)] == graph::LabelKind::unlabeled) continue;
        const int k = argmax_row(labels.rows, r);
        const int dom = domain_flags[static_cast<std::size_t>(r)] == 1 ? 0 : 1;
        groups[static_cast<std::size_t>(dom * classes + k)].push_back(r);
    }
    return groups;
}

}  // namespace

StepStructure prepare_step(const models::ModelSet& models, const JointBatch& batch,
                           const losses::CentroidBank& bank, const TrainConfig& config,
                           Rng& rng) {
    const AblationFlags flags = config.ablation.normalized();
    const int classes = models.arch.class_count;
    StepStructure s;
    s.bank_before = bank;

    if (flags.graph_active() || flags.cs_active()) {
        const Mat probs = target_class_probs(models, batch.target_x);
        const graph::NodeLabels gt = graph::ground_truth_labels(batch.source_labels, classes);
        const graph::NodeLabels hard = graph::assign_pseudo_labels(probs, config.pseudo_threshold);
        s.joint_labels = graph::concat(gt, hard);
        if (flags.graph_active()) {
            const graph::NodeLabels for_graph =
                config.soft_pseudo_labels ? graph::soft_pseudo_labels(probs) : hard;
            s.label_graph = graph::build_adjacency(graph::concat(gt, for_graph));
            s.has_graph = true;
        }
    }
    if (flags.cs_active()) {
        if (classes < 2)
            throw ContractError("centroid separation needs at least two classes");
        s.cs_offset = 1 + rng.uniform_int(classes - 1);
    }
    return s;
}

namespace {

// Re-tags numeric failures with the loss term they occurred in.
template <class Fn>
auto with_term(const char* term, Fn&& fn) {
    try {
        return fn();
    } catch (const NumericError& e) {
        throw NumericError(std::string("non-finite ") + term + ": " + e.what());
    }
}

}  // namespace

ObjectiveParts build_objective(const models::ModelSet& models, const JointBatch& batch,
                               const StepStructure& structure, const losses::ClassWeights& gamma,
                               const TrainConfig& config, double grl_coeff) {
    const AblationFlags flags = config.ablation.normalized();
    const int classes = models.arch.class_count;

    ObjectiveParts parts;
    ad::Tensor feats_s = models::feature_extract(models.extractor, batch.source_x);
    ad::Tensor feats_t = models::feature_extract(models.extractor, batch.target_x);

    parts.l_s = with_term("L_S", [&] {
        return losses::loss_source(models::classify(models.source_classifier, feats_s),
                                   batch.source_onehot);
    });
    parts.l_t = with_term("L_T", [&] {
        return losses::loss_target_weighted(models::classify(models.target_classifier, feats_s),
                                            batch.source_onehot, gamma);
    });

    ad::Tensor zero = ad::Tensor::constant(Mat(1, 1));
    parts.l_d = zero;
    parts.l_cs = zero;

    if (flags.adversarial_active()) {
        parts.l_d = with_term("L_D", [&] {
            ad::Tensor joint = ad::concat_rows(feats_s, feats_t);
            parts.graph_feats = structure.has_graph
                                    ? models::gcn_forward(models.gcn, joint, structure.label_graph)
                                    : joint;
            ad::Tensor probs = models::discriminate(models.domain_classifier, parts.graph_feats,
                                                    grl_coeff);
            return losses::loss_domain(probs, batch.domain_flags, batch.sample_weights,
                                       batch.n_s, batch.n_t);
        });
        parts.has_adversarial = true;
    }

    if (flags.cs_active() && structure.cs_offset > 0) {
        const auto& bank = structure.bank_before;
        const double m = bank.momentum;
        const auto groups = group_rows(structure.joint_labels, batch.domain_flags, classes);

        // Updated centroids; gradient flows through this batch's means only,
        // the stored averages enter as constants.
        auto centroid_expr = [&](int dom, int k, bool& seen) -> ad::Tensor {
            const auto& rows = groups[static_cast<std::size_t>(dom * classes + k)];
            const Mat& stored = dom == 0 ? bank.c_s : bank.c_t;
            const bool was_seen = (dom == 0 ? bank.seen_s : bank.seen_t)[static_cast<std::size_t>(k)] != 0;
            seen = was_seen || !rows.empty();
            if (rows.empty()) {
                Mat c(1, bank.dim);
                for (int f = 0; f < bank.dim; ++f) c(0, f) = stored(k, f);
                return ad::Tensor::constant(std::move(c));
            }
            ad::Tensor mean = ad::mean_rows_subset(parts.graph_feats, rows);
            if (!was_seen) return mean;
            Mat old_part(1, bank.dim);
            for (int f = 0; f < bank.dim; ++f) old_part(0, f) = m * stored(k, f);
            return ad::add(ad::scale(mean, 1.0 - m), ad::Tensor::constant(std::move(old_part)));
        };

        const double r2 = config.separation_radius * config.separation_radius;
        ad::Tensor acc;
        for (int k = 0; k < classes; ++k) {
            const int j = (k + structure.cs_offset) % classes;
            bool seen_s = false, seen_t = false;
            ad::Tensor cs = centroid_expr(0, k, seen_s);
            ad::Tensor ct = centroid_expr(1, j, seen_t);
            if (!seen_s || !seen_t) continue;
            ad::Tensor diff = ad::sub(cs, ct);
            ad::Tensor d2 = ad::clamp(ad::sum(ad::mul(diff, diff)), 0.0, r2);
            acc = acc.defined() ? ad::add(acc, d2) : d2;
        }
        parts.l_cs = acc.defined() ? ad::scale(acc, -1.0) : zero;
        parts.has_cs = true;
    }

    parts.total = losses::total_loss(parts.l_s, parts.l_t, parts.l_d, parts.l_cs,
                                     config.lambda1, config.lambda2);
    return parts;
}

void update_centroids(losses::CentroidBank& bank, const Mat& feats,
                      const graph::NodeLabels& labels, const std::vector<int>& domain_flags) {
    if (feats.rows != labels.size() ||
        static_cast<int>(domain_flags.size()) != labels.size())
        throw ShapeError("update_centroids: feats/labels/domains length mismatch");
    if (feats.cols != bank.dim) throw ShapeError("update_centroids: feature width mismatch");
    const auto groups = group_rows(labels, domain_flags, bank.classes);
    for (int dom = 0; dom < 2; ++dom)
        for (int k = 0; k < bank.classes; ++k) {
            const auto& rows = groups[static_cast<std::size_t>(dom * bank.classes + k)];
            if (rows.empty()) continue;
            Mat& c = dom == 0 ? bank.c_s : bank.c_t;
            std::uint8_t& seen = (dom == 0 ? bank.seen_s : bank.seen_t)[static_cast<std::size_t>(k)];
            std::vector<double> mean(static_cast<std::size_t>(bank.dim), 0.0);
            for (int r : rows)
                for (int f = 0; f < bank.dim; ++f) mean[static_cast<std::size_t>(f)] += feats(r, f);
            const double inv = 1.0 / static_cast<double>(rows.size());
            for (double& x : mean) x *= inv;
            if (!seen) {
                for (int f = 0; f < bank.dim; ++f) c(k, f) = mean[static_cast<std::size_t>(f)];
                seen = 1;
            } else {
                for (int f = 0; f < bank.dim; ++f)
                    c(k, f) = bank.momentum * c(k, f) +
                              (1.0 - bank.momentum) * mean[static_cast<std::size_t>(f)];
            }
            if (!c.all_finite()) throw NumericError("update_centroids: non-finite centroid");
        }
}

namespace {

/// Global L2 norm clip; a no-op when the norm is already inside the ceiling,
/// and zero gradients stay exactly zero either way.
void clip_gradients(const models::ModelSet& models, double max_norm) {
    double sq = 0.0;
    auto params = models.parameters();
    for (const auto& p : params)
        for (double g : p.grad().a) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    const double s = max_norm / norm;
    for (auto& p : params)
        for (double& g : p.grad().a) g *= s;
}

void check_finite_parts(const ObjectiveParts& parts) {
    const struct {
        const char* name;
        double v;
    } terms[] = {{"L_S", parts.l_s.scalar()},
                 {"L_T", parts.l_t.scalar()},
                 {"L_D", parts.l_d.scalar()},
                 {"L_CS", parts.l_cs.scalar()},
                 {"total", parts.total.scalar()}};
    for (const auto& t : terms)
        if (!std::isfinite(t.v))
            throw NumericError(std::string("train_step: non-finite loss term ") + t.name +
                               " = " + std::to_string(t.v));
}

}  // namespace

losses::LossBreakdown train_step(TrainState& state, const Mat& source_x,
                                 const std::vector<int>& source_labels, const Mat& target_x) {
    const TrainConfig& cfg = state.config;
    const JointBatch batch =
        make_joint_batch(source_x, source_labels, target_x, state.gamma,
                         state.models.arch.class_count);
    const StepStructure structure =
        prepare_step(state.models, batch, state.bank, cfg, state.rng);

    ad::Tape tape;
    ad::TapeScope scope(tape);
    const ObjectiveParts parts = build_objective(state.models, batch, structure, state.gamma,
                                                 cfg, grl_coefficient(state.progress));
    check_finite_parts(parts);

    state.models.zero_grads();
    tape.backward(parts.total);
    clip_gradients(state.models, cfg.grad_clip_norm);
    state.optimizer.step(learning_rate(cfg.base_lr, state.progress));
    if (!state.models.all_finite())
        throw NumericError("train_step: non-finite parameter after update");

    if (parts.has_cs)
        update_centroids(state.bank, parts.graph_feats.value(), structure.joint_labels,
                         batch.domain_flags);

    return losses::LossBreakdown::from_parts(parts.l_s.scalar(), parts.l_t.scalar(),
                                             parts.l_d.scalar(), parts.l_cs.scalar(),
                                             cfg.lambda1, cfg.lambda2);
}

losses::ClassWeights refresh_gamma(TrainState& state, const Mat& target_inputs) {
    const AblationFlags flags = state.config.ablation.normalized();
    const int classes = state.models.arch.class_count;
    if (!flags.gamma_active()) {
        state.gamma = losses::ClassWeights::ones(classes);
        return state.gamma;
    }
    if (target_inputs.rows == 0) throw ContractError("refresh_gamma: empty target set");
    ad::Tensor feats = models::feature_extract(state.models.extractor, target_inputs);
    ad::Tensor logits = models::classify(state.models.source_classifier, feats);
    state.gamma = losses::estimate_gamma(ad::softmax_rows(logits.value()),
                                         state.config.normalize_gamma);
    return state.gamma;
}

double evaluate_target_accuracy(const models::ModelSet& models, const data::LabeledDataset& ds) {
    if (ds.size() == 0) throw ContractError("evaluate_target_accuracy: empty dataset");
    const Mat probs = target_class_probs(models, ds.samples);
    int correct = 0;
    for (int i = 0; i < ds.size(); ++i)
        if (argmax_row(probs, i) == ds.labels[static_cast<std::size_t>(i)]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

namespace {

Mat gather_rows(const Mat& src, const std::vector<int>& ids, int begin, int count) {
    Mat out(count, src.cols);
    const int n = static_cast<int>(ids.size());
    for (int i = 0; i < count; ++i) {
        const int r = ids[static_cast<std::size_t>((begin + i) % n)];
        for (int j = 0; j < src.cols; ++j) out(i, j) = src(r, j);
    }
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& ids,
                               int begin, int count) {
    std::vector<int> out(static_cast<std::size_t>(count));
    const int n = static_cast<int>(ids.size());
    for (int i = 0; i < count; ++i)
        out[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(
            ids[static_cast<std::size_t>((begin + i) % n)])];
    return out;
}

}  // namespace

TrainState init_state(const TrainConfig& config, const data::PdaTask& task) {
    TrainConfig cfg = config;
    cfg.ablation = config.ablation.normalized();
    cfg.validate();
    if (task.source.size() == 0 || task.target.size() == 0)
        throw ContractError("fit: both domains must be non-empty");
    {
        std::vector<bool> present(static_cast<std::size_t>(task.class_count), false);
        for (int l : task.source.labels) present[static_cast<std::size_t>(l)] = true;
        for (int c = 0; c < task.class_count; ++c)
            if (!present[static_cast<std::size_t>(c)])
                throw ContractError("fit: source class " + std::to_string(c) + " has no samples");
    }

    models::Architecture arch = cfg.arch;
    arch.input_dim = task.source.dim();
    arch.class_count = task.class_count;
    arch.use_gcn = cfg.ablation.graph_active();
    cfg.arch = arch;

    TrainState state(derive_seed(cfg.seed, 0x747261696eULL));
    state.config = cfg;
    state.models = models::init_models(arch, cfg.seed);
    state.bank = losses::CentroidBank(arch.class_count, arch.graph_feature_dim(),
                                      cfg.centroid_momentum);
    state.gamma = losses::ClassWeights::ones(arch.class_count);
    state.optimizer = SgdMomentum(cfg.sgd_momentum, state.models.parameters());
    return state;
}

TrainState fit(const TrainConfig& config, const data::PdaTask& task) {
    TrainState state = init_state(config, task);
    const TrainConfig& cfg = state.config;

    const int n_s = task.source.size();
    const int n_t = task.target.size();
    const int nb = cfg.batch_per_domain;
    const int steps_per_epoch = (std::max(n_s, n_t) + nb - 1) / nb;
    const long total_steps = static_cast<long>(cfg.epochs) * steps_per_epoch;

    std::vector<int> idx_s(static_cast<std::size_t>(n_s));
    std::vector<int> idx_t(static_cast<std::size_t>(n_t));
    std::iota(idx_s.begin(), idx_s.end(), 0);
    std::iota(idx_t.begin(), idx_t.end(), 0);

    long global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch % cfg.gamma_refresh_period == 0) refresh_gamma(state, task.target.samples);
        state.rng.shuffle(idx_s);
        state.rng.shuffle(idx_t);

        losses::LossBreakdown sums;
        for (int step = 0; step < steps_per_epoch; ++step) {
            state.progress = static_cast<double>(global_step) / static_cast<double>(total_steps);
            const Mat sx = gather_rows(task.source.samples, idx_s, step * nb, nb);
            const std::vector<int> sy = gather_labels(task.source.labels, idx_s, step * nb, nb);
            const Mat tx = gather_rows(task.target.samples, idx_t, step * nb, nb);
            const losses::LossBreakdown rec = train_step(state, sx, sy, tx);
            sums.l_s += rec.l_s;
            sums.l_t += rec.l_t;
            sums.l_d += rec.l_d;
            sums.l_cs += rec.l_cs;
            ++global_step;
        }
        const double inv = 1.0 / static_cast<double>(steps_per_epoch);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.losses = losses::LossBreakdown::from_parts(sums.l_s * inv, sums.l_t * inv,
                                                       sums.l_d * inv, sums.l_cs * inv,
                                                       cfg.lambda1, cfg.lambda2);
        rec.target_accuracy = evaluate_target_accuracy(state.models, task.target);
        rec.gamma = state.gamma.gamma;
        state.history.push_back(std::move(rec));
    }
    return state;
}

}  // namespace gpda::training
