#pragma once

#include <cstdint>
#include <vector>

#include "gpda/data.hpp"
#include "gpda/graph.hpp"
#include "gpda/losses.hpp"
#include "gpda/models.hpp"

namespace gpda::training {

struct AblationFlags {
    bool no_graph = false;
    bool no_cs = false;
    bool baseline = false;
    bool source_only = false;
    bool uniform_gamma = false;

    /// Applies the implications (baseline drops graph and L_CS; source-only
    /// drops every adaptation term).
    AblationFlags normalized() const {
        AblationFlags f = *this;
        if (f.baseline) {
            f.no_graph = true;
            f.no_cs = true;
        }
        if (f.source_only) {
            f.no_graph = true;
            f.no_cs = true;
            f.uniform_gamma = true;
        }
        return f;
    }

    bool adversarial_active() const { return !source_only; }
    bool graph_active() const { return !no_graph && !source_only; }
    bool cs_active() const { return !no_cs && !source_only; }
    bool gamma_active() const { return !uniform_gamma && !source_only; }
};

struct TrainConfig {
    int epochs = 150;
    int batch_per_domain = 32;
    double base_lr = 0.05;
    double sgd_momentum = 0.9;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    int gamma_refresh_period = 1;  // epochs
    double pseudo_threshold = 0.8;
    double centroid_momentum = 0.7;
    // Pairs farther apart than this stop contributing gradient; without a
    // ceiling the separation term self-amplifies (its pull grows with the
    // distance it creates) and the run diverges.
    double separation_radius = 3.0;
    // Global L2 gradient-norm ceiling applied before each SGD step. Plain
    // MLPs carry no implicit damping (no normalization layers, no weight
    // decay), so the adversarial game needs an explicit step bound.
    double grad_clip_norm = 5.0;
    bool normalize_gamma = true;
    bool soft_pseudo_labels = false;
    std::uint64_t seed = 0;
    AblationFlags ablation;
    models::Architecture arch;  // input_dim/class_count/use_gcn resolved by fit

    void validate() const;
};

/// SGD with momentum: v <- m v + g; theta <- theta - lr v.
class SgdMomentum {
  public:
    SgdMomentum() = default;
    SgdMomentum(double momentum, std::vector<ad::Tensor> params);
    void step(double lr);

  private:
    double momentum_ = 0.9;
    std::vector<ad::Tensor> params_;
    std::vector<Mat> velocity_;
};

struct EpochRecord {
    int epoch = 0;
    losses::LossBreakdown losses;  // mean over the epoch's steps
    double target_accuracy = 0.0;
    std::vector<double> gamma;
};

struct TrainState {
    double progress = 0.0;  // p in [0,1], monotone over fit
    models::ModelSet models;
    losses::CentroidBank bank;
    losses::ClassWeights gamma;
    std::vector<EpochRecord> history;
    SgdMomentum optimizer;
    Rng rng;
    TrainConfig config;  // resolved (flags normalized, arch filled in)

    explicit TrainState(std::uint64_t seed) : rng(seed) {}
};

/// Joint mini-batch: source rows first, then target rows.
struct JointBatch {
    Mat source_x;
    std::vector<int> source_labels;
    Mat source_onehot;
    Mat target_x;
    std::vector<int> domain_flags;       // 1 source, 0 target
    std::vector<double> sample_weights;  // gamma_{y_i} on source rows, 1 on target rows
    int n_s = 0;
    int n_t = 0;
};

JointBatch make_joint_batch(const Mat& source_x, const std::vector<int>& source_labels,
                            const Mat& target_x, const losses::ClassWeights& gamma, int classes);

/// Discrete per-step structure: pseudo-labels, the label graph, the centroid
/// offset and the pre-step bank snapshot. Held fixed while the objective is
/// differentiated.
struct StepStructure {
    graph::NodeLabels joint_labels;  // ground truth source + hard pseudo target
    graph::LabelGraph label_graph;
    bool has_graph = false;
    int cs_offset = 0;  // 0 when L_CS is inactive this step
    losses::CentroidBank bank_before;
};

StepStructure prepare_step(const models::ModelSet& models, const JointBatch& batch,
                           const losses::CentroidBank& bank, const TrainConfig& config, Rng& rng);

struct ObjectiveParts {
    ad::Tensor l_s, l_t, l_d, l_cs, total;
    ad::Tensor graph_feats;  // features feeding D and the centroids; undefined if unused
    bool has_adversarial = false;
    bool has_cs = false;
};

/// Builds the full objective on the current tape (or forward-only when no
/// tape is active). The discrete structure is taken as given.
ObjectiveParts build_objective(const models::ModelSet& models, const JointBatch& batch,
                               const StepStructure& structure, const losses::ClassWeights& gamma,
                               const TrainConfig& config, double grl_coeff);

/// DANN-style adversarial schedule: 2/(1+exp(-10 p)) - 1.
double grl_coefficient(double p);

/// DANN-style decay: eta0 / (1 + 10 p)^0.75.
double learning_rate(double eta0, double p);

/// Moving-average update for every (class, domain) present in the batch;
/// first sighting adopts the batch mean outright.
void update_centroids(losses::CentroidBank& bank, const Mat& feats,
                      const graph::NodeLabels& labels, const std::vector<int>& domain_flags);

/// One optimization step over a paired mini-batch.
losses::LossBreakdown train_step(TrainState& state, const Mat& source_x,
                                 const std::vector<int>& source_labels, const Mat& target_x);

/// Recomputes gamma over the full target set (not just a batch).
losses::ClassWeights refresh_gamma(TrainState& state, const Mat& target_inputs);

double evaluate_target_accuracy(const models::ModelSet& models, const data::LabeledDataset& ds);

/// Validates the config against the task and builds the initial state
/// (models, centroid bank, gamma, optimizer).
TrainState init_state(const TrainConfig& config, const data::PdaTask& task);

TrainState fit(const TrainConfig& config, const data::PdaTask& task);

}  // namespace gpda::training
