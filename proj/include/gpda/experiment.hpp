#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gpda/data.hpp"
#include "gpda/training.hpp"

namespace gpda::experiment {

struct SyntheticTaskSpec {
    int c_s = 6;
    int c_t = 3;
    int per_class = 200;
    int dim = 2;
    data::SyntheticShift shift{25.0, 1.5, 0.0, 0.6};
};

struct DigitTaskSpec {
    std::string source_images;
    std::string source_labels;
    std::string target_images;
    std::string target_labels;
    std::vector<int> keep = {0, 1, 2, 3, 4};
};

struct ExperimentSpec {
    std::optional<SyntheticTaskSpec> synthetic;
    std::optional<DigitTaskSpec> digit;
    training::TrainConfig config;
    std::vector<std::string> modes = {"gpda"};
    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = "gpda_out";
    bool save_models = false;
};

/// Table 1/2 protocol rows: gpda, no_cs, no_graph, baseline, source_only,
/// dann_like (uniform gamma + no graph + no L_CS).
training::AblationFlags mode_flags(const std::string& mode);

/// Synthetic tasks are regenerated per run seed (independent replications);
/// digit tasks are fixed data, the seed varies only the training run.
data::PdaTask build_task(const ExperimentSpec& spec, std::uint64_t seed);

struct RunResult {
    std::string mode;
    std::uint64_t seed = 0;
    double final_accuracy = 0.0;
};

struct ModeAggregate {
    std::string mode;
    double mean = 0.0;
    double stddev = 0.0;  // sample std over seeds, 0 for a single seed
};

struct Summary {
    std::vector<RunResult> runs;
    std::vector<ModeAggregate> aggregates;
};

/// Fits every (seed, mode) pair, writes one history CSV per run plus
/// summary.csv. Partial results are flushed before a training abort
/// propagates.
Summary run_experiment(const ExperimentSpec& spec);

/// Per-epoch metrics CSV: epoch, L_S, L_T, L_D, L_CS, total, target_accuracy,
/// gamma_0..gamma_{classes-1}. Values at full round-trip precision.
void emit_metrics(const std::vector<training::EpochRecord>& history, int classes,
                  const std::string& path);

void emit_summary(const Summary& summary, const std::string& path);

double mode_mean_accuracy(const Summary& summary, const std::string& mode);

}  // namespace gpda::experiment
