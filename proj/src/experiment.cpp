#include "gpda/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gpda/checkpoint.hpp"

namespace gpda::experiment {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

training::AblationFlags mode_flags(const std::string& mode) {
    training::AblationFlags f;
    if (mode == "gpda") {
        // everything on
    } else if (mode == "no_cs") {
        f.no_cs = true;
    } else if (mode == "no_graph") {
        f.no_graph = true;
    } else if (mode == "baseline") {
        f.baseline = true;
    } else if (mode == "source_only") {
        f.source_only = true;
    } else if (mode == "dann_like") {
        f.uniform_gamma = true;
        f.no_graph = true;
        f.no_cs = true;
    } else {
        throw ContractError("unknown mode '" + mode +
                            "' (expected gpda|no_cs|no_graph|baseline|source_only|dann_like)");
    }
    return f.normalized();
}

data::PdaTask build_task(const ExperimentSpec& spec, std::uint64_t seed) {
    if (spec.synthetic.has_value() == spec.digit.has_value())
        throw ContractError("experiment: exactly one of synthetic/digit task must be given");
    if (spec.synthetic) {
        const auto& s = *spec.synthetic;
        return data::gen_synthetic_pda(s.c_s, s.c_t, s.per_class, s.shift, seed, s.dim);
    }
    const auto& d = *spec.digit;
    data::LabeledDataset source = data::load_idx(d.source_images, d.source_labels);
    data::LabeledDataset target = data::load_idx(d.target_images, d.target_labels);
    source.domain = "source";
    target.domain = "target";
    // resolution mismatch (USPS 16x16 vs MNIST 28x28): upsize the smaller side
    if (source.dim() != target.dim()) {
        auto side = [](int d_) {
            const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d_))));
            if (s * s != d_)
                throw FormatError("digit task: sample width " + std::to_string(d_) +
                                  " is not a square image");
            return s;
        };
        const int ss = side(source.dim()), ts = side(target.dim());
        if (ss < ts)
            source = data::resize_bilinear(source, ss, ss, ts, ts);
        else
            target = data::resize_bilinear(target, ts, ts, ss, ss);
    }
    data::PdaTask task;
    task.class_count = std::max(source.class_count, target.class_count);
    source.class_count = task.class_count;
    target.class_count = task.class_count;
    task.target = data::make_partial_target(target, d.keep);
    task.source = std::move(source);
    std::vector<bool> kept(static_cast<std::size_t>(task.class_count), false);
    for (int k : d.keep) kept[static_cast<std::size_t>(k)] = true;
    for (int c = 0; c < task.class_count; ++c)
        (kept[static_cast<std::size_t>(c)] ? task.shared_classes : task.outlier_classes).push_back(c);
    return task;
}

void emit_metrics(const std::vector<training::EpochRecord>& history, int classes,
                  const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError(path + ": cannot open for writing");
    os << "epoch,L_S,L_T,L_D,L_CS,total,target_accuracy";
    for (int c = 0; c < classes; ++c) os << ",gamma_" << c;
    os << "\n";
    for (const auto& rec : history) {
        os << rec.epoch << "," << g17(rec.losses.l_s) << "," << g17(rec.losses.l_t) << ","
           << g17(rec.losses.l_d) << "," << g17(rec.losses.l_cs) << "," << g17(rec.losses.total)
           << "," << g17(rec.target_accuracy);
        for (double g : rec.gamma) os << "," << g17(g);
        os << "\n";
    }
    if (!os) throw FormatError(path + ": write failure");
}

void emit_summary(const Summary& summary, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError(path + ": cannot open for writing");
    os << "mode,seed,final_accuracy,final_accuracy_std\n";
    for (const auto& r : summary.runs)
        os << r.mode << "," << r.seed << "," << g17(r.final_accuracy) << ",\n";
    for (const auto& a : summary.aggregates)
        os << a.mode << ",aggregate," << g17(a.mean) << "," << g17(a.stddev) << "\n";
    if (!os) throw FormatError(path + ": write failure");
}

double mode_mean_accuracy(const Summary& summary, const std::string& mode) {
    for (const auto& a : summary.aggregates)
        if (a.mode == mode) return a.mean;
    throw ContractError("mode_mean_accuracy: no aggregate for mode '" + mode + "'");
}

namespace {

void aggregate(Summary& summary, const std::vector<std::string>& modes) {
    summary.aggregates.clear();
    for (const auto& mode : modes) {
        std::vector<double> accs;
        for (const auto& r : summary.runs)
            if (r.mode == mode) accs.push_back(r.final_accuracy);
        if (accs.empty()) continue;
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= static_cast<double>(accs.size());
        double var = 0.0;
        if (accs.size() > 1) {
            for (double a : accs) var += (a - mean) * (a - mean);
            var /= static_cast<double>(accs.size() - 1);
        }
        summary.aggregates.push_back({mode, mean, std::sqrt(var)});
    }
}

}  // namespace

Summary run_experiment(const ExperimentSpec& spec) {
    if (spec.seeds.empty()) throw ContractError("experiment: seeds must be non-empty");
    if (spec.modes.empty()) throw ContractError("experiment: modes must be non-empty");
    for (const auto& m : spec.modes) mode_flags(m);  // validate early

    std::filesystem::create_directories(spec.out_dir);
    const auto out = [&spec](const std::string& name) {
        return (std::filesystem::path(spec.out_dir) / name).string();
    };

    Summary summary;
    try {
        for (std::uint64_t seed : spec.seeds) {
            const data::PdaTask task = build_task(spec, seed);
            for (const auto& mode : spec.modes) {
                training::TrainConfig cfg = spec.config;
                cfg.seed = seed;
                cfg.ablation = mode_flags(mode);
                training::TrainState state = training::fit(cfg, task);
                const double acc = training::evaluate_target_accuracy(state.models, task.target);
                const std::string stem = mode + "_seed" + std::to_string(seed);
                emit_metrics(state.history, task.class_count, out("history_" + stem + ".csv"));
                if (spec.save_models)
                    models::save_checkpoint(state.models, seed, out("model_" + stem + ".bin"),
                                            out("model_" + stem + ".json"));
                summary.runs.push_back({mode, seed, acc});
            }
        }
    } catch (...) {
        // flush what completed before propagating the abort
        aggregate(summary, spec.modes);
        emit_summary(summary, out("summary.csv"));
        throw;
    }
    aggregate(summary, spec.modes);
    emit_summary(summary, out("summary.csv"));
    return summary;
}

}  // namespace gpda::experiment
