#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpda/common.hpp"

namespace gpda::data {

struct LabeledDataset {
    Mat samples;              // n x d
    std::vector<int> labels;  // class ids in [0, class_count)
    std::string domain;       // tag: "source" / "target"
    int class_count = 0;

    int size() const { return samples.rows; }
    int dim() const { return samples.cols; }
};

/// A partial task: the target label space is a strict subset of the source's.
struct PdaTask {
    LabeledDataset source;
    LabeledDataset target;
    std::vector<int> shared_classes;
    std::vector<int> outlier_classes;
    int class_count = 0;
};

struct SyntheticShift {
    double rotation_deg = 0.0;
    double translate_x = 0.0;
    double translate_y = 0.0;
    double noise_sigma = 1.0;
};

/// Source classes are isotropic Gaussians centered at c_s equally spaced
/// points on a radius-5 circle in the first two coordinates; the target draws
/// from the first c_t generators and applies the rigid shift. Deterministic
/// per seed.
PdaTask gen_synthetic_pda(int c_s, int c_t, int per_class_n, const SyntheticShift& shift,
                          std::uint64_t seed, int dim = 2);

/// IDX image+label pair (big-endian magic 0x803 / 0x801); pixels scaled to
/// [0,1] and flattened row-wise.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Filter to the kept classes. Labels keep their original ids.
LabeledDataset make_partial_target(const LabeledDataset& ds, const std::vector<int>& keep);

/// Bilinear resize of every sample, treated as an h0 x w0 image.
LabeledDataset resize_bilinear(const LabeledDataset& ds, int h0, int w0, int h1, int w1);

/// CSV export: x0..x{d-1}, label, domain.
void export_task_csv(const PdaTask& task, const std::string& path);

}  // namespace gpda::data
