#include "gpda/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace gpda::data {

namespace {

constexpr double kCircleRadius = 5.0;
constexpr double kPi = 3.14159265358979323846;

}  // namespace

PdaTask gen_synthetic_pda(int c_s, int c_t, int per_class_n, const SyntheticShift& shift,
                          std::uint64_t seed, int dim) {
    if (c_s < 1 || c_t < 1 || c_t > c_s)
        throw ContractError("gen_synthetic_pda: need 1 <= C_t <= C_s");
    if (per_class_n < 1) throw ContractError("gen_synthetic_pda: per_class_n must be >= 1");
    if (shift.noise_sigma <= 0.0)
        throw ContractError("gen_synthetic_pda: noise sigma must be positive");
    if (dim < 2) throw ContractError("gen_synthetic_pda: dim must be >= 2");

    // class centers on the circle, embedded in the first two coordinates
    std::vector<std::vector<double>> centers(static_cast<std::size_t>(c_s),
                                             std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    for (int k = 0; k < c_s; ++k) {
        const double ang = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(c_s);
        centers[static_cast<std::size_t>(k)][0] = kCircleRadius * std::cos(ang);
        centers[static_cast<std::size_t>(k)][1] = kCircleRadius * std::sin(ang);
    }

    const double th = shift.rotation_deg * kPi / 180.0;
    const double ct = std::cos(th), st = std::sin(th);

    Rng rng(derive_seed(seed, 0x64617461ULL));

    PdaTask task;
    task.class_count = c_s;
    for (int k = 0; k < c_s; ++k)
        (k < c_t ? task.shared_classes : task.outlier_classes).push_back(k);

    task.source.samples = Mat(c_s * per_class_n, dim);
    task.source.domain = "source";
    task.source.class_count = c_s;
    for (int k = 0; k < c_s; ++k)
        for (int i = 0; i < per_class_n; ++i) {
            const int r = k * per_class_n + i;
            for (int f = 0; f < dim; ++f)
                task.source.samples(r, f) =
                    centers[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] +
                    shift.noise_sigma * rng.normal();
            task.source.labels.push_back(k);
        }

    task.target.samples = Mat(c_t * per_class_n, dim);
    task.target.domain = "target";
    task.target.class_count = c_s;
    for (int k = 0; k < c_t; ++k)
        for (int i = 0; i < per_class_n; ++i) {
            const int r = k * per_class_n + i;
            std::vector<double> z(static_cast<std::size_t>(dim));
            for (int f = 0; f < dim; ++f)
                z[static_cast<std::size_t>(f)] =
                    centers[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] +
                    shift.noise_sigma * rng.normal();
            // rigid shift: rotation in the first-two plane, then translation
            const double x0 = ct * z[0] - st * z[1] + shift.translate_x;
            const double x1 = st * z[0] + ct * z[1] + shift.translate_y;
            task.target.samples(r, 0) = x0;
            task.target.samples(r, 1) = x1;
            for (int f = 2; f < dim; ++f) task.target.samples(r, f) = z[static_cast<std::size_t>(f)];
            task.target.labels.push_back(k);
        }
    return task;
}

namespace {

std::uint32_t read_be_u32(std::ifstream& f, const std::string& path, std::size_t offset) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(path + ": truncated header at byte " + std::to_string(offset));
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw FormatError(images_path + ": cannot open");
    const std::uint32_t img_magic = read_be_u32(imgs, images_path, 0);
    if (img_magic != 0x00000803u)
        throw FormatError(images_path + ": bad magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%08x", img_magic);
            return std::string(buf);
        }() + " at byte 0 (want 0x00000803)");
    const std::uint32_t n = read_be_u32(imgs, images_path, 4);
    const std::uint32_t rows = read_be_u32(imgs, images_path, 8);
    const std::uint32_t cols = read_be_u32(imgs, images_path, 12);

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw FormatError(labels_path + ": cannot open");
    const std::uint32_t lab_magic = read_be_u32(labs, labels_path, 0);
    if (lab_magic != 0x00000801u)
        throw FormatError(labels_path + ": bad magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%08x", lab_magic);
            return std::string(buf);
        }() + " at byte 0 (want 0x00000801)");
    const std::uint32_t n_labels = read_be_u32(labs, labels_path, 4);
    if (n_labels != n)
        throw FormatError(labels_path + ": " + std::to_string(n_labels) + " labels for " +
                          std::to_string(n) + " images");

    LabeledDataset ds;
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    ds.samples = Mat(static_cast<int>(n), static_cast<int>(pixels));
    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels)))
            throw FormatError(images_path + ": truncated image data at byte " +
                              std::to_string(16 + static_cast<std::size_t>(i) * pixels));
        for (std::size_t p = 0; p < pixels; ++p)
            ds.samples(static_cast<int>(i), static_cast<int>(p)) =
                static_cast<double>(buf[p]) / 255.0;
    }
    ds.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        unsigned char l;
        if (!labs.read(reinterpret_cast<char*>(&l), 1))
            throw FormatError(labels_path + ": truncated label data at byte " +
                              std::to_string(8 + i));
        ds.labels[i] = static_cast<int>(l);
    }
    int mx = -1;
    for (int l : ds.labels) mx = std::max(mx, l);
    ds.class_count = mx + 1;
    return ds;
}

LabeledDataset make_partial_target(const LabeledDataset& ds, const std::vector<int>& keep) {
    if (keep.empty()) throw ContractError("make_partial_target: empty keep set");
    std::set<int> existing(ds.labels.begin(), ds.labels.end());
    std::set<int> keep_set(keep.begin(), keep.end());
    for (int k : keep_set)
        if (!existing.count(k))
            throw ContractError("make_partial_target: class " + std::to_string(k) +
                                " not present in dataset");
    std::vector<int> take;
    for (int i = 0; i < ds.size(); ++i)
        if (keep_set.count(ds.labels[static_cast<std::size_t>(i)])) take.push_back(i);
    if (take.empty()) throw ContractError("make_partial_target: empty result");

    LabeledDataset out;
    out.domain = ds.domain;
    out.class_count = ds.class_count;
    out.samples = Mat(static_cast<int>(take.size()), ds.dim());
    for (std::size_t r = 0; r < take.size(); ++r) {
        for (int f = 0; f < ds.dim(); ++f)
            out.samples(static_cast<int>(r), f) = ds.samples(take[r], f);
        out.labels.push_back(ds.labels[static_cast<std::size_t>(take[r])]);
    }
    return out;
}

LabeledDataset resize_bilinear(const LabeledDataset& ds, int h0, int w0, int h1, int w1) {
    if (ds.dim() != h0 * w0)
        throw ShapeError("resize_bilinear: samples have " + std::to_string(ds.dim()) +
                         " features, expected " + std::to_string(h0 * w0));
    LabeledDataset out;
    out.labels = ds.labels;
    out.domain = ds.domain;
    out.class_count = ds.class_count;
    out.samples = Mat(ds.size(), h1 * w1);
    const double sy = static_cast<double>(h0) / static_cast<double>(h1);
    const double sx = static_cast<double>(w0) / static_cast<double>(w1);
    for (int i = 0; i < ds.size(); ++i) {
        for (int y = 0; y < h1; ++y) {
            double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
            fy = std::min(std::max(fy, 0.0), static_cast<double>(h0 - 1));
            const int y0 = static_cast<int>(fy);
            const int y1i = std::min(y0 + 1, h0 - 1);
            const double wy = fy - y0;
            for (int x = 0; x < w1; ++x) {
                double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
                fx = std::min(std::max(fx, 0.0), static_cast<double>(w0 - 1));
                const int x0 = static_cast<int>(fx);
                const int x1i = std::min(x0 + 1, w0 - 1);
                const double wx = fx - x0;
                const double v00 = ds.samples(i, y0 * w0 + x0);
                const double v01 = ds.samples(i, y0 * w0 + x1i);
                const double v10 = ds.samples(i, y1i * w0 + x0);
                const double v11 = ds.samples(i, y1i * w0 + x1i);
                out.samples(i, y * w1 + x) = (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
                                             wy * ((1.0 - wx) * v10 + wx * v11);
            }
        }
    }
    return out;
}

void export_task_csv(const PdaTask& task, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError(path + ": cannot open for writing");
    const int d = task.source.dim();
    for (int f = 0; f < d; ++f) os << "x" << f << ",";
    os << "label,domain\n";
    auto dump = [&](const LabeledDataset& ds) {
        char buf[40];
        for (int i = 0; i < ds.size(); ++i) {
            for (int f = 0; f < d; ++f) {
                std::snprintf(buf, sizeof buf, "%.17g", ds.samples(i, f));
                os << buf << ",";
            }
            os << ds.labels[static_cast<std::size_t>(i)] << "," << ds.domain << "\n";
        }
    };
    dump(task.source);
    dump(task.target);
    if (!os) throw FormatError(path + ": write failure");
}

}  // namespace gpda::data
