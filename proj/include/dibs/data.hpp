#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dibs/tensor.hpp"

namespace dibs::data {

// Images are stored as [N, H, W, C] floats in [0,1]; synthetic vector data as
// [N, D]. Datasets are immutable after construction.
struct LabeledDataset {
    Tensor<float> examples;
    std::vector<int> labels;
    int num_classes = 0;

    struct Meta {
        std::string source;
        std::string transform;
        std::uint64_t seed = 0;
        // OOD sets carry no class; the -1 sentinel lives here so the label
        // array keeps its "< num_classes" invariant.
        int label_sentinel = 0;
    } meta;

    std::size_t size() const { return labels.size(); }
    bool is_image() const { return examples.rank() == 4; }
    std::size_t feature_count() const {
        return size() ? examples.size() / size() : 0;
    }
};

struct ShiftSpec {
    enum class Kind { none, translate, rotate, color };
    Kind kind = Kind::none;
    std::pair<double, double> range{0.0, 0.0};  // pixels or degrees
    std::vector<int> channels{0, 1, 2};         // color targets: 0=R,1=G,2=B

    static Kind kind_from(const std::string& name);
    std::string to_string() const;
};

// IDX ingestion (big-endian magic 0x00000803 for images, 0x00000801 for
// labels). Pixels are rescaled to [0,1] by division by 255.
LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path);

// IDX emission, the exact inverse layout of load_idx. Pixel floats are
// quantized with round-to-nearest into bytes.
void write_idx(const LabeledDataset& ds, const std::string& images_path,
               const std::string& labels_path);

// Unit-variance Gaussian blobs at centers pairwise >= separation apart
// (adjacent centers sit exactly `separation` apart on a circle in the first
// two dimensions).
LabeledDataset make_gaussian_mixture(int num_classes, int per_class, int dim,
                                     double separation, std::uint64_t seed);

// Per-example random shift; labels and dataset size are preserved.
LabeledDataset apply_shift(const LabeledDataset& ds, const ShiftSpec& spec,
                           std::uint64_t seed);

enum class NoiseKind { uniform, gaussian };

// Synthetic OOD images: uniform U[0,1] per pixel, or N(0.5, 1) clipped to
// [0,1]. shape is e.g. {28,28,1}; for vector data pass a single dim.
LabeledDataset make_noise_ood(NoiseKind kind, int count,
                              const std::vector<std::size_t>& shape,
                              std::uint64_t seed);

// Disjoint split with sizes floor(fraction*N) and the remainder; the shuffle
// is a deterministic function of the seed.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                double fraction,
                                                std::uint64_t seed);

// Deterministic stand-in for MNIST at desk scale: 28x28x1 grayscale glyphs
// of the ten digits with per-example jitter in pose, scale and stroke width.
LabeledDataset make_synthetic_digits(int count, std::uint64_t seed);

// Gathers rows into a training batch: images become [B, C, H, W], vectors
// [B, D].
Tensor<float> gather_batch(const LabeledDataset& ds,
                           const std::vector<std::size_t>& indices);

std::vector<int> gather_labels(const LabeledDataset& ds,
                               const std::vector<std::size_t>& indices);

// Centers the feature bounding box; used to place noise OOD sets over the
// in-distribution data's box for vector tasks.
std::pair<std::vector<float>, std::vector<float>> feature_bounds(
    const LabeledDataset& ds);

}  // namespace dibs::data
