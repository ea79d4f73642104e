#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cascade/rng.hpp"
#include "cascade/tensor.hpp"

namespace cascade {

// One image in channel-major layout, pixel values nominally in [0,1] until
// standard normalization.
struct Image {
    std::size_t channels = 1, height = 0, width = 0;
    std::vector<float> pix;

    float& at(std::size_t c, std::size_t y, std::size_t x) { return pix[(c * height + y) * width + x]; }
    float at(std::size_t c, std::size_t y, std::size_t x) const { return pix[(c * height + y) * width + x]; }
    std::size_t size() const { return pix.size(); }
};

struct Dataset {
    std::size_t channels = 1, height = 0, width = 0, classes = 0;
    std::vector<Image> images;
    std::vector<std::size_t> labels;
    std::vector<std::size_t> coarse_map; // fine class -> coarse class; empty if absent

    std::size_t size() const { return images.size(); }
    std::size_t input_dim() const { return channels * height * width; }
};

// Per-channel mean/stddev of a set of images, for standard normalization.
struct PixelStats {
    std::vector<float> mean, stddev;
};

PixelStats pixel_stats(const Dataset& ds, const std::vector<std::size_t>& indices);

struct DatasetSpec {
    std::string source = "synthetic"; // synthetic | idx | cifar-binary
    std::string path;                 // idx: "images_file,labels_file"; cifar: file or dir
    std::size_t classes = 6;          // synthetic only
    double train_fraction = 0.9;
    // synthetic generator knobs
    std::size_t synthetic_count = 1200;
    std::size_t image_size = 16;
    std::size_t coarse_group = 2;     // fine classes per coarse class
    double jitter = 1.0;              // within-class blob jitter scale
    double pixel_noise = 0.06;
    std::uint64_t seed = 1;           // structure seed; instance seed derived per run
};

// Procedurally generated dataset: each coarse group owns a base arrangement of
// Gaussian blobs, each fine class adds its own blobs, and instances jitter
// blob geometry and add pixel noise. Within-class jitter magnitude is graded,
// which gives the corpus a typicality axis.
Dataset make_synthetic(const DatasetSpec& spec, std::uint64_t instance_seed);

// Two well-separated blob classes; linearly separable for optimizer smoke tests.
Dataset make_two_blob(std::size_t count, std::size_t image_size, std::uint64_t seed);

// Standard IDX pair (big-endian magic headers), e.g. MNIST files.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary batches: 3073-byte records, label byte then 3x32x32 pixels.
Dataset load_cifar_binary(const std::string& path);

// Class-balanced split: per class, a seeded shuffle and a round(fraction)
// cut. Returns (train_indices, val_indices).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_class_balanced(const Dataset& ds, double train_fraction, std::uint64_t seed);

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t run_seed);

} // namespace cascade
