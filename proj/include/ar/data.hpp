#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ar/linalg.hpp"

namespace ar {

// Inputs scaled to [0,1], targets one-hot over 10 (or `classes`) entries.
struct Dataset {
    std::vector<Vector> inputs;
    std::vector<Vector> targets;

    std::size_t count() const { return inputs.size(); }
    std::size_t label_of(std::size_t i) const;
    Dataset head(std::size_t n) const;  // first n items
};

// IDX image file (magic 0x00000803): N x rows x cols unsigned bytes,
// returned as N vectors scaled by 1/255.
std::vector<Vector> load_idx_images(const std::string& path);
// IDX label file (magic 0x00000801): N bytes in 0..9.
std::vector<std::uint8_t> load_idx_labels(const std::string& path);

void write_idx_images(const std::string& path, const std::vector<std::vector<std::uint8_t>>& images,
                      std::size_t rows, std::size_t cols);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

// Pairs an image and label file into a dataset with one-hot targets.
Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         std::size_t classes = 10);

struct BatchPlan {
    std::size_t batch_size = 0;
    std::vector<std::size_t> order;  // permutation of [0, count)
    std::uint64_t seed = 0;
};

// Epoch-indexed shuffle derived from the base seed.
BatchPlan make_batch_plan(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                          std::size_t epoch);

// Splits plan.order into ceil(count/batch_size) runs; the last may be short.
std::vector<std::vector<std::size_t>> batches(const BatchPlan& plan);

// Gaussian class clusters: unit-spaced means, std 0.1, one-hot targets.
Dataset synthetic_dataset(std::uint64_t seed, std::size_t n, std::size_t in_dim,
                          std::size_t classes);

Vector one_hot(std::size_t label, std::size_t classes);

}  // namespace ar
