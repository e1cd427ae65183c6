#include "ar/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "ar/network.hpp"

namespace ar {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw FormatError("truncated IDX header in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

std::size_t Dataset::label_of(std::size_t i) const { return argmax(targets[i]); }

Dataset Dataset::head(std::size_t n) const {
    Dataset out;
    n = std::min(n, count());
    out.inputs.assign(inputs.begin(), inputs.begin() + n);
    out.targets.assign(targets.begin(), targets.begin() + n);
    return out;
}

std::vector<Vector> load_idx_images(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open image file: " + path);
    const auto magic = read_be_u32(is, path);
    if (magic != kImageMagic)
        throw FormatError("bad image magic in " + path + " (got " + std::to_string(magic) + ")");
    const auto n = read_be_u32(is, path);
    const auto rows = read_be_u32(is, path);
    const auto cols = read_be_u32(is, path);
    const std::size_t pixels = std::size_t(rows) * cols;

    std::vector<Vector> images;
    images.reserve(n);
    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!is.read(reinterpret_cast<char*>(buf.data()),
                     static_cast<std::streamsize>(pixels)))
            throw FormatError("truncated image data in " + path + " at image " +
                              std::to_string(i));
        Vector v(pixels);
        for (std::size_t k = 0; k < pixels; ++k) v[k] = buf[k] / 255.0;
        images.push_back(std::move(v));
    }
    return images;
}

std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open label file: " + path);
    const auto magic = read_be_u32(is, path);
    if (magic != kLabelMagic)
        throw FormatError("bad label magic in " + path + " (got " + std::to_string(magic) + ")");
    const auto n = read_be_u32(is, path);
    std::vector<std::uint8_t> labels(n);
    if (!is.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(n)))
        throw FormatError("truncated label data in " + path);
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] > 9)
            throw DataError("label " + std::to_string(labels[i]) + " out of range at index " +
                            std::to_string(i) + " in " + path);
    return labels;
}

void write_idx_images(const std::string& path,
                      const std::vector<std::vector<std::uint8_t>>& images, std::size_t rows,
                      std::size_t cols) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    write_be_u32(os, kImageMagic);
    write_be_u32(os, static_cast<std::uint32_t>(images.size()));
    write_be_u32(os, static_cast<std::uint32_t>(rows));
    write_be_u32(os, static_cast<std::uint32_t>(cols));
    for (const auto& img : images) {
        if (img.size() != rows * cols) throw ShapeError("image pixel count mismatch");
        os.write(reinterpret_cast<const char*>(img.data()),
                 static_cast<std::streamsize>(img.size()));
    }
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    write_be_u32(os, kLabelMagic);
    write_be_u32(os, static_cast<std::uint32_t>(labels.size()));
    os.write(reinterpret_cast<const char*>(labels.data()),
             static_cast<std::streamsize>(labels.size()));
}

Vector one_hot(std::size_t label, std::size_t classes) {
    if (label >= classes) throw DataError("label out of range for one-hot encoding");
    Vector t(classes, 0.0);
    t[label] = 1.0;
    return t;
}

Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         std::size_t classes) {
    Dataset ds;
    ds.inputs = load_idx_images(images_path);
    const auto labels = load_idx_labels(labels_path);
    if (labels.size() != ds.inputs.size())
        throw DataError("image/label count mismatch: " + std::to_string(ds.inputs.size()) +
                        " vs " + std::to_string(labels.size()));
    ds.targets.reserve(labels.size());
    for (auto l : labels) ds.targets.push_back(one_hot(l, classes));
    return ds;
}

BatchPlan make_batch_plan(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                          std::size_t epoch) {
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    BatchPlan plan;
    plan.batch_size = batch_size;
    plan.seed = seed;
    plan.order.resize(count);
    std::iota(plan.order.begin(), plan.order.end(), std::size_t{0});
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * (epoch + 1));
    std::shuffle(plan.order.begin(), plan.order.end(), rng);
    return plan;
}

std::vector<std::vector<std::size_t>> batches(const BatchPlan& plan) {
    if (plan.batch_size == 0) throw ConfigError("batch size must be positive");
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < plan.order.size(); start += plan.batch_size) {
        const std::size_t end = std::min(start + plan.batch_size, plan.order.size());
        out.emplace_back(plan.order.begin() + start, plan.order.begin() + end);
    }
    return out;
}

Dataset synthetic_dataset(std::uint64_t seed, std::size_t n, std::size_t in_dim,
                          std::size_t classes) {
    if (classes < 2 || n < classes) throw ConfigError("need n >= classes >= 2");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::uniform_int_distribution<std::size_t> pick_class(0, classes - 1);

    Dataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        // Round-robin the first `classes` items so every label is present.
        const std::size_t c = i < classes ? i : pick_class(rng);
        Vector x(in_dim, 0.0);
        // Unit-spaced cluster means along coordinate c (mod in_dim).
        x[c % in_dim] += 1.0 + double(c / in_dim);
        for (auto& xi : x) xi += noise(rng);
        ds.inputs.push_back(std::move(x));
        ds.targets.push_back(one_hot(c, classes));
    }
    return ds;
}

}  // namespace ar
