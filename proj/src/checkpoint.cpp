#include "ar/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace ar {

namespace {

constexpr char kMagic[4] = {'A', 'R', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is, const char* what) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
        throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
    return v;
}

std::uint8_t read_u8(std::istream& is, const char* what) {
    char c = 0;
    if (!is.get(c))
        throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
    return static_cast<std::uint8_t>(c);
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::istream& is, std::vector<double>& v, const char* what) {
    if (!is.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(double))))
        throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(params.num_layers()));
    for (const auto& s : params.layers) {
        write_u32(os, static_cast<std::uint32_t>(s.in_dim));
        write_u32(os, static_cast<std::uint32_t>(s.out_dim));
        os.put(s.activation == Activation::ReLU ? '\x00' : '\x01');
    }
    for (const auto& w : params.weights) write_doubles(os, w.data);
    os.put(params.has_feedback() ? '\x01' : '\x00');
    for (const auto& f : params.feedback) write_doubles(os, f.data);
    if (!os) throw CheckpointError("write failure on checkpoint: " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[4] = {};
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("bad checkpoint magic in " + path);
    const auto version = read_u32(is, "version");
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto layer_count = read_u32(is, "layer count");

    NetworkParams p;
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        LayerSpec s;
        s.in_dim = read_u32(is, "in_dim");
        s.out_dim = read_u32(is, "out_dim");
        const auto tag = read_u8(is, "activation tag");
        if (tag > 1) throw CheckpointError("bad activation tag " + std::to_string(tag));
        s.activation = tag == 0 ? Activation::ReLU : Activation::Linear;
        if (s.in_dim == 0 || s.out_dim == 0)
            throw CheckpointError("zero layer dimension in checkpoint");
        p.layers.push_back(s);
    }
    for (const auto& s : p.layers) {
        Matrix w(s.out_dim, s.in_dim);
        read_doubles(is, w.data, "weights");
        p.weights.push_back(std::move(w));
    }
    const auto fb = read_u8(is, "feedback presence byte");
    if (fb > 1) throw CheckpointError("bad feedback presence byte");
    if (fb == 1) {
        for (const auto& s : p.layers) {
            Matrix f(s.in_dim, s.out_dim);
            read_doubles(is, f.data, "feedback weights");
            p.feedback.push_back(std::move(f));
        }
    }
    return p;
}

}  // namespace ar
