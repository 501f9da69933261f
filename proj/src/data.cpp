#include "atnl/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

#include "atnl/rng.hpp"

namespace atnl {

std::size_t NoisyDataset::corrupted_count() const {
    std::size_t n = 0;
    for (auto c : corrupted) n += c;
    return n;
}

void NoisyDataset::check_invariants() const {
    const std::size_t n = observed.size();
    if (truth.size() != n || corrupted.size() != n || features.rows() != n) {
        throw std::logic_error("NoisyDataset: field lengths disagree");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (observed[i] < 0 || observed[i] >= class_count || truth[i] < 0 || truth[i] >= class_count) {
            throw std::logic_error("NoisyDataset: label out of range at " + std::to_string(i));
        }
        if ((observed[i] != truth[i]) != static_cast<bool>(corrupted[i])) {
            throw std::logic_error("NoisyDataset: corruption flag inconsistent at " + std::to_string(i));
        }
    }
}

NoisyDataset synth_binary(std::size_t n, std::size_t flip_count, std::uint64_t seed) {
    if (n == 0) throw FormatError("synth_binary: n must be > 0");
    if (flip_count >= n) {
        throw FormatError("synth_binary: flip_count " + std::to_string(flip_count) +
                          " must be < n " + std::to_string(n));
    }
    Rng rng(derive_seed(seed, "synth-points"));
    NoisyDataset ds;
    ds.class_count = 2;
    std::vector<double> coords(n * 2);
    ds.truth.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double a = rng.uniform();
        double b = rng.uniform();
        coords[2 * i] = a;
        coords[2 * i + 1] = b;
        ds.truth[i] = b > a ? 1 : 0;
    }
    ds.features = Tensor({n, 2}, std::move(coords));
    ds.observed = ds.truth;
    ds.corrupted.assign(n, 0);
    Rng flip_rng(derive_seed(seed, "synth-flips"));
    for (std::size_t idx : flip_rng.sample_without_replacement(n, flip_count)) {
        ds.observed[idx] = 1 - ds.observed[idx];
        ds.corrupted[idx] = 1;
    }
    return ds;
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

class IdxReader {
public:
    explicit IdxReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw FormatError("cannot open " + path);
    }

    std::uint32_t read_u32_be() {
        unsigned char buf[4];
        read_bytes(buf, 4);
        return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
               (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
    }

    void read_bytes(unsigned char* dst, std::size_t count) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count));
        if (static_cast<std::size_t>(in_.gcount()) != count) {
            throw FormatError(path_ + ": truncated at byte offset " + std::to_string(offset_ + in_.gcount()));
        }
        offset_ += count;
    }

    std::size_t offset() const { return offset_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

} // namespace

NoisyDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                            std::size_t subset_size, std::uint64_t seed) {
    IdxReader images(images_path);
    std::uint32_t magic = images.read_u32_be();
    if (magic != kImagesMagic) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "0x%08x at byte offset 0", magic);
        throw FormatError(images_path + ": bad image magic " + buf);
    }
    const std::size_t count = images.read_u32_be();
    const std::size_t rows = images.read_u32_be();
    const std::size_t cols = images.read_u32_be();
    if (rows == 0 || cols == 0 || count == 0) {
        throw FormatError(images_path + ": empty dimensions in header");
    }

    IdxReader labels(labels_path);
    std::uint32_t lmagic = labels.read_u32_be();
    if (lmagic != kLabelsMagic) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "0x%08x at byte offset 0", lmagic);
        throw FormatError(labels_path + ": bad label magic " + buf);
    }
    const std::size_t lcount = labels.read_u32_be();
    if (lcount != count) {
        throw FormatError(labels_path + ": label count " + std::to_string(lcount) +
                          " does not match image count " + std::to_string(count) +
                          " (header at byte offset 4)");
    }
    if (subset_size == 0 || subset_size > count) {
        throw FormatError("subset_size " + std::to_string(subset_size) + " out of range [1, " +
                          std::to_string(count) + "]");
    }

    const std::size_t dim = rows * cols;
    std::vector<unsigned char> pixels(count * dim);
    images.read_bytes(pixels.data(), pixels.size());
    std::vector<unsigned char> raw_labels(count);
    labels.read_bytes(raw_labels.data(), raw_labels.size());

    int max_label = 0;
    for (std::size_t i = 0; i < count; ++i) {
        max_label = std::max(max_label, static_cast<int>(raw_labels[i]));
    }

    Rng rng(derive_seed(seed, "mnist-subset"));
    std::vector<std::size_t> pick = rng.sample_without_replacement(count, subset_size);

    NoisyDataset ds;
    ds.class_count = max_label + 1;
    std::vector<double> feats(subset_size * dim);
    ds.truth.resize(subset_size);
    for (std::size_t i = 0; i < subset_size; ++i) {
        const std::size_t src = pick[i];
        for (std::size_t j = 0; j < dim; ++j) {
            feats[i * dim + j] = static_cast<double>(pixels[src * dim + j]) / 255.0;
        }
        ds.truth[i] = static_cast<int>(raw_labels[src]);
    }
    ds.features = Tensor({subset_size, dim}, std::move(feats));
    ds.observed = ds.truth;
    ds.corrupted.assign(subset_size, 0);
    return ds;
}

NoisyDataset inject_noise(const NoisyDataset& ds, const NoiseSpec& spec) {
    if (spec.rate < 0.0 || spec.rate > 1.0) {
        throw FormatError("inject_noise: rate " + std::to_string(spec.rate) + " outside [0,1]");
    }
    NoisyDataset out = ds;
    if (spec.rate == 0.0) return out;
    const int c = ds.class_count;
    if (c < 2) throw FormatError("inject_noise: need at least 2 classes");
    Rng rng(derive_seed(spec.seed, "noise"));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const int y = ds.truth[i];
        if (rng.uniform() >= spec.rate) {
            out.observed[i] = y;
        } else if (spec.kind == NoiseKind::symmetric) {
            // Uniform over the other C-1 classes.
            int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(c - 1)));
            if (t >= y) ++t;
            out.observed[i] = t;
        } else {
            out.observed[i] = (y + 1) % c;
        }
        out.corrupted[i] = out.observed[i] != y;
    }
    return out;
}

std::vector<double> minmax_normalize(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("minmax_normalize: empty input");
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<double> out(values.size());
    if (hi == lo) return out;
    const double span = hi - lo;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / span;
    return out;
}

const char* noise_kind_name(NoiseKind k) {
    return k == NoiseKind::symmetric ? "symmetric" : "pair";
}

} // namespace atnl
