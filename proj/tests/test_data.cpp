#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "atnl/data.hpp"
#include "atnl/stats.hpp"

using namespace atnl;
namespace fs = std::filesystem;

namespace {

void put_u32_be(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

struct IdxFixture {
    fs::path images, labels;

    // count images of rows x cols, pixel value = (index + pixel) % 256,
    // label = index % 10.
    IdxFixture(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
               std::uint32_t images_magic = 0x00000803, std::uint32_t labels_magic = 0x00000801,
               std::uint32_t label_count_override = 0, bool truncate_images = false) {
        images = fs::temp_directory_path() / ("atnl_idx_img_" + std::to_string(::getpid()) + ".bin");
        labels = fs::temp_directory_path() / ("atnl_idx_lab_" + std::to_string(::getpid()) + ".bin");
        std::string img;
        put_u32_be(img, images_magic);
        put_u32_be(img, count);
        put_u32_be(img, rows);
        put_u32_be(img, cols);
        for (std::uint32_t i = 0; i < count; ++i) {
            for (std::uint32_t p = 0; p < rows * cols; ++p) {
                img.push_back(static_cast<char>((i + p) % 256));
            }
        }
        if (truncate_images) img.resize(img.size() - 3);
        std::ofstream(images, std::ios::binary) << img;

        std::string lab;
        put_u32_be(lab, labels_magic);
        put_u32_be(lab, label_count_override ? label_count_override : count);
        for (std::uint32_t i = 0; i < count; ++i) lab.push_back(static_cast<char>(i % 10));
        std::ofstream(labels, std::ios::binary) << lab;
    }

    ~IdxFixture() {
        fs::remove(images);
        fs::remove(labels);
    }
};

// Perceptron oracle: returns true if the labeled points are linearly
// separable (trains to zero errors within the iteration budget).
bool perceptron_separable(const Tensor& x, const std::vector<int>& y, int max_epochs = 2000) {
    double w0 = 0, w1 = 0, b = 0;
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        int errors = 0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double score = w0 * x.at(i, 0) + w1 * x.at(i, 1) + b;
            const int pred = score > 0 ? 1 : 0;
            if (pred != y[i]) {
                const double t = y[i] == 1 ? 1.0 : -1.0;
                w0 += t * x.at(i, 0);
                w1 += t * x.at(i, 1);
                b += t;
                ++errors;
            }
        }
        if (errors == 0) return true;
    }
    return false;
}

} // namespace

TEST_CASE("synth_binary: paper-shaped 23-point setup with 2 flips") {
    NoisyDataset ds = synth_binary(23, 2, 7);
    ds.check_invariants();
    CHECK(ds.size() == 23);
    CHECK(ds.class_count == 2);
    CHECK(ds.corrupted_count() == 2);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds.features.at(i, 0) > 0.0);
        CHECK(ds.features.at(i, 0) < 1.0);
        CHECK(ds.truth[i] == (ds.features.at(i, 1) > ds.features.at(i, 0) ? 1 : 0));
    }
}

TEST_CASE("synth_binary: flip_count 0 leaves everything clean; same seed reproduces") {
    NoisyDataset a = synth_binary(23, 0, 3);
    CHECK(a.corrupted_count() == 0);
    NoisyDataset b = synth_binary(23, 0, 3);
    for (std::size_t i = 0; i < a.features.size(); ++i) CHECK(a.features[i] == b.features[i]);
    CHECK(a.observed == b.observed);
    CHECK_THROWS_AS(synth_binary(5, 5, 1), FormatError);
}

TEST_CASE("synth_binary: clean labels are linearly separable (perceptron oracle)") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        NoisyDataset ds = synth_binary(23, 0, seed);
        CHECK(perceptron_separable(ds.features, ds.truth));
    }
}

TEST_CASE("load_mnist_idx: accepts the magic pair and scales pixels by 1/255") {
    IdxFixture fix(40, 4, 5);
    NoisyDataset ds = load_mnist_idx(fix.images.string(), fix.labels.string(), 40, 5);
    ds.check_invariants();
    CHECK(ds.size() == 40);
    CHECK(ds.feature_dim() == 20);
    CHECK(ds.class_count == 10);
    CHECK(ds.corrupted_count() == 0);
    // Pixel value 255 must map to exactly 1.0: image 236 pixel 19 has value
    // (236 + 19) % 256 == 255.
    bool found_one = false;
    for (std::size_t i = 0; i < ds.size() && !found_one; ++i) {
        for (std::size_t j = 0; j < 20; ++j) {
            if (ds.features.at(i, j) == 1.0) found_one = true;
            CHECK(ds.features.at(i, j) >= 0.0);
            CHECK(ds.features.at(i, j) <= 1.0);
        }
    }
    // subset == full size gives a permutation of the whole set
    std::vector<int> counts(10, 0);
    for (int label : ds.truth) ++counts[static_cast<std::size_t>(label)];
    for (int c : counts) CHECK(c == 4);
}

TEST_CASE("load_mnist_idx: deterministic per (paths, subset, seed)") {
    IdxFixture fix(30, 3, 3);
    NoisyDataset a = load_mnist_idx(fix.images.string(), fix.labels.string(), 10, 42);
    NoisyDataset b = load_mnist_idx(fix.images.string(), fix.labels.string(), 10, 42);
    CHECK(a.truth == b.truth);
    for (std::size_t i = 0; i < a.features.size(); ++i) CHECK(a.features[i] == b.features[i]);
}

TEST_CASE("load_mnist_idx: rejects wrong magic, truncation, count mismatch") {
    {
        IdxFixture bad(10, 3, 3, 0x00000802);
        CHECK_THROWS_WITH_AS(load_mnist_idx(bad.images.string(), bad.labels.string(), 5, 1),
                             doctest::Contains("magic"), FormatError);
    }
    {
        IdxFixture bad(10, 3, 3, 0x00000803, 0x00000803);
        CHECK_THROWS_WITH_AS(load_mnist_idx(bad.images.string(), bad.labels.string(), 5, 1),
                             doctest::Contains("label magic"), FormatError);
    }
    {
        IdxFixture bad(10, 3, 3, 0x00000803, 0x00000801, /*label_count_override=*/9);
        CHECK_THROWS_WITH_AS(load_mnist_idx(bad.images.string(), bad.labels.string(), 5, 1),
                             doctest::Contains("does not match"), FormatError);
    }
    {
        IdxFixture bad(10, 3, 3, 0x00000803, 0x00000801, 0, /*truncate_images=*/true);
        CHECK_THROWS_WITH_AS(load_mnist_idx(bad.images.string(), bad.labels.string(), 5, 1),
                             doctest::Contains("truncated at byte offset"), FormatError);
    }
    CHECK_THROWS_AS(load_mnist_idx("/nonexistent/img", "/nonexistent/lab", 5, 1), FormatError);
    {
        IdxFixture fix(10, 3, 3);
        CHECK_THROWS_AS(load_mnist_idx(fix.images.string(), fix.labels.string(), 11, 1), FormatError);
    }
}

TEST_CASE("inject_noise: rate 0 is the identity") {
    NoisyDataset ds = synth_binary(23, 0, 1);
    NoisyDataset out = inject_noise(ds, {NoiseKind::symmetric, 0.0, 5});
    CHECK(out.observed == ds.observed);
    CHECK(out.corrupted_count() == 0);
}

TEST_CASE("inject_noise: preserves features and truth; symmetric flips differ from truth") {
    NoisyDataset ds = synth_binary(200, 0, 2);
    NoisyDataset out = inject_noise(ds, {NoiseKind::symmetric, 0.5, 6});
    out.check_invariants();
    CHECK(out.truth == ds.truth);
    for (std::size_t i = 0; i < ds.features.size(); ++i) CHECK(out.features[i] == ds.features[i]);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out.corrupted[i]) CHECK(out.observed[i] != out.truth[i]);
    }
}

TEST_CASE("inject_noise: symmetric 0.2 empirical rate and uniform targets (C=10, n=100000)") {
    // A feature-free 10-class dataset with uniform random truth.
    const std::size_t n = 100000;
    NoisyDataset ds;
    ds.class_count = 10;
    ds.features = Tensor({n, 1});
    ds.truth.resize(n);
    Rng rng(1234);
    for (auto& t : ds.truth) t = static_cast<int>(rng.below(10));
    ds.observed = ds.truth;
    ds.corrupted.assign(n, 0);

    NoisyDataset out = inject_noise(ds, {NoiseKind::symmetric, 0.2, 99});
    const double frac = static_cast<double>(out.corrupted_count()) / static_cast<double>(n);
    CHECK(frac > 0.195);
    CHECK(frac < 0.205);

    // Pooled per-source-class chi-square: targets uniform over the 9 other
    // classes, dof = 10 * (9 - 1).
    double counts[10][10] = {};
    double per_source[10] = {};
    for (std::size_t i = 0; i < n; ++i) {
        if (out.corrupted[i]) {
            counts[out.truth[i]][out.observed[i]] += 1.0;
            per_source[out.truth[i]] += 1.0;
        }
    }
    double stat = 0.0;
    for (int s = 0; s < 10; ++s) {
        std::vector<double> obs, exp;
        for (int t = 0; t < 10; ++t) {
            if (t == s) continue;
            obs.push_back(counts[s][t]);
            exp.push_back(per_source[s] / 9.0);
        }
        stat += chi_square_stat(obs, exp);
    }
    CHECK(chi_square_sf(stat, 80) > 0.01);
}

TEST_CASE("inject_noise: pair 0.4 targets are (y+1) mod C with the right rate") {
    const std::size_t n = 100000;
    NoisyDataset ds;
    ds.class_count = 10;
    ds.features = Tensor({n, 1});
    ds.truth.resize(n);
    Rng rng(777);
    for (auto& t : ds.truth) t = static_cast<int>(rng.below(10));
    ds.observed = ds.truth;
    ds.corrupted.assign(n, 0);

    NoisyDataset out = inject_noise(ds, {NoiseKind::pair, 0.4, 31});
    const double frac = static_cast<double>(out.corrupted_count()) / static_cast<double>(n);
    CHECK(frac > 0.395);
    CHECK(frac < 0.405);
    for (std::size_t i = 0; i < n; ++i) {
        if (out.corrupted[i]) CHECK(out.observed[i] == (out.truth[i] + 1) % 10);
    }
}

TEST_CASE("inject_noise: flip fraction within 3-sigma binomial bounds") {
    NoisyDataset ds = synth_binary(20000, 0, 4);
    for (double rate : {0.1, 0.3, 0.5}) {
        NoisyDataset out = inject_noise(ds, {NoiseKind::symmetric, rate, 11});
        const double n = static_cast<double>(ds.size());
        const double sigma = std::sqrt(rate * (1 - rate) / n);
        const double frac = static_cast<double>(out.corrupted_count()) / n;
        CHECK(std::abs(frac - rate) < 3.0 * sigma);
    }
    CHECK_THROWS_AS(inject_noise(ds, {NoiseKind::symmetric, 1.5, 0}), FormatError);
}

TEST_CASE("minmax_normalize: frozen examples and degenerate case") {
    std::vector<double> basic = {3, 5, 7};
    std::vector<double> out = minmax_normalize(basic);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.5);
    CHECK(out[2] == 1.0);

    std::vector<double> constant = {4.2, 4.2, 4.2};
    for (double v : minmax_normalize(constant)) CHECK(v == 0.0);

    std::vector<double> empty;
    CHECK_THROWS_AS(minmax_normalize(empty), std::invalid_argument);
}

TEST_CASE("minmax_normalize: non-constant input spans exactly [0,1]") {
    Rng rng(19);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> v(2 + rng.below(50));
        for (auto& x : v) x = rng.uniform(-100.0, 100.0);
        v[0] = -200.0;  // force non-constant
        std::vector<double> out = minmax_normalize(v);
        double lo = 1e9, hi = -1e9;
        for (double x : out) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
        }
        CHECK(lo == 0.0);
        CHECK(hi == 1.0);
    }
}

TEST_CASE("load_mnist_idx: works against the fetched real data when present") {
    const std::string img = std::string(ATNL_SOURCE_DIR) + "/data/train-images-idx3-ubyte";
    const std::string lab = std::string(ATNL_SOURCE_DIR) + "/data/train-labels-idx1-ubyte";
    if (!fs::exists(img)) {
        MESSAGE("data/ not fetched; skipping real-data check");
        return;
    }
    NoisyDataset ds = load_mnist_idx(img, lab, 100, 3);
    CHECK(ds.feature_dim() == 784);
    CHECK(ds.class_count == 10);
    CHECK(ds.size() == 100);
}
