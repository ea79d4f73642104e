#include "cascade/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace cascade {

PixelStats pixel_stats(const Dataset& ds, const std::vector<std::size_t>& indices) {
    PixelStats st;
    st.mean.assign(ds.channels, 0.f);
    st.stddev.assign(ds.channels, 0.f);
    const std::size_t per = ds.height * ds.width;
    double count = double(indices.size()) * double(per);
    for (std::size_t c = 0; c < ds.channels; ++c) {
        double m = 0;
        for (auto i : indices)
            for (std::size_t p = 0; p < per; ++p) m += ds.images[i].pix[c * per + p];
        m /= count;
        double v = 0;
        for (auto i : indices)
            for (std::size_t p = 0; p < per; ++p) {
                const double d = ds.images[i].pix[c * per + p] - m;
                v += d * d;
            }
        v /= count;
        st.mean[c] = float(m);
        st.stddev[c] = float(std::sqrt(std::max(v, 1e-12)));
    }
    return st;
}

namespace {

void add_blob(Image& img, double cx, double cy, double sigma, double amp) {
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) {
            const double dx = double(x) - cx, dy = double(y) - cy;
            img.at(0, y, x) += float(amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)));
        }
}

struct Blob {
    double cx, cy, sigma, amp;
};

} // namespace

Dataset make_synthetic(const DatasetSpec& spec, std::uint64_t instance_seed) {
    if (spec.classes < 2) throw std::invalid_argument("make_synthetic: need at least 2 classes");
    const std::size_t S = spec.image_size;
    Dataset ds;
    ds.channels = 1;
    ds.height = S;
    ds.width = S;
    ds.classes = spec.classes;

    // class structure comes from the dataset seed, instances from the run seed
    Rng proto_rng(derive_seed(spec.seed, "synthetic-prototypes"));
    const std::size_t group = std::max<std::size_t>(1, spec.coarse_group);
    const std::size_t n_coarse = (spec.classes + group - 1) / group;
    ds.coarse_map.resize(spec.classes);
    for (std::size_t k = 0; k < spec.classes; ++k) ds.coarse_map[k] = k / group;

    auto rand_blob = [&](Rng& r, double amp_lo, double amp_hi) {
        Blob b;
        b.cx = r.uniform(0.2, 0.8) * double(S);
        b.cy = r.uniform(0.2, 0.8) * double(S);
        b.sigma = r.uniform(0.09, 0.2) * double(S);
        b.amp = r.uniform(amp_lo, amp_hi);
        return b;
    };

    std::vector<std::vector<Blob>> coarse_blobs(n_coarse);
    for (auto& blobs : coarse_blobs)
        for (int i = 0; i < 2; ++i) blobs.push_back(rand_blob(proto_rng, 0.45, 0.7));
    std::vector<std::vector<Blob>> fine_blobs(spec.classes);
    for (auto& blobs : fine_blobs)
        for (int i = 0; i < 2; ++i) blobs.push_back(rand_blob(proto_rng, 0.5, 0.8));

    const std::size_t per_class = spec.synthetic_count / spec.classes;
    Rng inst_rng(derive_seed(instance_seed, "synthetic-instances"));
    for (std::size_t k = 0; k < spec.classes; ++k) {
        for (std::size_t i = 0; i < per_class; ++i) {
            Image img;
            img.channels = 1;
            img.height = S;
            img.width = S;
            img.pix.assign(S * S, 0.f);
            // graded typicality: jitter magnitude itself is random per instance
            const double j = spec.jitter * std::abs(inst_rng.normal());
            auto render = [&](const Blob& b) {
                add_blob(img, b.cx + j * inst_rng.normal(), b.cy + j * inst_rng.normal(),
                         b.sigma * (1.0 + 0.1 * j * inst_rng.normal()),
                         b.amp * (1.0 + 0.08 * j * inst_rng.normal()));
            };
            for (const auto& b : coarse_blobs[ds.coarse_map[k]]) render(b);
            for (const auto& b : fine_blobs[k]) render(b);
            for (auto& v : img.pix) {
                v += float(spec.pixel_noise * inst_rng.normal());
                v = std::clamp(v, 0.f, 1.f);
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(k);
        }
    }
    return ds;
}

Dataset make_two_blob(std::size_t count, std::size_t image_size, std::uint64_t seed) {
    DatasetSpec spec;
    spec.classes = 2;
    spec.coarse_group = 1;
    spec.synthetic_count = count;
    spec.image_size = image_size;
    spec.jitter = 0.3;
    spec.pixel_noise = 0.02;
    spec.seed = seed;
    return make_synthetic(spec, seed);
}

namespace {

std::uint32_t read_be32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("idx: truncated header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
}

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imf(images_path, std::ios::binary);
    if (!imf) throw std::runtime_error("idx: cannot open " + images_path);
    const std::uint32_t magic = read_be32(imf);
    if (magic != 0x00000803) throw std::runtime_error("idx: bad image magic in " + images_path);
    const std::uint32_t n = read_be32(imf), h = read_be32(imf), w = read_be32(imf);

    std::ifstream lbf(labels_path, std::ios::binary);
    if (!lbf) throw std::runtime_error("idx: cannot open " + labels_path);
    if (read_be32(lbf) != 0x00000801) throw std::runtime_error("idx: bad label magic in " + labels_path);
    if (read_be32(lbf) != n) throw std::runtime_error("idx: image/label count mismatch");

    Dataset ds;
    ds.channels = 1;
    ds.height = h;
    ds.width = w;
    std::vector<unsigned char> buf(std::size_t(h) * w);
    std::size_t max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        imf.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
        if (!imf) throw std::runtime_error("idx: truncated image data");
        Image img;
        img.channels = 1;
        img.height = h;
        img.width = w;
        img.pix.resize(buf.size());
        for (std::size_t p = 0; p < buf.size(); ++p) img.pix[p] = float(buf[p]) / 255.f;
        ds.images.push_back(std::move(img));
        char lb = 0;
        lbf.read(&lb, 1);
        if (!lbf) throw std::runtime_error("idx: truncated label data");
        ds.labels.push_back(std::size_t(static_cast<unsigned char>(lb)));
        max_label = std::max(max_label, ds.labels.back());
    }
    ds.classes = max_label + 1;
    return ds;
}

namespace {

void read_cifar_file(const std::string& file, Dataset& ds) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cifar: cannot open " + file);
    constexpr std::size_t rec = 3073;
    std::vector<unsigned char> buf(rec);
    while (in.read(reinterpret_cast<char*>(buf.data()), rec)) {
        Image img;
        img.channels = 3;
        img.height = 32;
        img.width = 32;
        img.pix.resize(3072);
        for (std::size_t p = 0; p < 3072; ++p) img.pix[p] = float(buf[p + 1]) / 255.f;
        ds.images.push_back(std::move(img));
        ds.labels.push_back(buf[0]);
    }
    if (in.gcount() != 0) throw std::runtime_error("cifar: trailing partial record in " + file);
}

} // namespace

Dataset load_cifar_binary(const std::string& path) {
    Dataset ds;
    ds.channels = 3;
    ds.height = 32;
    ds.width = 32;
    ds.classes = 10;
    namespace fs = std::filesystem;
    if (fs::is_directory(path)) {
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(path))
            if (e.path().extension() == ".bin") files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw std::runtime_error("cifar: no .bin files under " + path);
        for (const auto& f : files) read_cifar_file(f, ds);
    } else {
        read_cifar_file(path, ds);
    }
    return ds;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_class_balanced(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction > 1.0)
        throw std::invalid_argument("split: train_fraction must be in (0,1]");
    std::vector<std::vector<std::size_t>> per_class(ds.classes);
    for (std::size_t i = 0; i < ds.size(); ++i) per_class[ds.labels[i]].push_back(i);
    std::vector<std::size_t> train, val;
    for (std::size_t k = 0; k < per_class.size(); ++k) {
        Rng rng(derive_seed(seed, "split", k));
        shuffle(per_class[k], rng);
        const std::size_t n_train = std::size_t(std::llround(train_fraction * double(per_class[k].size())));
        for (std::size_t i = 0; i < per_class[k].size(); ++i)
            (i < n_train ? train : val).push_back(per_class[k][i]);
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t run_seed) {
    if (spec.source == "synthetic") return make_synthetic(spec, run_seed);
    if (spec.source == "idx") {
        const auto comma = spec.path.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("idx dataset path must be 'images_file,labels_file'");
        return load_idx(spec.path.substr(0, comma), spec.path.substr(comma + 1));
    }
    if (spec.source == "cifar-binary") return load_cifar_binary(spec.path);
    throw std::invalid_argument("unknown dataset source '" + spec.source + "'");
}

} // namespace cascade
