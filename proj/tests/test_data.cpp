#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "cascade/data.hpp"

using namespace cascade;

TEST_CASE("synthetic dataset basics") {
    DatasetSpec spec;
    spec.classes = 6;
    spec.synthetic_count = 120;
    spec.image_size = 16;
    spec.coarse_group = 2;
    spec.seed = 7;
    Dataset ds = make_synthetic(spec, 11);

    CHECK(ds.size() == 120);
    CHECK(ds.classes == 6);
    CHECK(ds.input_dim() == 256);
    SUBCASE("labels balanced and coarse map total") {
        std::vector<std::size_t> counts(6, 0);
        for (auto l : ds.labels) counts[l]++;
        for (auto c : counts) CHECK(c == 20);
        REQUIRE(ds.coarse_map.size() == 6);
        CHECK(ds.coarse_map == std::vector<std::size_t>{0, 0, 1, 1, 2, 2});
    }
    SUBCASE("pixels in range") {
        for (const auto& img : ds.images)
            for (float v : img.pix) {
                CHECK(v >= 0.f);
                CHECK(v <= 1.f);
            }
    }
    SUBCASE("same seeds reproduce bitwise, different instance seeds differ") {
        Dataset again = make_synthetic(spec, 11);
        REQUIRE(again.size() == ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) CHECK(again.images[i].pix == ds.images[i].pix);
        Dataset other = make_synthetic(spec, 12);
        bool any_diff = false;
        for (std::size_t i = 0; i < ds.size() && !any_diff; ++i)
            any_diff = other.images[i].pix != ds.images[i].pix;
        CHECK(any_diff);
    }
}

TEST_CASE("class-balanced split") {
    DatasetSpec spec;
    spec.classes = 5;
    spec.synthetic_count = 500;
    spec.seed = 3;
    Dataset ds = make_synthetic(spec, 3);
    auto [train, val] = split_class_balanced(ds, 0.9, 99);

    CHECK(train.size() + val.size() == ds.size());
    SUBCASE("per-class validation counts are exactly balanced") {
        std::vector<std::size_t> vc(5, 0);
        for (auto i : val) vc[ds.labels[i]]++;
        for (auto c : vc) CHECK(c == 10); // 100 per class, 10% held out
    }
    SUBCASE("disjoint and exhaustive") {
        std::vector<char> seen(ds.size(), 0);
        for (auto i : train) seen[i] += 1;
        for (auto i : val) seen[i] += 1;
        for (char s : seen) CHECK(int(s) == 1);
    }
    SUBCASE("seeded determinism") {
        auto [t2, v2] = split_class_balanced(ds, 0.9, 99);
        CHECK(t2 == train);
        CHECK(v2 == val);
    }
}

TEST_CASE("pixel stats match a direct computation") {
    DatasetSpec spec;
    spec.classes = 2;
    spec.synthetic_count = 40;
    Dataset ds = make_synthetic(spec, 1);
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto st = pixel_stats(ds, idx);
    double m = 0;
    std::size_t n = 0;
    for (const auto& img : ds.images)
        for (float v : img.pix) {
            m += v;
            ++n;
        }
    m /= double(n);
    CHECK(st.mean[0] == doctest::Approx(m).epsilon(1e-5));
    CHECK(st.stddev[0] > 0.f);
}

TEST_CASE("idx loader round-trips a hand-written file pair") {
    const std::string imgs = "/tmp/cascade_test_images.idx";
    const std::string lbls = "/tmp/cascade_test_labels.idx";
    {
        std::ofstream f(imgs, std::ios::binary);
        const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3};
        f.write(reinterpret_cast<const char*>(header), sizeof header);
        const unsigned char pix[12] = {0, 51, 102, 153, 204, 255, 10, 20, 30, 40, 50, 60};
        f.write(reinterpret_cast<const char*>(pix), sizeof pix);
    }
    {
        std::ofstream f(lbls, std::ios::binary);
        const unsigned char header[] = {0, 0, 8, 1, 0, 0, 0, 2};
        f.write(reinterpret_cast<const char*>(header), sizeof header);
        const unsigned char lab[2] = {1, 0};
        f.write(reinterpret_cast<const char*>(lab), sizeof lab);
    }
    Dataset ds = load_idx(imgs, lbls);
    CHECK(ds.size() == 2);
    CHECK(ds.height == 2);
    CHECK(ds.width == 3);
    CHECK(ds.classes == 2);
    CHECK(ds.labels == std::vector<std::size_t>{1, 0});
    CHECK(ds.images[0].pix[1] == doctest::Approx(51.f / 255.f));
    CHECK(ds.images[1].pix[5] == doctest::Approx(60.f / 255.f));

    SUBCASE("bad magic rejected") {
        CHECK_THROWS_AS(load_idx(lbls, imgs), std::runtime_error);
    }
    std::remove(imgs.c_str());
    std::remove(lbls.c_str());
}

TEST_CASE("cifar binary loader reads 3073-byte records") {
    const std::string file = "/tmp/cascade_test_cifar.bin";
    {
        std::ofstream f(file, std::ios::binary);
        std::vector<unsigned char> rec(3073, 0);
        rec[0] = 7; // label
        rec[1] = 255;
        rec[3072] = 128;
        f.write(reinterpret_cast<const char*>(rec.data()), 3073);
        rec[0] = 2;
        f.write(reinterpret_cast<const char*>(rec.data()), 3073);
    }
    Dataset ds = load_cifar_binary(file);
    CHECK(ds.size() == 2);
    CHECK(ds.channels == 3);
    CHECK(ds.height == 32);
    CHECK(ds.labels == std::vector<std::size_t>{7, 2});
    CHECK(ds.images[0].pix[0] == doctest::Approx(1.f));
    CHECK(ds.images[0].pix[3071] == doctest::Approx(128.f / 255.f));

    SUBCASE("partial record rejected") {
        std::ofstream f(file, std::ios::binary | std::ios::app);
        const char junk[5] = {1, 2, 3, 4, 5};
        f.write(junk, 5);
        f.close();
        CHECK_THROWS_AS(load_cifar_binary(file), std::runtime_error);
    }
    std::remove(file.c_str());
}

TEST_CASE("dataset spec dispatch") {
    DatasetSpec spec;
    spec.source = "synthetic";
    spec.classes = 2;
    spec.synthetic_count = 10;
    CHECK(load_dataset(spec, 1).size() == 10);
    spec.source = "martian";
    CHECK_THROWS_AS(load_dataset(spec, 1), std::invalid_argument);
    spec.source = "idx";
    spec.path = "no_comma_here";
    CHECK_THROWS_AS(load_dataset(spec, 1), std::runtime_error);
}
