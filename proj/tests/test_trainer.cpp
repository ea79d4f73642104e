#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cascade/checkpoint.hpp"
#include "cascade/episodes.hpp"
#include "cascade/trainer.hpp"

using namespace cascade;

TEST_CASE("sgd nesterov update rule") {
    NetworkSpec spec;
    spec.input_dim = 2;
    spec.blocks = 1;
    spec.hidden = 2;
    spec.classes = 2;
    spec.horizon = 1;

    SUBCASE("momentum 0, wd 0 reduces to plain sgd") {
        Network<float> net = make_network<float>(spec, 1);
        auto before = net.params[0].value;
        std::vector<Tensor<float>> grads;
        for (const auto& p : net.params) grads.push_back(Tensor<float>::full(p.value.shape, 0.5f));
        SgdNesterov<float> opt(0.f, 0.f);
        opt.step(net, grads, 0.1f);
        for (std::size_t j = 0; j < before.size(); ++j)
            CHECK(net.params[0].value.data[j] == doctest::Approx(before.data[j] - 0.05f).epsilon(1e-6));
    }
    SUBCASE("zero gradient and zero velocity leave decay-exempt parameters unchanged") {
        Network<float> net = make_network<float>(spec, 2);
        auto snapshot = net.params;
        std::vector<Tensor<float>> grads;
        for (const auto& p : net.params) grads.push_back(Tensor<float>::zeros(p.value.shape));
        SgdNesterov<float> opt(0.9f, 0.f);
        opt.step(net, grads, 0.1f);
        for (std::size_t i = 0; i < net.params.size(); ++i)
            CHECK(net.params[i].value.data == snapshot[i].value.data);
    }
    SUBCASE("two steps on a quadratic match the hand recursion") {
        // f(p) = 0.5 p^2, grad = p, start p=1, lr=0.1, mu=0.9, wd=0
        // hand: g1=1, v1=1, p2 = 1 - 0.1*(1+0.9*1) = 0.81
        //       g2=0.81, v2=0.9+0.81=1.71, p3 = 0.81 - 0.1*(0.81+0.9*1.71) = 0.5751
        Network<float> net = make_network<float>(spec, 3);
        net.params[0].value.data[0] = 1.f;
        SgdNesterov<float> opt(0.9f, 0.f);
        auto grad_of = [&] {
            std::vector<Tensor<float>> g;
            for (const auto& p : net.params) g.push_back(Tensor<float>::zeros(p.value.shape));
            g[0].data[0] = net.params[0].value.data[0];
            return g;
        };
        opt.step(net, grad_of(), 0.1f);
        CHECK(net.params[0].value.data[0] == doctest::Approx(0.81f).epsilon(1e-6));
        opt.step(net, grad_of(), 0.1f);
        CHECK(net.params[0].value.data[0] == doctest::Approx(0.5751f).epsilon(1e-6));
    }
    SUBCASE("weight-decay-only dynamics shrink weight norms monotonically") {
        Network<float> net = make_network<float>(spec, 4);
        SgdNesterov<float> opt(0.9f, 0.01f);
        std::vector<Tensor<float>> zero_grads;
        for (const auto& p : net.params) zero_grads.push_back(Tensor<float>::zeros(p.value.shape));
        auto weight_norm = [&] {
            double n = 0;
            for (const auto& p : net.params)
                if (p.decay)
                    for (float v : p.value.data) n += double(v) * double(v);
            return n;
        };
        double prev = weight_norm();
        for (int step = 0; step < 25; ++step) {
            opt.step(net, zero_grads, 0.05f);
            const double cur = weight_norm();
            CHECK(cur < prev);
            prev = cur;
        }
    }
}

TEST_CASE("lr schedule steps down by the decay factor") {
    CHECK(lr_schedule(0, 0.1, 0.2, 30) == doctest::Approx(0.1));
    CHECK(lr_schedule(29, 0.1, 0.2, 30) == doctest::Approx(0.1));
    CHECK(lr_schedule(30, 0.1, 0.2, 30) == doctest::Approx(0.02));
    CHECK(lr_schedule(90, 0.1, 0.2, 30) == doctest::Approx(0.1 * 0.008));
}

TEST_CASE("adam first step moves by roughly lr in the gradient direction") {
    std::vector<Tensor<float>> params = {Tensor<float>({2}, {1.f, -1.f})};
    std::vector<Tensor<float>> grads = {Tensor<float>({2}, {0.3f, -0.2f})};
    Adam<float> opt(0.001f, 0.f);
    opt.step(params, grads);
    CHECK(params[0].data[0] == doctest::Approx(1.f - 0.001f).epsilon(1e-3));
    CHECK(params[0].data[1] == doctest::Approx(-1.f + 0.001f).epsilon(1e-3));
}

TEST_CASE("augmentation pipeline") {
    DatasetSpec dspec;
    dspec.classes = 2;
    dspec.synthetic_count = 8;
    Dataset ds = make_synthetic(dspec, 5);
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    PixelStats stats = pixel_stats(ds, all);

    SUBCASE("all flags off means standard-normalize only") {
        Rng rng(1);
        AugmentFlags flags; // normalize defaults on, everything else off
        Image out = augment(ds.images[0], flags, stats, rng);
        for (std::size_t i = 0; i < out.pix.size(); ++i)
            CHECK(out.pix[i] == doctest::Approx((ds.images[0].pix[i] - stats.mean[0]) / stats.stddev[0]));
    }
    SUBCASE("cutout on a constant normalized image zeroes exactly 64 pixels") {
        Image img;
        img.channels = 1;
        img.height = 16;
        img.width = 16;
        img.pix.assign(256, 1.5f);
        AugmentFlags flags;
        flags.normalize = false;
        flags.cutout = true;
        Rng rng(2);
        Image out = augment(img, flags, stats, rng);
        std::size_t zeros = 0;
        for (float v : out.pix)
            if (v == 0.f) ++zeros;
        CHECK(zeros == 64);
    }
    SUBCASE("pad-crop and flip preserve shape") {
        Rng rng(3);
        AugmentFlags flags;
        flags.pad_crop = true;
        flags.flip = true;
        Image out = augment(ds.images[1], flags, stats, rng);
        CHECK(out.height == 16);
        CHECK(out.width == 16);
    }
    SUBCASE("same seed gives a bitwise-identical augmented batch") {
        TrainConfig cfg;
        cfg.augment.pad_crop = true;
        cfg.augment.flip = true;
        cfg.augment.cutout = true;
        Rng r1(77), r2(77);
        auto b1 = augmented_batch(ds, all, cfg, stats, r1);
        auto b2 = augmented_batch(ds, all, cfg, stats, r2);
        CHECK(b1.data == b2.data);
    }
}

TEST_CASE("reflect padding mirrors without repeating the edge") {
    Image img;
    img.channels = 1;
    img.height = 2;
    img.width = 4;
    img.pix = {1.f, 2.f, 3.f, 4.f, 5.f, 6.f, 7.f, 8.f};
    Image out = reflect_pad(img, 1);
    REQUIRE(out.height == 4);
    REQUIRE(out.width == 6);
    // row -1 mirrors row 1, column -1 mirrors column 1
    CHECK(out.at(0, 0, 1) == 5.f);
    CHECK(out.at(0, 1, 0) == 2.f);
    CHECK(out.at(0, 1, 1) == 1.f);
    CHECK(out.at(0, 1, 5) == 3.f);
    CHECK(out.at(0, 3, 1) == 1.f);
}

namespace {

TrainConfig smoke_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.data.source = "synthetic";
    cfg.data.classes = 2;
    cfg.data.synthetic_count = 200;
    cfg.data.image_size = 12;
    cfg.data.jitter = 0.3;
    cfg.data.pixel_noise = 0.02;
    cfg.data.coarse_group = 1;
    cfg.data.seed = 5;
    cfg.blocks = 2;
    cfg.width = 16;
    cfg.T = 4;
    cfg.epochs = 5;
    cfg.batch_size = 32;
    cfg.lr = 0.05;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("training on a separable two-class set reaches high final-step accuracy") {
    TrainResult res = train(smoke_config(1));
    double final_train_acc = 0;
    for (const auto& r : res.metrics)
        if (r.epoch == 4 && r.t == 4 && r.split == "train") final_train_acc = r.accuracy;
    CHECK(final_train_acc > 0.95);
}

TEST_CASE("training is bitwise deterministic given the seed") {
    TrainResult a = train(smoke_config(9));
    TrainResult b = train(smoke_config(9));
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        CHECK(a.metrics[i].accuracy == b.metrics[i].accuracy);
        CHECK(a.metrics[i].loss == b.metrics[i].loss);
    }
    for (std::size_t p = 0; p < a.net.params.size(); ++p)
        CHECK(a.net.params[p].value.data == b.net.params[p].value.data);

    TrainResult c = train(smoke_config(10));
    bool differs = false;
    for (std::size_t p = 0; p < a.net.params.size() && !differs; ++p)
        differs = a.net.params[p].value.data != c.net.params[p].value.data;
    CHECK(differs);
}

TEST_CASE("divergent training aborts with a diagnostic") {
    TrainConfig cfg = smoke_config(2);
    cfg.lr = 1e18;
    cfg.epochs = 3;
    CHECK_THROWS_WITH_AS(train(cfg), doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("checkpoints round-trip exactly") {
    TrainResult res = train(smoke_config(3));
    const std::string path = "/tmp/cascade_test_ckpt.json";
    save_checkpoint(res.net, res.stats, path);
    auto [loaded, stats] = load_checkpoint<float>(path);
    REQUIRE(loaded.params.size() == res.net.params.size());
    for (std::size_t p = 0; p < loaded.params.size(); ++p) {
        CHECK(loaded.params[p].name == res.net.params[p].name);
        CHECK(loaded.params[p].value.data == res.net.params[p].value.data);
    }
    for (std::size_t n = 0; n < loaded.norms.size(); ++n)
        for (std::size_t t = 0; t < loaded.norms[n].run_mean.size(); ++t) {
            CHECK(loaded.norms[n].run_mean[t].data == res.net.norms[n].run_mean[t].data);
            CHECK(loaded.norms[n].run_var[t].data == res.net.norms[n].run_var[t].data);
        }
    CHECK(stats.mean == res.stats.mean);

    // the restored network computes identical outputs
    Rng rng(4);
    Tensor<float> x = image_batch<float>(res.dataset, {0, 1, 2}, res.stats);
    auto want = forward_standard(res.net, x);
    auto got = forward_standard(loaded, x);
    CHECK(want.data == got.data);
    std::remove(path.c_str());
}

TEST_CASE("serial-mode training runs and reaches forward_standard at the final step") {
    TrainConfig cfg = smoke_config(6);
    cfg.mode = "serial";
    cfg.T = 3; // blocks + 1
    cfg.epochs = 2;
    TrainResult res = train(cfg);
    Tensor<float> x = image_batch<float>(res.dataset, {0}, res.stats);
    auto serial = run_serial(res.net, x, 3);
    auto std_logits = forward_standard(res.net, x);
    CHECK(serial.logits.back().data == std_logits.data);
}

TEST_CASE("transient episodes with no noise have zero dip") {
    TrainConfig cfg = smoke_config(7);
    cfg.epochs = 2;
    TrainResult res = train(cfg);
    NoiseSpec noise;
    noise.kind = NoiseKind::Occlusion;
    noise.patch = 6;
    Rng rng(8);
    const double dip = transient_noise_dip(res.net, res.dataset.images[0], res.dataset.labels[0],
                                           res.stats, noise, TemporalKernel::osd(), 0, rng);
    CHECK(std::abs(dip) < 1e-6);
}

TEST_CASE("persistent noise accuracy stays within [0,1] and is seed-stable") {
    TrainConfig cfg = smoke_config(11);
    cfg.epochs = 2;
    TrainResult res = train(cfg);
    NoiseSpec noise;
    noise.kind = NoiseKind::Occlusion;
    noise.patch = 6;
    std::vector<std::size_t> idx(res.val_idx.begin(), res.val_idx.begin() + 5);
    const double a = persistent_noise_accuracy(res.net, res.dataset, idx, res.stats, noise,
                                               TemporalKernel::osd(), 8, 2, 123);
    const double b = persistent_noise_accuracy(res.net, res.dataset, idx, res.stats, noise,
                                               TemporalKernel::osd(), 8, 2, 123);
    CHECK(a == b);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
}
