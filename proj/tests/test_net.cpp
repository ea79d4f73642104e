#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cascade/net.hpp"

using namespace cascade;

namespace {

NetworkSpec mlp_spec(std::size_t B, std::size_t hidden = 6, std::size_t classes = 4,
                     std::size_t horizon = 12, std::size_t input = 5) {
    NetworkSpec s;
    s.input_dim = input;
    s.blocks = B;
    s.hidden = hidden;
    s.classes = classes;
    s.horizon = horizon;
    return s;
}

template <typename T>
double max_rel_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(double(a.data[i]) - double(b.data[i])) /
                         std::max({1e-12, std::abs(double(a.data[i])), std::abs(double(b.data[i]))});
        worst = std::max(worst, d);
    }
    return worst;
}

} // namespace

TEST_CASE("identity kernel trace is constant and bit-equal to forward_standard") {
    Rng rng(10);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Network<double> net = make_network<double>(mlp_spec(3), seed);
        Tensor<double> x = Tensor<double>::randn({2, 5}, rng);
        Tensor<double> std_logits = forward_standard(net, x);
        auto trace = run_cascaded_static(net, x, 6, TemporalKernel::identity());
        for (const auto& lt : trace.logits)
            for (std::size_t i = 0; i < lt.size(); ++i) CHECK(lt.data[i] == std_logits.data[i]);
    }
}

TEST_CASE("osd cascade reaches forward_standard exactly at step D = B+1") {
    Rng rng(20);
    for (std::size_t B : {2u, 4u, 8u}) {
        CAPTURE(B);
        Network<double> net = make_network<double>(mlp_spec(B), 100 + B);
        Tensor<double> x = Tensor<double>::randn({3, 5}, rng);
        Tensor<double> std_logits = forward_standard(net, x);
        const std::size_t D = B + 1;
        auto trace = run_cascaded_static(net, x, D + 3, TemporalKernel::osd());
        for (std::size_t t = D; t <= D + 3; ++t) {
            CHECK(max_rel_diff(trace.logits[t - 1], std_logits) < 1e-12);
            // static-input idempotence: trace frozen from D onward
            CHECK(max_rel_diff(trace.logits[t - 1], trace.logits[D - 1]) == 0.0);
        }
        // and strictly before D the outputs generally differ
        CHECK(max_rel_diff(trace.logits[D - 2], std_logits) > 1e-9);
    }
}

TEST_CASE("ews trace converges to forward_standard, gap non-increasing after transient") {
    Network<float> net = make_network<float>(mlp_spec(3), 77);
    Rng rng(30);
    Tensor<float> x = Tensor<float>::randn({1, 5}, rng);
    auto std_probs = softmax_rows(forward_standard(net, x));
    const std::size_t T = 150;
    auto trace = run_cascaded_static(net, x, T, TemporalKernel::ews(0.9));

    std::vector<double> gap(T);
    for (std::size_t t = 0; t < T; ++t) {
        double g = 0;
        for (std::size_t i = 0; i < std_probs.size(); ++i)
            g = std::max(g, std::abs(double(trace.probs[t].data[i]) - double(std_probs.data[i])));
        gap[t] = g;
    }
    // find the first step below 1e-3 and require monotone decrease afterwards
    std::size_t hit = T;
    for (std::size_t t = 0; t < T; ++t)
        if (gap[t] < 1e-3) { hit = t; break; }
    REQUIRE(hit < T);
    MESSAGE("ews alpha=0.9 reaches 1e-3 at step ", hit + 1);
    for (std::size_t t = hit; t + 1 < T; ++t) CHECK(gap[t + 1] <= gap[t] + 1e-7);
    CHECK(gap[T - 1] < 1e-4);
}

TEST_CASE("zero-weight net yields uniform softmax") {
    Network<double> net = make_network<double>(mlp_spec(2), 5);
    for (auto& p : net.params) std::fill(p.value.data.begin(), p.value.data.end(), 0.0);
    Rng rng(40);
    Tensor<double> x = Tensor<double>::randn({1, 5}, rng);
    auto probs = softmax_rows(forward_standard(net, x));
    for (double v : probs.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("every trace distribution sums to one") {
    Network<double> net = make_network<double>(mlp_spec(2), 9);
    Rng rng(50);
    Tensor<double> x = Tensor<double>::randn({4, 5}, rng);
    for (auto kernel : {TemporalKernel::identity(), TemporalKernel::osd(), TemporalKernel::ews(0.5)}) {
        auto trace = run_cascaded_static(net, x, 7, kernel);
        CHECK(trace.probs.size() == 7);
        CHECK(trace.cycles == 7);
        for (const auto& p : trace.probs)
            for (std::size_t n = 0; n < 4; ++n) {
                double s = 0;
                for (std::size_t c = 0; c < 4; ++c) {
                    CHECK(p.at(n, c) >= 0.0);
                    s += p.at(n, c);
                }
                CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
            }
    }
}

TEST_CASE("serial rollout endpoints and cycle accounting") {
    const std::size_t B = 3;
    Network<double> net = make_network<double>(mlp_spec(B), 123);
    Rng rng(60);
    Tensor<double> x = Tensor<double>::randn({2, 5}, rng);

    auto serial = run_serial(net, x, B + 1);
    auto cascaded = run_cascaded_static(net, x, B + 1, TemporalKernel::osd());
    CHECK(serial.cycles == cascaded.cycles); // same horizon, same block-update cycles

    SUBCASE("final step equals forward_standard bit-for-bit") {
        Tensor<double> std_logits = forward_standard(net, x);
        for (std::size_t i = 0; i < std_logits.size(); ++i)
            CHECK(serial.logits.back().data[i] == std_logits.data[i]);
    }
    SUBCASE("step 1 is the head applied to the stem output only") {
        Tape<double> tape;
        Runtime<double> rt(tape, net, false);
        Var s = rt.stem(tape.constant(x), net.spec.horizon);
        Var logits = rt.head(s, 1);
        for (std::size_t i = 0; i < tape.value(logits).size(); ++i)
            CHECK(serial.logits[0].data[i] == tape.value(logits).data[i]);
    }
    SUBCASE("T below B+1 is rejected") {
        CHECK_THROWS_AS(run_serial(net, x, B), std::invalid_argument);
    }
}

TEST_CASE("serial intermediate steps equal an explicitly truncated network") {
    // oracle: a network with blocks > t-1 removed entirely, sharing parameters
    const std::size_t B = 4;
    NetworkSpec spec = mlp_spec(B);
    Network<double> net = make_network<double>(spec, 321);
    Rng rng(70);
    Tensor<double> x = Tensor<double>::randn({2, 5}, rng);
    auto serial = run_serial(net, x, B + 1);

    for (std::size_t t = 2; t <= B; ++t) {
        NetworkSpec tspec = spec;
        tspec.blocks = t - 1;
        Network<double> trunc = make_network<double>(tspec, 999);
        // copy shared params by name; the truncated net keeps stem, blocks
        // 0..t-2 and the head
        for (auto& p : trunc.params)
            for (const auto& q : net.params)
                if (p.name == q.name) p.value = q.value;
        trunc.norms = std::vector<NormStats<double>>(net.norms.begin(), net.norms.begin() + 1 + 2 * (t - 1));
        Tensor<double> want = forward_standard(trunc, x);
        CAPTURE(t);
        CHECK(max_rel_diff(serial.logits[t - 1], want) < 1e-12);
    }
}

TEST_CASE("multi-head serial uses a separate head per step") {
    NetworkSpec spec = mlp_spec(2);
    spec.head_mode = HeadMode::MultiHead;
    spec.horizon = 3;
    Network<double> net = make_network<double>(spec, 42);
    CHECK(net.heads.size() == 3);
    Rng rng(80);
    Tensor<double> x = Tensor<double>::randn({1, 5}, rng);
    auto trace = run_serial(net, x, 3);
    CHECK(trace.probs.size() == 3);
    // heads differ, so equal inputs at different steps give different logits
    Tape<double> tape;
    Runtime<double> rt(tape, net, false);
    Var s = rt.stem(tape.constant(x), 3);
    auto h1 = tape.value(rt.head(s, 1));
    auto h2 = tape.value(rt.head(s, 2));
    CHECK(max_rel_diff(h1, h2) > 1e-9);
}

TEST_CASE("normalize clamps past the horizon and handles degenerate batches") {
    const std::size_t K = 4, horizon = 3;
    NormStats<double> stats(K, 1, horizon);
    Rng rng(90);
    Tensor<double> gamma = Tensor<double>::full({K}, 1.3);
    Tensor<double> beta = Tensor<double>::full({K}, -0.2);

    SUBCASE("eval before any training uses mean 0 / var 1") {
        Tape<double> tape;
        Tensor<double> x = Tensor<double>::randn({3, K}, rng);
        Var out = normalize(tape, tape.constant(x), stats, tape.constant(gamma), tape.constant(beta), 1, false);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double want = x.data[i] / std::sqrt(1.0 + 1e-5) * 1.3 - 0.2;
            CHECK(tape.value(out).data[i] == doctest::Approx(want).epsilon(1e-12));
        }
    }
    SUBCASE("eval at t > horizon equals eval at t = horizon") {
        // push distinct stats into each slot first
        for (std::size_t t = 1; t <= horizon; ++t) {
            Tape<double> tape;
            Tensor<double> x = Tensor<double>::randn({8, K}, rng);
            for (auto& v : x.data) v += double(t);
            normalize(tape, tape.constant(x), stats, tape.constant(gamma), tape.constant(beta), t, true);
        }
        Tape<double> tape;
        Tensor<double> x = Tensor<double>::randn({2, K}, rng);
        Var a = normalize(tape, tape.constant(x), stats, tape.constant(gamma), tape.constant(beta), horizon, false);
        Var b = normalize(tape, tape.constant(x), stats, tape.constant(gamma), tape.constant(beta), horizon + 5, false);
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(tape.value(a).data[i] == tape.value(b).data[i]);
    }
    SUBCASE("zero-variance feature maps to the offset") {
        Tape<double> tape;
        NormStats<double> fresh(K, 1, horizon);
        Tensor<double> x = Tensor<double>::full({5, K}, 2.5); // constant batch
        Var out = normalize(tape, tape.constant(x), fresh, tape.constant(gamma), tape.constant(beta), 1, true);
        for (double v : tape.value(out).data) CHECK(v == doctest::Approx(-0.2).epsilon(1e-12));
    }
}

TEST_CASE("running stats match direct recomputation with the same momentum") {
    const std::size_t K = 3;
    NormStats<double> stats(K, 1, 2);
    Rng rng(101);
    std::vector<Tensor<double>> batches;
    for (int i = 0; i < 6; ++i) batches.push_back(Tensor<double>::randn({7, K}, rng));

    Tensor<double> gamma = Tensor<double>::full({K}, 1.0), beta = Tensor<double>::zeros({K});
    for (const auto& b : batches) {
        Tape<double> tape;
        normalize(tape, tape.constant(b), stats, tape.constant(gamma), tape.constant(beta), 1, true);
    }

    // oracle: recompute the running means/vars directly
    std::vector<double> rm(K, 0.0), rv(K, 1.0);
    for (const auto& b : batches) {
        for (std::size_t k = 0; k < K; ++k) {
            double m = 0;
            for (std::size_t n = 0; n < 7; ++n) m += b.at(n, k);
            m /= 7;
            double v = 0;
            for (std::size_t n = 0; n < 7; ++n) v += (b.at(n, k) - m) * (b.at(n, k) - m);
            v /= 7;
            rm[k] = 0.9 * rm[k] + 0.1 * m;
            rv[k] = 0.9 * rv[k] + 0.1 * v;
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        CHECK(stats.run_mean[0].data[k] == doctest::Approx(rm[k]).epsilon(1e-5));
        CHECK(stats.run_var[0].data[k] == doctest::Approx(rv[k]).epsilon(1e-5));
    }
}

TEST_CASE("conv networks follow the same asymptotic contract") {
    NetworkSpec spec;
    spec.kind = NetKind::Conv;
    spec.channels_in = 1;
    spec.height = 5;
    spec.width = 5;
    spec.input_dim = 25;
    spec.blocks = 2;
    spec.hidden = 3; // channels
    spec.classes = 3;
    spec.horizon = 6;
    Network<double> net = make_network<double>(spec, 2222);
    Rng rng(110);
    Tensor<double> x = Tensor<double>::randn({2, 25}, rng);
    Tensor<double> std_logits = forward_standard(net, x);
    auto trace = run_cascaded_static(net, x, 5, TemporalKernel::osd());
    CHECK(max_rel_diff(trace.logits[2], std_logits) < 1e-12); // D = 3
    auto serial = run_serial(net, x, 3);
    CHECK(max_rel_diff(serial.logits.back(), std_logits) < 1e-12);
}

TEST_CASE("input contract violations are rejected") {
    Network<double> net = make_network<double>(mlp_spec(2), 1);
    Rng rng(120);
    Tensor<double> x = Tensor<double>::randn({1, 5}, rng);
    Tape<double> tape;
    Runtime<double> rt(tape, net, false);
    std::vector<Tensor<double>> frames(3, x);
    CHECK_THROWS_AS(rollout_cascaded(rt, net, frames, 5, TemporalKernel::osd()), std::invalid_argument);
    NetworkSpec bad = mlp_spec(0);
    CHECK_THROWS_AS(make_network<double>(bad, 1), std::invalid_argument);
}
