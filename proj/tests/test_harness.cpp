#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cascade/harness.hpp"
#include "cascade/rng.hpp"

using namespace cascade;

namespace {

InstanceTrace trace_of(const std::vector<std::vector<double>>& probs) {
    InstanceTrace tr;
    tr.probs = probs;
    tr.logits = probs; // analyses under test only read probs
    tr.cycles = probs.size();
    return tr;
}

InstanceTrace random_trace(Rng& rng, std::size_t T, std::size_t C) {
    std::vector<std::vector<double>> probs(T, std::vector<double>(C));
    for (auto& row : probs) {
        double s = 0;
        for (auto& v : row) s += (v = 0.01 + rng.uniform());
        for (auto& v : row) v /= s;
    }
    return trace_of(probs);
}

} // namespace

TEST_CASE("stop_time endpoints and hand case") {
    auto tr = trace_of({{0.4, 0.6}, {0.7, 0.3}, {0.9, 0.1}});
    CHECK(stop_time(tr, StoppingPolicy::confidence(0.0)) == 1);
    CHECK(stop_time(tr, StoppingPolicy::confidence(1.0)) == 3); // probabilities never exceed 1
    CHECK(stop_time(tr, StoppingPolicy::confidence(0.6)) == 2); // first step with max prob > 0.6
    CHECK(stop_time(tr, StoppingPolicy::at_deadline(2)) == 2);
    CHECK(stop_time(tr, StoppingPolicy::at_deadline(9)) == 3);
}

TEST_CASE("stop_time is non-decreasing in theta for every trace") {
    Rng rng(1);
    for (int rep = 0; rep < 30; ++rep) {
        auto tr = random_trace(rng, 2 + rng.index(8), 2 + rng.index(4));
        std::size_t prev = 1;
        for (int k = 0; k <= 20; ++k) {
            const std::size_t st = stop_time(tr, StoppingPolicy::confidence(k / 20.0));
            CHECK(st >= prev);
            prev = st;
        }
    }
}

TEST_CASE("speed_accuracy_curve") {
    SUBCASE("theta grid {0,1} gives the two endpoint rows") {
        auto tr = trace_of({{0.9, 0.1}, {0.2, 0.8}, {0.1, 0.9}});
        auto curve = speed_accuracy_curve({tr}, {1}, {0.0, 1.0});
        REQUIRE(curve.size() == 2);
        CHECK(curve[0].mean_stop_cycles == doctest::Approx(1.0));
        CHECK(curve[0].mean_accuracy == doctest::Approx(0.0)); // argmax at t=1 is class 0
        CHECK(curve[1].mean_stop_cycles == doctest::Approx(3.0));
        CHECK(curve[1].mean_accuracy == doctest::Approx(1.0));
    }
    SUBCASE("all-correct constant traces have accuracy 1 everywhere") {
        std::vector<InstanceTrace> traces;
        std::vector<std::size_t> labels;
        for (int i = 0; i < 5; ++i) {
            traces.push_back(trace_of({{0.05, 0.95}, {0.05, 0.95}}));
            labels.push_back(1);
        }
        for (const auto& pt : speed_accuracy_curve(traces, labels, {0.0, 0.3, 0.9, 1.0}))
            CHECK(pt.mean_accuracy == doctest::Approx(1.0));
    }
    SUBCASE("matches brute-force per-instance enumeration") {
        Rng rng(2);
        std::vector<InstanceTrace> traces;
        std::vector<std::size_t> labels;
        for (int i = 0; i < 10; ++i) {
            traces.push_back(random_trace(rng, 6, 3));
            labels.push_back(rng.index(3));
        }
        std::vector<double> grid;
        for (int k = 0; k <= 10; ++k) grid.push_back(k / 10.0);
        auto curve = speed_accuracy_curve(traces, labels, grid);
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            double stop_sum = 0, acc_sum = 0;
            for (std::size_t i = 0; i < traces.size(); ++i) {
                std::size_t st = traces[i].steps();
                for (std::size_t t = 0; t < traces[i].steps(); ++t) {
                    double mx = 0;
                    for (double v : traces[i].probs[t]) mx = std::max(mx, v);
                    if (mx > grid[gi]) { st = t + 1; break; }
                }
                stop_sum += double(st);
                std::size_t arg = 0;
                for (std::size_t c = 1; c < 3; ++c)
                    if (traces[i].probs[st - 1][c] > traces[i].probs[st - 1][arg]) arg = c;
                acc_sum += arg == labels[i] ? 1 : 0;
            }
            CHECK(curve[gi].mean_stop_cycles == doctest::Approx(stop_sum / 10.0).epsilon(1e-12));
            CHECK(curve[gi].mean_accuracy == doctest::Approx(acc_sum / 10.0).epsilon(1e-12));
        }
    }
    SUBCASE("mean stop time is monotone along the curve") {
        Rng rng(3);
        std::vector<InstanceTrace> traces;
        std::vector<std::size_t> labels;
        for (int i = 0; i < 20; ++i) {
            traces.push_back(random_trace(rng, 8, 4));
            labels.push_back(rng.index(4));
        }
        std::vector<double> grid;
        for (int k = 0; k <= 50; ++k) grid.push_back(k / 50.0);
        auto curve = speed_accuracy_curve(traces, labels, grid);
        for (std::size_t i = 1; i < curve.size(); ++i)
            CHECK(curve[i].mean_stop_cycles >= curve[i - 1].mean_stop_cycles - 1e-12);
    }
}

TEST_CASE("selection_latency") {
    SUBCASE("class above threshold throughout gives 1") {
        auto tr = trace_of({{0.7, 0.3}, {0.8, 0.2}, {0.9, 0.1}});
        CHECK(selection_latency(tr, 0.6) == 1);
    }
    SUBCASE("no class ever above gives none") {
        auto tr = trace_of({{0.5, 0.5}, {0.55, 0.45}});
        CHECK(!selection_latency(tr, 0.9).has_value());
    }
    SUBCASE("above-below-above reports the final crossing, unlike stop_time") {
        auto tr = trace_of({{0.9, 0.1}, {0.4, 0.6}, {0.9, 0.1}, {0.92, 0.08}});
        CHECK(stop_time(tr, StoppingPolicy::confidence(0.8)) == 1);
        CHECK(selection_latency(tr, 0.8) == 3);
    }
    SUBCASE("never at least stop_time for matching theta") {
        Rng rng(4);
        for (int rep = 0; rep < 40; ++rep) {
            auto tr = random_trace(rng, 2 + rng.index(8), 3);
            const double theta = rng.uniform();
            auto lat = selection_latency(tr, theta);
            if (lat) CHECK(*lat >= stop_time(tr, StoppingPolicy::confidence(theta)));
        }
    }
}

TEST_CASE("taxonomic_compliance") {
    SUBCASE("six-instance hand count") {
        // classes {0,1,2,3}, coarse pairs {0,1}->0, {2,3}->1
        std::vector<std::size_t> coarse = {0, 0, 1, 1};
        std::vector<InstanceTrace> traces;
        std::vector<std::size_t> fine;
        auto pred = [&](std::size_t cls) {
            std::vector<double> row(4, 0.05);
            row[cls] = 0.85;
            traces.push_back(trace_of({row}));
        };
        pred(0); fine.push_back(0); // correct, excluded
        pred(1); fine.push_back(0); // wrong fine, same coarse -> compliant
        pred(2); fine.push_back(0); // wrong fine, wrong coarse
        pred(3); fine.push_back(2); // wrong fine, same coarse -> compliant
        pred(0); fine.push_back(3); // wrong fine, wrong coarse
        pred(1); fine.push_back(1); // correct, excluded
        auto c = taxonomic_compliance(traces, fine, coarse, 1);
        REQUIRE(c.has_value());
        CHECK(*c == doctest::Approx(2.0 / 4.0));
    }
    SUBCASE("all predictions correct gives none") {
        std::vector<InstanceTrace> traces = {trace_of({{0.9, 0.1}}), trace_of({{0.1, 0.9}})};
        auto c = taxonomic_compliance(traces, {0, 1}, {0, 1}, 1);
        CHECK(!c.has_value());
    }
    SUBCASE("uniform-random predictor sits at the closed-form chance level") {
        // K fine classes in groups of g: P(correct coarse | wrong fine) = (g-1)/(K-1)
        Rng rng(5);
        const std::size_t K = 12, g = 3;
        std::vector<std::size_t> coarse(K);
        for (std::size_t k = 0; k < K; ++k) coarse[k] = k / g;
        std::vector<InstanceTrace> traces;
        std::vector<std::size_t> fine;
        for (int i = 0; i < 20000; ++i) {
            std::vector<double> row(K, 0.01);
            row[rng.index(K)] = 0.9;
            traces.push_back(trace_of({row}));
            fine.push_back(rng.index(K));
        }
        auto c = taxonomic_compliance(traces, fine, coarse, 1);
        REQUIRE(c.has_value());
        CHECK(*c == doctest::Approx(double(g - 1) / double(K - 1)).epsilon(0.12));
        CHECK(*c >= 0.0);
        CHECK(*c <= 1.0);
    }
}

TEST_CASE("centrality") {
    CHECK(centrality({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(centrality({1, 0}, {0, 5}) == doctest::Approx(0.0));
    SUBCASE("matches the direct dot/norm computation") {
        Rng rng(6);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> a(8), b(8);
            for (auto& v : a) v = rng.normal();
            for (auto& v : b) v = rng.normal();
            double dot = 0, na = 0, nb = 0;
            for (std::size_t i = 0; i < 8; ++i) {
                dot += a[i] * b[i];
                na += a[i] * a[i];
                nb += b[i] * b[i];
            }
            CHECK(centrality(a, b) == doctest::Approx(dot / std::sqrt(na * nb)).epsilon(1e-12));
            CHECK(centrality(a, b) >= -1.0 - 1e-12);
            CHECK(centrality(a, b) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("drop in integrated performance") {
    SUBCASE("hand trace") {
        CHECK(drop_in_integrated_performance({0.9, 0.9, 0.5, 0.7, 0.9}, 2) == doctest::Approx(0.2).epsilon(1e-12));
    }
    SUBCASE("constant confidence gives zero") {
        CHECK(drop_in_integrated_performance({0.8, 0.8, 0.8, 0.8}, 1) == doctest::Approx(0.0));
    }
    SUBCASE("onset bounds checked") {
        CHECK_THROWS_AS(drop_in_integrated_performance({0.5}, 1), std::invalid_argument);
    }
}
