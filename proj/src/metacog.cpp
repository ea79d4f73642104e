#include "cascade/metacog.hpp"

#include <algorithm>

namespace cascade {

FeatureKind feature_kind_from_name(const std::string& name) {
    if (name == "msp") return FeatureKind::MSP;
    if (name == "entropy") return FeatureKind::Entropy;
    if (name == "softmax") return FeatureKind::Softmax;
    if (name == "logits") return FeatureKind::Logits;
    throw std::invalid_argument("unknown feature kind '" + name + "'");
}

FeatureScope feature_scope_from_name(const std::string& name) {
    if (name == "final") return FeatureScope::FinalStep;
    if (name == "all") return FeatureScope::AllSteps;
    throw std::invalid_argument("unknown feature scope '" + name + "'");
}

const char* feature_kind_name(FeatureKind k) {
    switch (k) {
        case FeatureKind::MSP: return "msp";
        case FeatureKind::Entropy: return "entropy";
        case FeatureKind::Softmax: return "softmax";
        case FeatureKind::Logits: return "logits";
    }
    return "?";
}

const char* feature_scope_name(FeatureScope s) {
    return s == FeatureScope::FinalStep ? "final" : "all";
}

TraceFeatures build_trace_features(const InstanceTrace& trace, FeatureKind kind, FeatureScope scope) {
    if (trace.steps() == 0) throw std::invalid_argument("build_trace_features: empty trace");
    const std::size_t C = trace.classes();
    TraceFeatures f;
    f.kind = kind;
    f.scope = scope;
    f.per_step = (kind == FeatureKind::Softmax || kind == FeatureKind::Logits) ? C : 1;
    const std::size_t first = scope == FeatureScope::FinalStep ? trace.steps() - 1 : 0;
    f.steps = trace.steps() - first;
    f.vec.reserve(f.steps * f.per_step);
    for (std::size_t t = first; t < trace.steps(); ++t) {
        switch (kind) {
            case FeatureKind::MSP:
                f.vec.push_back(trace.probs[t][argmax_class(trace.probs[t])]);
                break;
            case FeatureKind::Entropy: {
                double h = 0;
                for (double p : trace.probs[t])
                    if (p > 0) h -= p * std::log(p);
                f.vec.push_back(h);
                break;
            }
            case FeatureKind::Softmax:
                f.vec.insert(f.vec.end(), trace.probs[t].begin(), trace.probs[t].end());
                break;
            case FeatureKind::Logits:
                f.vec.insert(f.vec.end(), trace.logits[t].begin(), trace.logits[t].end());
                break;
        }
    }
    return f;
}

namespace {

Tensor<float> feature_matrix(const std::vector<TraceFeatures>& rows, std::size_t dim) {
    Tensor<float> m({rows.size(), dim});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].vec.size() != dim)
            throw std::invalid_argument("metacog: inconsistent feature widths");
        for (std::size_t j = 0; j < dim; ++j) m.data[i * dim + j] = float(rows[i].vec[j]);
    }
    return m;
}

} // namespace

MetaCogModel train_metacog(const std::vector<TraceFeatures>& in_dist,
                           const std::vector<TraceFeatures>& out_dist, const MetaCogConfig& cfg) {
    if (in_dist.empty() || out_dist.empty())
        throw std::invalid_argument("train_metacog: need both in- and out-of-distribution examples");
    const std::size_t dim = in_dist[0].vec.size();
    const std::size_t n = in_dist.size() + out_dist.size();

    Tensor<float> x({n, dim});
    Tensor<float> y({n, 1});
    {
        auto xin = feature_matrix(in_dist, dim);
        auto xout = feature_matrix(out_dist, dim);
        std::copy(xin.data.begin(), xin.data.end(), x.data.begin());
        std::copy(xout.data.begin(), xout.data.end(), x.data.begin() + long(in_dist.size() * dim));
        for (std::size_t i = 0; i < in_dist.size(); ++i) y.data[i] = 1.f; // 1 = in-distribution
    }

    Rng init_rng(derive_seed(cfg.seed, "metacog-init"));
    MetaCogModel model;
    model.w1 = Tensor<float>::randn({dim, cfg.hidden}, init_rng,
                                    float(std::sqrt(2.0 / double(std::max<std::size_t>(dim, 1)))));
    model.b1 = Tensor<float>::zeros({cfg.hidden});
    model.w2 = Tensor<float>::randn({cfg.hidden, 1}, init_rng, float(std::sqrt(1.0 / double(cfg.hidden))));
    model.b2 = Tensor<float>::zeros({1});

    Adam<float> opt(float(cfg.lr), float(cfg.weight_decay));
    Rng order_rng(derive_seed(cfg.seed, "metacog-shuffle"));
    Rng drop_rng(derive_seed(cfg.seed, "metacog-dropout"));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, order_rng);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, n - start);
            Tensor<float> xb({len, dim}), yb({len, 1});
            for (std::size_t i = 0; i < len; ++i) {
                const std::size_t src = order[start + i];
                std::copy(x.data.begin() + long(src * dim), x.data.begin() + long((src + 1) * dim),
                          xb.data.begin() + long(i * dim));
                yb.data[i] = y.data[src];
            }
            Tape<float> tape;
            Var w1 = tape.leaf(model.w1), b1 = tape.leaf(model.b1);
            Var w2 = tape.leaf(model.w2), b2 = tape.leaf(model.b2);
            Var h = tape.relu(tape.add_rows(tape.matmul(tape.constant(xb), w1), b1));
            if (cfg.dropout_keep < 1.0) {
                Tensor<float> mask({len, cfg.hidden});
                const float scale = float(1.0 / cfg.dropout_keep);
                for (auto& v : mask.data) v = drop_rng.uniform() < cfg.dropout_keep ? scale : 0.f;
                h = tape.mul(h, tape.constant(mask));
            }
            Var logit = tape.add_rows(tape.matmul(h, w2), b2);
            Var loss = tape.logistic_bce(logit, tape.constant(yb));
            tape.backward(loss);
            std::vector<Tensor<float>> params = {model.w1, model.b1, model.w2, model.b2};
            std::vector<Tensor<float>> grads = {tape.grad(w1), tape.grad(b1), tape.grad(w2), tape.grad(b2)};
            for (std::size_t i = 0; i < grads.size(); ++i)
                if (grads[i].data.size() != params[i].data.size()) grads[i] = Tensor<float>::zeros(params[i].shape);
            opt.step(params, grads);
            model.w1 = params[0];
            model.b1 = params[1];
            model.w2 = params[2];
            model.b2 = params[3];
        }
    }
    return model;
}

std::vector<double> metacog_scores(const MetaCogModel& model, const std::vector<TraceFeatures>& features) {
    const std::size_t dim = model.input_dim();
    std::vector<double> out;
    out.reserve(features.size());
    const std::size_t H = model.w1.shape[1];
    std::vector<float> h(H);
    for (const auto& f : features) {
        if (f.vec.size() != dim) throw std::invalid_argument("metacog_scores: feature width mismatch");
        for (std::size_t j = 0; j < H; ++j) {
            float acc = model.b1.data[j];
            for (std::size_t i = 0; i < dim; ++i) acc += float(f.vec[i]) * model.w1.data[i * H + j];
            h[j] = acc > 0.f ? acc : 0.f;
        }
        float z = model.b2.data[0];
        for (std::size_t j = 0; j < H; ++j) z += h[j] * model.w2.data[j];
        out.push_back(1.0 / (1.0 + std::exp(-double(z))));
    }
    return out;
}

} // namespace cascade
