#pragma once

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cascade/augment.hpp"
#include "cascade/config.hpp"
#include "cascade/data.hpp"
#include "cascade/episodes.hpp"
#include "cascade/kernels.hpp"
#include "cascade/net.hpp"
#include "cascade/noise.hpp"
#include "cascade/optim.hpp"
#include "cascade/td.hpp"

namespace cascade {

struct TrainConfig {
    DatasetSpec data;

    // architecture
    std::string net_kind = "mlp"; // mlp | conv
    std::size_t blocks = 3;
    std::size_t width = 32;
    std::string head = "single"; // single | multi

    // rollout
    std::string mode = "cascaded"; // cascaded | serial
    std::string kernel = "osd";    // identity | osd | ews
    double alpha = 0.9;
    std::size_t T = 8;

    // loss
    std::string loss = "td"; // td | ce (final step only)
    double lambda = 0.0;

    // optimization
    std::size_t epochs = 15;
    std::size_t batch_size = 64;
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.005;
    double lr_decay_factor = 0.2;
    std::size_t lr_decay_interval = 30;

    // augmentation
    AugmentFlags augment;
    std::string noise_augment = "none"; // none | a noise kind, applied pre-normalization
    double noise_augment_prob = 0.5;
    NoiseSpec noise_spec;

    std::uint64_t seed = 1;

    static TrainConfig from_config(const Config& cfg);
    void validate() const {
        if (mode != "cascaded" && mode != "serial") throw std::invalid_argument("mode must be cascaded|serial");
        if (loss != "td" && loss != "ce") throw std::invalid_argument("loss must be td|ce");
        if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("lambda must be in [0,1]");
        if (mode == "serial" && T < blocks + 1)
            throw std::invalid_argument("serial mode needs T >= blocks+1");
        if (epochs == 0 || batch_size == 0 || T == 0) throw std::invalid_argument("epochs/batch_size/T must be positive");
    }
};

struct MetricsRow {
    std::size_t epoch;
    std::size_t t;
    std::string split; // train | val
    double accuracy;
    double loss;
};

struct TrainResult {
    Network<float> net;
    PixelStats stats;
    Dataset dataset;
    std::vector<std::size_t> train_idx, val_idx;
    std::vector<MetricsRow> metrics;
};

inline TrainConfig TrainConfig::from_config(const Config& cfg) {
    TrainConfig tc;
    tc.data.source = cfg.get_str("dataset", tc.data.source);
    tc.data.path = cfg.get_str("data_path", tc.data.path);
    tc.data.classes = cfg.get_size("classes", tc.data.classes);
    tc.data.train_fraction = cfg.get_double("split", tc.data.train_fraction);
    tc.data.synthetic_count = cfg.get_size("synthetic_count", tc.data.synthetic_count);
    tc.data.image_size = cfg.get_size("image_size", tc.data.image_size);
    tc.data.coarse_group = cfg.get_size("coarse_group", tc.data.coarse_group);
    tc.data.jitter = cfg.get_double("jitter", tc.data.jitter);
    tc.data.pixel_noise = cfg.get_double("pixel_noise", tc.data.pixel_noise);
    tc.data.seed = cfg.get_u64("data_seed", tc.data.seed);

    tc.net_kind = cfg.get_str("net", tc.net_kind);
    tc.blocks = cfg.get_size("blocks", tc.blocks);
    tc.width = cfg.get_size("width", tc.width);
    tc.head = cfg.get_str("head", tc.head);

    tc.mode = cfg.get_str("mode", tc.mode);
    tc.kernel = cfg.get_str("kernel", tc.kernel);
    tc.alpha = cfg.get_double("alpha", tc.alpha);
    tc.T = cfg.get_size("T", tc.T);

    tc.loss = cfg.get_str("loss", tc.loss);
    tc.lambda = cfg.get_double("lambda", tc.lambda);

    tc.epochs = cfg.get_size("epochs", tc.epochs);
    tc.batch_size = cfg.get_size("batch_size", tc.batch_size);
    tc.lr = cfg.get_double("lr", tc.lr);
    tc.momentum = cfg.get_double("momentum", tc.momentum);
    tc.weight_decay = cfg.get_double("weight_decay", tc.weight_decay);
    tc.lr_decay_factor = cfg.get_double("lr_decay_factor", tc.lr_decay_factor);
    tc.lr_decay_interval = cfg.get_size("lr_decay_interval", tc.lr_decay_interval);

    tc.augment.pad_crop = cfg.get_bool("augment_pad_crop", tc.augment.pad_crop);
    tc.augment.flip = cfg.get_bool("augment_flip", tc.augment.flip);
    tc.augment.normalize = cfg.get_bool("augment_normalize", tc.augment.normalize);
    tc.augment.cutout = cfg.get_bool("augment_cutout", tc.augment.cutout);
    tc.noise_augment = cfg.get_str("noise_augment", tc.noise_augment);
    tc.noise_augment_prob = cfg.get_double("noise_augment_prob", tc.noise_augment_prob);
    if (tc.noise_augment != "none") tc.noise_spec.kind = noise_kind_from_name(tc.noise_augment);
    tc.noise_spec.patch = cfg.get_size("noise_patch", tc.data.image_size / 2);
    tc.noise_spec.blur_sigma = cfg.get_double("noise_blur_sigma", tc.noise_spec.blur_sigma);
    tc.noise_spec.coverage = cfg.get_double("noise_coverage", tc.noise_spec.coverage);
    tc.noise_spec.down_factor = cfg.get_size("noise_down_factor", tc.noise_spec.down_factor);
    tc.noise_spec.shift = int(cfg.get_size("noise_shift", std::size_t(tc.noise_spec.shift)));
    tc.noise_spec.angle_deg = cfg.get_double("noise_angle", tc.noise_spec.angle_deg);

    tc.seed = cfg.get_u64("seed", tc.seed);
    return tc;
}

// Batch assembly with the training-time augmentation pipeline: geometric
// augmentation on raw pixels, optional noise-transform augmentation, standard
// normalization, then cutout.
inline Tensor<float> augmented_batch(const Dataset& ds, const std::vector<std::size_t>& idx,
                                     const TrainConfig& cfg, const PixelStats& stats, Rng& rng) {
    Tensor<float> out({idx.size(), ds.input_dim()});
    for (std::size_t n = 0; n < idx.size(); ++n) {
        Image img = ds.images[idx[n]];
        if (cfg.augment.pad_crop || cfg.augment.flip) {
            AugmentFlags geo;
            geo.pad_crop = cfg.augment.pad_crop;
            geo.flip = cfg.augment.flip;
            geo.normalize = false;
            img = augment(img, geo, stats, rng);
        }
        if (cfg.noise_augment != "none" && rng.uniform() < cfg.noise_augment_prob)
            img = apply_noise(img, cfg.noise_spec, rng);
        if (cfg.augment.normalize) img = normalize_only(img, stats);
        if (cfg.augment.cutout) {
            AugmentFlags cut;
            cut.normalize = false;
            cut.cutout = true;
            cut.cutout_size = cfg.augment.cutout_size;
            img = augment(img, cut, stats, rng);
        }
        for (std::size_t j = 0; j < img.pix.size(); ++j) out.data[n * img.pix.size() + j] = img.pix[j];
    }
    return out;
}

inline Tensor<float> one_hot_batch(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Tensor<float> y({idx.size(), ds.classes});
    for (std::size_t n = 0; n < idx.size(); ++n) y.data[n * ds.classes + ds.labels[idx[n]]] = 1.f;
    return y;
}

// Eval-mode rollout of a set of instances, chunked; returns per-step accuracy
// and per-step mean negative log-likelihood of the true class.
inline std::pair<std::vector<double>, std::vector<double>>
evaluate_split(Network<float>& net, const Dataset& ds, const std::vector<std::size_t>& idx,
               const PixelStats& stats, const TemporalKernel& kernel, std::size_t T,
               const std::string& mode) {
    std::vector<double> acc(T, 0.0), nll(T, 0.0);
    const std::size_t chunk = 128;
    for (std::size_t start = 0; start < idx.size(); start += chunk) {
        std::vector<std::size_t> part(idx.begin() + start,
                                      idx.begin() + std::min(start + chunk, idx.size()));
        Tensor<float> x = image_batch<float>(ds, part, stats);
        RolloutTrace<float> trace = mode == "serial" ? run_serial(net, x, T)
                                                     : run_cascaded_static(net, x, T, kernel);
        for (std::size_t t = 0; t < T; ++t) {
            const auto& p = trace.probs[t];
            for (std::size_t n = 0; n < part.size(); ++n) {
                const std::size_t label = ds.labels[part[n]];
                std::size_t arg = 0;
                for (std::size_t c = 1; c < ds.classes; ++c)
                    if (p.at(n, c) > p.at(n, arg)) arg = c;
                acc[t] += arg == label ? 1.0 : 0.0;
                nll[t] += -std::log(std::max(double(p.at(n, label)), 1e-12));
            }
        }
    }
    for (std::size_t t = 0; t < T; ++t) {
        acc[t] /= double(idx.size());
        nll[t] /= double(idx.size());
    }
    return {acc, nll};
}

// Full training run: seeded end to end, aborts on non-finite loss, returns
// the trained network plus the per-epoch metrics table.
inline TrainResult train(const TrainConfig& cfg) {
    cfg.validate();
    TrainResult res;
    res.dataset = load_dataset(cfg.data, cfg.seed);
    auto [train_idx, val_idx] = split_class_balanced(res.dataset, cfg.data.train_fraction, cfg.seed);
    res.train_idx = train_idx;
    res.val_idx = val_idx;
    res.stats = pixel_stats(res.dataset, train_idx);

    NetworkSpec spec;
    spec.kind = cfg.net_kind == "conv" ? NetKind::Conv : NetKind::Mlp;
    spec.input_dim = res.dataset.input_dim();
    spec.channels_in = res.dataset.channels;
    spec.height = res.dataset.height;
    spec.width = res.dataset.width;
    spec.blocks = cfg.blocks;
    spec.hidden = cfg.width;
    spec.classes = res.dataset.classes;
    spec.head_mode = cfg.head == "multi" ? HeadMode::MultiHead : HeadMode::SingleHead;
    spec.horizon = cfg.T;
    res.net = make_network<float>(spec, cfg.seed);

    const TemporalKernel kernel = kernel_from_name(cfg.kernel, cfg.alpha);
    SgdNesterov<float> opt(float(cfg.momentum), float(cfg.weight_decay));
    const TDConfig td_cfg{cfg.lambda, cfg.T};

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const float lr = float(lr_schedule(epoch, cfg.lr, cfg.lr_decay_factor, cfg.lr_decay_interval));
        std::vector<std::size_t> order = train_idx;
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", epoch));
        shuffle(order, shuffle_rng);
        Rng aug_rng(derive_seed(cfg.seed, "augment", epoch));

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::vector<std::size_t> batch(order.begin() + start,
                                           order.begin() + std::min(start + cfg.batch_size, order.size()));
            Tensor<float> x = augmented_batch(res.dataset, batch, cfg, res.stats, aug_rng);
            Tensor<float> y = one_hot_batch(res.dataset, batch);

            Tape<float> tape;
            Runtime<float> rt(tape, res.net, true);
            Rollout<float> roll = cfg.mode == "serial"
                                      ? rollout_serial_anytime(rt, res.net, x, cfg.T)
                                      : rollout_cascaded(rt, res.net, std::vector<Tensor<float>>(cfg.T, x),
                                                         cfg.T, kernel);
            Var loss_var = cfg.loss == "ce" ? ce_loss(tape, roll.logit_vars, y)
                                            : td_loss(tape, roll.logit_vars,
                                                      td_targets(roll.trace, y, td_cfg));
            const float loss_value = tape.value(loss_var).data[0];
            if (!std::isfinite(loss_value))
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch offset " + std::to_string(start));
            tape.backward(loss_var);
            opt.step(res.net, rt.param_grads(), lr);
        }

        for (const char* split : {"train", "val"}) {
            const auto& idx = split == std::string("train") ? train_idx : val_idx;
            if (idx.empty()) continue;
            auto [acc, nll] = evaluate_split(res.net, res.dataset, idx, res.stats, kernel, cfg.T, cfg.mode);
            for (std::size_t t = 0; t < cfg.T; ++t)
                res.metrics.push_back({epoch, t + 1, split, acc[t], nll[t]});
        }
    }
    return res;
}

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("metrics: cannot write " + path);
    out << "epoch,t,split,accuracy,loss\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%s,%.9g,%.9g\n", r.epoch, r.t, r.split.c_str(), r.accuracy,
                      r.loss);
        out << buf;
    }
}

} // namespace cascade
