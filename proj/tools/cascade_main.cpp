// Command-line entry point: train | eval | noise | metacog | rollout.
// All parameters come from a flat key-value config file; --set overrides
// individual keys and --seed/--out override the run seed and output
// directory. Every command writes its files and then a manifest listing them.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cascade/checkpoint.hpp"
#include "cascade/config.hpp"
#include "cascade/episodes.hpp"
#include "cascade/harness.hpp"
#include "cascade/metacog.hpp"
#include "cascade/metrics.hpp"
#include "cascade/trainer.hpp"

namespace fs = std::filesystem;
using namespace cascade;

namespace {

constexpr const char* kVersion = "cascade 0.1.0";

struct CliArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

Config load_config(const CliArgs& args) {
    Config cfg = args.config_path.empty() ? Config{} : Config::from_file(args.config_path);
    for (const auto& kv : args.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::runtime_error("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.seed_given) cfg.set("seed", std::to_string(args.seed));
    return cfg;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

class OutputSet {
public:
    OutputSet(std::string dir, std::string command, const Config& cfg)
        : dir_(std::move(dir)), command_(std::move(command)), cfg_(cfg) {
        fs::create_directories(dir_);
    }

    std::string path(const std::string& name) const { return dir_ + "/" + name; }

    std::ofstream open(const std::string& name) {
        std::ofstream out(path(name));
        if (!out) throw std::runtime_error("cannot write " + path(name));
        produced_.push_back(name);
        return out;
    }

    void note(const std::string& name) { produced_.push_back(name); }

    // The manifest is written last: its presence marks a complete run.
    void finish(std::uint64_t seed) {
        RunManifest m;
        m.command = command_;
        m.config = cfg_.entries();
        m.seed = seed;
        m.version = kVersion;
        m.outputs = produced_;
        write_manifest(m, dir_);
    }

private:
    std::string dir_, command_;
    Config cfg_;
    std::vector<std::string> produced_;
};

struct LoadedModel {
    Network<float> net;
    PixelStats stats;
};

LoadedModel load_model(const Config& cfg) {
    const std::string ckpt = cfg.get_str("checkpoint", "");
    if (ckpt.empty()) throw std::runtime_error("config key 'checkpoint' is required for this command");
    auto [net, stats] = load_checkpoint<float>(ckpt);
    return {std::move(net), std::move(stats)};
}

// Eval-mode traces for a set of instances, chunked to bound tape memory.
std::vector<InstanceTrace> collect_traces(Network<float>& net, const Dataset& ds,
                                          const std::vector<std::size_t>& idx, const PixelStats& stats,
                                          const TemporalKernel& kernel, std::size_t T,
                                          const std::string& mode,
                                          std::vector<std::vector<double>>* embeddings = nullptr) {
    std::vector<InstanceTrace> out;
    out.reserve(idx.size());
    const std::size_t chunk = 64;
    for (std::size_t start = 0; start < idx.size(); start += chunk) {
        std::vector<std::size_t> part(idx.begin() + start, idx.begin() + std::min(start + chunk, idx.size()));
        Tensor<float> x = image_batch<float>(ds, part, stats);
        RolloutTrace<float> trace =
            mode == "serial" ? run_serial(net, x, T) : run_cascaded_static(net, x, T, kernel);
        auto part_traces = instance_traces(trace);
        for (auto& tr : part_traces) out.push_back(std::move(tr));
        if (embeddings) {
            const std::size_t F = trace.final_embedding.shape[1];
            for (std::size_t n = 0; n < part.size(); ++n) {
                std::vector<double> e(F);
                for (std::size_t j = 0; j < F; ++j) e[j] = double(trace.final_embedding.at(n, j));
                embeddings->push_back(std::move(e));
            }
        }
    }
    return out;
}

std::vector<std::size_t> eval_indices(const Config& cfg, const Dataset& ds, std::uint64_t seed) {
    const std::string split = cfg.get_str("eval_split", "val");
    if (split == "all") {
        std::vector<std::size_t> idx(ds.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        return idx;
    }
    auto [train, val] = split_class_balanced(ds, cfg.get_double("split", 0.9), seed);
    if (split == "train") return train;
    if (split == "val") return val;
    throw std::runtime_error("eval_split must be train|val|all");
}

int cmd_train(const CliArgs& args) {
    Config cfg = load_config(args);
    TrainConfig tc = TrainConfig::from_config(cfg);
    OutputSet outs(args.out_dir, "train", cfg);

    TrainResult res = train(tc);
    save_checkpoint(res.net, res.stats, outs.path("checkpoint.json"));
    outs.note("checkpoint.json");
    write_metrics_csv(res.metrics, outs.path("metrics.csv"));
    outs.note("metrics.csv");
    outs.finish(tc.seed);

    double final_val = 0;
    for (const auto& r : res.metrics)
        if (r.split == "val" && r.epoch + 1 == tc.epochs && r.t == tc.T) final_val = r.accuracy;
    std::printf("trained %zu epochs; final-step val accuracy %.4f\n", tc.epochs, final_val);
    return 0;
}

int cmd_eval(const CliArgs& args) {
    Config cfg = load_config(args);
    const std::uint64_t seed = cfg.get_u64("seed", 1);
    LoadedModel model = load_model(cfg);
    OutputSet outs(args.out_dir, "eval", cfg);

    TrainConfig tc = TrainConfig::from_config(cfg);
    Dataset ds = load_dataset(tc.data, seed);
    auto idx = eval_indices(cfg, ds, seed);
    const TemporalKernel kernel = kernel_from_name(tc.kernel, tc.alpha);
    const std::size_t T = cfg.get_size("T", model.net.spec.horizon);

    std::vector<std::vector<double>> embeddings;
    auto traces = collect_traces(model.net, ds, idx, model.stats, kernel, T, tc.mode, &embeddings);
    std::vector<std::size_t> labels;
    for (auto i : idx) labels.push_back(ds.labels[i]);

    // speed-accuracy sweep
    const std::size_t points = cfg.get_size("theta_points", 50);
    std::vector<double> grid;
    for (std::size_t k = 0; k < points; ++k) grid.push_back(double(k) / double(points - 1));
    auto curve = speed_accuracy_curve(traces, labels, grid);
    {
        auto f = outs.open("speed_accuracy.csv");
        f << "theta,mean_stop_cycles,mean_accuracy\n";
        for (const auto& pt : curve)
            f << fmt(pt.theta) << "," << fmt(pt.mean_stop_cycles) << "," << fmt(pt.mean_accuracy) << "\n";
    }

    // selection latency at the configured threshold; -1 marks never-reached
    const double latency_theta = cfg.get_double("latency_theta", 0.83);
    std::vector<double> latencies, centralities;
    {
        auto f = outs.open("latency.csv");
        f << "instance_id,latency,correct\n";
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const auto lat = selection_latency(traces[i], latency_theta);
            const auto& last = traces[i].probs.back();
            const int correct = argmax_class(last) == labels[i] ? 1 : 0;
            f << idx[i] << "," << (lat ? long(*lat) : -1) << "," << correct << "\n";
            if (lat) latencies.push_back(double(*lat));
        }
    }

    // centrality of the final embedding against the true-class head row
    {
        const auto& head = model.net.heads.back();
        const auto& W = model.net.params[std::size_t(head.w)].value; // [F,C]
        const std::size_t F = W.shape[0], C = W.shape[1];
        auto f = outs.open("centrality.csv");
        f << "instance_id,centrality\n";
        for (std::size_t i = 0; i < traces.size(); ++i) {
            std::vector<double> row(F);
            for (std::size_t j = 0; j < F; ++j) row[j] = double(W.data[j * C + labels[i]]);
            const double c = centrality(embeddings[i], row);
            centralities.push_back(c);
            f << idx[i] << "," << fmt(c) << "\n";
        }
    }

    // rank correlation between centrality and negative latency, over reached instances
    {
        std::vector<double> cs, neglat;
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const auto lat = selection_latency(traces[i], latency_theta);
            if (!lat) continue;
            cs.push_back(centralities[i]);
            neglat.push_back(-double(*lat));
        }
        nlohmann::ordered_json j;
        j["latency_theta"] = latency_theta;
        j["reached_fraction"] = traces.empty() ? 0.0 : double(cs.size()) / double(traces.size());
        if (cs.size() >= 2) {
            try {
                j["spearman_centrality_vs_neg_latency"] = spearman_rho(cs, neglat);
            } catch (const std::invalid_argument&) {
                j["spearman_centrality_vs_neg_latency"] = nullptr; // constant ranks
            }
        } else {
            j["spearman_centrality_vs_neg_latency"] = nullptr;
        }
        auto f = outs.open("correlations.json");
        f << j.dump(2) << "\n";
    }

    // coarse-grain compliance per step, when the dataset carries a taxonomy
    {
        auto f = outs.open("compliance.csv");
        f << "t,compliance,errors\n";
        if (!ds.coarse_map.empty()) {
            for (std::size_t t = 1; t <= T; ++t) {
                std::size_t errors = 0;
                for (std::size_t i = 0; i < traces.size(); ++i)
                    if (argmax_class(traces[i].probs[t - 1]) != labels[i]) ++errors;
                const auto c = taxonomic_compliance(traces, labels, ds.coarse_map, t);
                f << t << "," << (c ? fmt(*c) : "") << "," << errors << "\n";
            }
        }
    }

    outs.finish(seed);
    std::printf("evaluated %zu instances over T=%zu\n", traces.size(), T);
    return 0;
}

int cmd_noise(const CliArgs& args) {
    Config cfg = load_config(args);
    const std::uint64_t seed = cfg.get_u64("seed", 1);
    LoadedModel model = load_model(cfg);
    OutputSet outs(args.out_dir, "noise", cfg);

    TrainConfig tc = TrainConfig::from_config(cfg);
    Dataset ds = load_dataset(tc.data, seed);
    auto idx = eval_indices(cfg, ds, seed);
    const std::size_t limit = cfg.get_size("noise_instances", idx.size());
    if (idx.size() > limit) idx.resize(limit);

    const TemporalKernel kernel = kernel_from_name(tc.kernel, tc.alpha);
    const std::size_t trials = cfg.get_size("noise_trials", 5);
    const std::size_t horizon = cfg.get_size("noise_horizon", 20);
    const std::size_t clean_steps = cfg.get_size("clean_steps", 10);
    const bool sequential = cfg.get_bool("sequential", false);

    std::vector<std::string> kinds;
    {
        std::string raw = cfg.get_str("noise_kinds", "focus,perlin,occlusion,resolution,translation,rotation");
        std::size_t pos = 0;
        while (pos != std::string::npos) {
            const auto comma = raw.find(',', pos);
            kinds.push_back(raw.substr(pos, comma == std::string::npos ? comma : comma - pos));
            pos = comma == std::string::npos ? comma : comma + 1;
        }
    }
    std::vector<std::size_t> durations;
    for (std::size_t n = cfg.get_size("transient_min_duration", 1);
         n <= cfg.get_size("transient_max_duration", 6); ++n)
        durations.push_back(n);

    auto spec_for = [&](const std::string& kind) {
        NoiseSpec sp = tc.noise_spec;
        sp.kind = noise_kind_from_name(kind);
        return sp;
    };

    auto fpersist = outs.open("persistent.csv");
    fpersist << (sequential ? "noise,accuracy,seq_accuracy\n" : "noise,accuracy\n");
    auto ftrans = outs.open("transient.csv");
    ftrans << (sequential ? "noise,duration,mean_dip,seq_mean_dip\n" : "noise,duration,mean_dip\n");

    for (const auto& kind : kinds) {
        const NoiseSpec sp = spec_for(kind);
        const double acc = persistent_noise_accuracy(model.net, ds, idx, model.stats, sp, kernel,
                                                     horizon, trials, derive_seed(seed, "persistent"));
        if (sequential) {
            // full pass per independent noise sample
            std::vector<double> hits(idx.size());
            parallel_for(idx.size(), [&](std::size_t i) {
                double h = 0;
                for (std::size_t trial = 0; trial < trials; ++trial) {
                    Rng rng(derive_seed(seed, "persistent-seq", idx[i] * 1000 + trial));
                    Image noisy = normalize_only(apply_noise(ds.images[idx[i]], sp, rng), model.stats);
                    auto probs = softmax_rows(forward_standard(model.net, single_input<float>(noisy)));
                    std::size_t arg = 0;
                    for (std::size_t c = 1; c < model.net.spec.classes; ++c)
                        if (probs.data[c] > probs.data[arg]) arg = c;
                    h += arg == ds.labels[idx[i]] ? 1.0 : 0.0;
                }
                hits[i] = h / double(trials);
            });
            double seq_acc = 0;
            for (double h : hits) seq_acc += h;
            seq_acc /= double(hits.size());
            fpersist << kind << "," << fmt(acc) << "," << fmt(seq_acc) << "\n";
        } else {
            fpersist << kind << "," << fmt(acc) << "\n";
        }

        for (std::size_t dur : durations) {
            std::vector<double> dips(idx.size(), 0.0), seq_dips(idx.size(), 0.0);
            parallel_for(idx.size(), [&](std::size_t i) {
                double d = 0, sd = 0;
                for (std::size_t trial = 0; trial < trials; ++trial) {
                    Rng rng(derive_seed(seed, "transient", (idx[i] * 997 + trial) * 31 + dur));
                    d += transient_noise_dip(model.net, ds.images[idx[i]], ds.labels[idx[i]], model.stats,
                                             sp, kernel, dur, rng, clean_steps);
                    if (sequential) {
                        Rng rng2(derive_seed(seed, "transient-seq", (idx[i] * 997 + trial) * 31 + dur));
                        auto conf = sequential_confidences(model.net, ds.images[idx[i]], ds.labels[idx[i]],
                                                           model.stats, sp, dur, rng2, clean_steps);
                        sd += drop_in_integrated_performance(conf, clean_steps);
                    }
                }
                dips[i] = d / double(trials);
                seq_dips[i] = sd / double(trials);
            });
            double mean_dip = 0, mean_seq = 0;
            for (std::size_t i = 0; i < idx.size(); ++i) {
                mean_dip += dips[i];
                mean_seq += seq_dips[i];
            }
            mean_dip /= double(idx.size());
            mean_seq /= double(idx.size());
            if (sequential)
                ftrans << kind << "," << dur << "," << fmt(mean_dip) << "," << fmt(mean_seq) << "\n";
            else
                ftrans << kind << "," << dur << "," << fmt(mean_dip) << "\n";
        }
    }
    fpersist.close();
    ftrans.close();
    outs.finish(seed);
    std::printf("noise tables over %zu instances, %zu trials\n", idx.size(), trials);
    return 0;
}

int cmd_metacog(const CliArgs& args) {
    Config cfg = load_config(args);
    const std::uint64_t seed = cfg.get_u64("seed", 1);
    LoadedModel model = load_model(cfg);
    OutputSet outs(args.out_dir, "metacog", cfg);

    TrainConfig tc = TrainConfig::from_config(cfg);
    Dataset in_ds = load_dataset(tc.data, seed);

    // out-of-distribution family: the same generator with a shifted structure
    // seed and optionally shifted corruption knobs
    DatasetSpec ood_spec = tc.data;
    ood_spec.seed = cfg.get_u64("ood_seed", tc.data.seed + 1000);
    ood_spec.jitter = cfg.get_double("ood_jitter", tc.data.jitter);
    ood_spec.pixel_noise = cfg.get_double("ood_pixel_noise", tc.data.pixel_noise);
    Dataset ood_ds = load_dataset(ood_spec, seed + 1);

    auto in_idx = eval_indices(cfg, in_ds, seed);
    std::vector<std::size_t> ood_idx(std::min(ood_ds.size(), in_idx.size() * 2));
    for (std::size_t i = 0; i < ood_idx.size(); ++i) ood_idx[i] = i;
    if (ood_idx.size() > in_idx.size()) ood_idx.resize(in_idx.size());

    // trace features come from the smoothing kernel for fine-grained timing
    const TemporalKernel kernel =
        kernel_from_name(cfg.get_str("metacog_kernel", "ews"), cfg.get_double("metacog_alpha", 0.9));
    const std::size_t T = cfg.get_size("metacog_T", 24);

    auto in_traces = collect_traces(model.net, in_ds, in_idx, model.stats, kernel, T, "cascaded");
    auto ood_traces = collect_traces(model.net, ood_ds, ood_idx, model.stats, kernel, T, "cascaded");

    MetaCogConfig mc;
    mc.epochs = cfg.get_size("metacog_epochs", 300);
    mc.batch_size = cfg.get_size("metacog_batch_size", 256);
    mc.lr = cfg.get_double("metacog_lr", 0.001);
    mc.weight_decay = cfg.get_double("metacog_weight_decay", 0.0005);
    mc.dropout_keep = cfg.get_double("metacog_dropout_keep", 0.5);
    mc.seed = derive_seed(seed, "metacog");

    nlohmann::ordered_json report;
    for (FeatureKind kind : {FeatureKind::MSP, FeatureKind::Entropy, FeatureKind::Softmax, FeatureKind::Logits}) {
        for (FeatureScope scope : {FeatureScope::FinalStep, FeatureScope::AllSteps}) {
            const std::string tag =
                std::string(feature_kind_name(kind)) + "_" + feature_scope_name(scope);
            std::vector<TraceFeatures> fin, food;
            for (const auto& tr : in_traces) fin.push_back(build_trace_features(tr, kind, scope));
            for (const auto& tr : ood_traces) food.push_back(build_trace_features(tr, kind, scope));

            // persist the feature matrices
            for (const auto* pair : {&fin, &food}) {
                const bool is_in = pair == &fin;
                auto f = outs.open("features_" + tag + (is_in ? "_in" : "_ood") + ".csv");
                f << "# kind=" << feature_kind_name(kind) << " scope=" << feature_scope_name(scope)
                  << "\n";
                for (const auto& row : *pair) {
                    for (std::size_t j = 0; j < row.vec.size(); ++j)
                        f << (j ? "," : "") << fmt(row.vec[j]);
                    f << "\n";
                }
            }

            // split each side in half: first half trains, second half scores
            const std::size_t hi = fin.size() / 2, ho = food.size() / 2;
            std::vector<TraceFeatures> train_in(fin.begin(), fin.begin() + hi);
            std::vector<TraceFeatures> train_ood(food.begin(), food.begin() + ho);
            MetaCogModel m = train_metacog(train_in, train_ood, mc);

            std::vector<double> scores;
            std::vector<int> labels;
            for (std::size_t i = hi; i < fin.size(); ++i) {
                scores.push_back(metacog_scores(m, {fin[i]})[0]);
                labels.push_back(1);
            }
            for (std::size_t i = ho; i < food.size(); ++i) {
                scores.push_back(metacog_scores(m, {food[i]})[0]);
                labels.push_back(0);
            }
            report[tag] = {{"auroc", auroc(scores, labels)},
                           {"fpr_at_95tpr", fpr_at_tpr(scores, labels, 0.95)}};
        }
    }
    {
        auto f = outs.open("metacog_metrics.json");
        f << report.dump(2) << "\n";
    }
    outs.finish(seed);
    std::printf("metacog metrics over %zu in / %zu ood instances\n", in_idx.size(), ood_idx.size());
    return 0;
}

int cmd_rollout(const CliArgs& args) {
    Config cfg = load_config(args);
    const std::uint64_t seed = cfg.get_u64("seed", 1);
    LoadedModel model = load_model(cfg);
    OutputSet outs(args.out_dir, "rollout", cfg);

    TrainConfig tc = TrainConfig::from_config(cfg);
    Dataset ds = load_dataset(tc.data, seed);
    auto idx = eval_indices(cfg, ds, seed);
    const std::size_t limit = cfg.get_size("rollout_instances", 16);
    if (idx.size() > limit) idx.resize(limit);

    const TemporalKernel kernel = kernel_from_name(tc.kernel, tc.alpha);
    const std::size_t T = cfg.get_size("T", model.net.spec.horizon);
    auto traces = collect_traces(model.net, ds, idx, model.stats, kernel, T, tc.mode);

    auto f = outs.open("trace.csv");
    f << "instance_id,t,label";
    for (std::size_t c = 0; c < model.net.spec.classes; ++c) f << ",p" << c;
    f << "\n";
    for (std::size_t i = 0; i < traces.size(); ++i)
        for (std::size_t t = 0; t < traces[i].steps(); ++t) {
            f << idx[i] << "," << t + 1 << "," << ds.labels[idx[i]];
            for (double p : traces[i].probs[t]) f << "," << fmt(p);
            f << "\n";
        }
    f.close();
    outs.finish(seed);
    std::printf("wrote %zu traces of length %zu\n", traces.size(), T);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cascaded feedforward network trainer and evaluation harness"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CliArgs args;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "flat key=value config file");
        sub->add_option("--out", args.out_dir, "output directory");
        sub->add_option("--set", args.sets, "override a config key (key=value), repeatable");
        sub->add_option("--seed", args.seed, "override the run seed")->each([&](const std::string&) {
            args.seed_given = true;
        });
    };

    auto* train_cmd = app.add_subcommand("train", "train a network and write checkpoint + metrics");
    auto* eval_cmd = app.add_subcommand("eval", "speed-accuracy, latency and compliance analyses");
    auto* noise_cmd = app.add_subcommand("noise", "persistent/transient noise tables");
    auto* metacog_cmd = app.add_subcommand("metacog", "trace-based OOD detection metrics");
    auto* rollout_cmd = app.add_subcommand("rollout", "dump per-step output traces");
    for (auto* sub : {train_cmd, eval_cmd, noise_cmd, metacog_cmd, rollout_cmd}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(args);
        if (eval_cmd->parsed()) return cmd_eval(args);
        if (noise_cmd->parsed()) return cmd_noise(args);
        if (metacog_cmd->parsed()) return cmd_metacog(args);
        if (rollout_cmd->parsed()) return cmd_rollout(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
