#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cascade/data.hpp"
#include "cascade/net.hpp"

namespace cascade {

inline constexpr int kCheckpointVersion = 1;

// JSON checkpoint: architecture, flat parameter arrays, per-timestep norm
// statistics, and the input normalization constants the network was trained
// with. Doubles round-trip exactly through the serializer, so reload is
// value-identical.
template <typename T>
nlohmann::ordered_json network_to_json(const Network<T>& net, const PixelStats& stats) {
    nlohmann::ordered_json j;
    j["format_version"] = kCheckpointVersion;
    const auto& s = net.spec;
    j["spec"] = {{"kind", s.kind == NetKind::Mlp ? "mlp" : "conv"},
                 {"input_dim", s.input_dim},
                 {"channels_in", s.channels_in},
                 {"height", s.height},
                 {"width", s.width},
                 {"blocks", s.blocks},
                 {"hidden", s.hidden},
                 {"classes", s.classes},
                 {"head_mode", s.head_mode == HeadMode::SingleHead ? "single" : "multi"},
                 {"horizon", s.horizon}};
    j["input_stats"] = {{"mean", stats.mean}, {"stddev", stats.stddev}};
    auto& params = j["params"] = nlohmann::ordered_json::array();
    for (const auto& p : net.params) {
        params.push_back({{"name", p.name}, {"shape", p.value.shape}, {"decay", p.decay},
                          {"data", p.value.data}});
    }
    auto& norms = j["norms"] = nlohmann::ordered_json::array();
    for (const auto& n : net.norms) {
        nlohmann::ordered_json nj;
        nj["groups"] = n.groups;
        nj["group_size"] = n.group_size;
        nj["momentum"] = n.momentum;
        nj["eps"] = n.eps;
        auto& rm = nj["run_mean"] = nlohmann::ordered_json::array();
        auto& rv = nj["run_var"] = nlohmann::ordered_json::array();
        for (const auto& t : n.run_mean) rm.push_back(t.data);
        for (const auto& t : n.run_var) rv.push_back(t.data);
        norms.push_back(std::move(nj));
    }
    return j;
}

template <typename T>
void save_checkpoint(const Network<T>& net, const PixelStats& stats, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out << network_to_json(net, stats).dump() << "\n";
}

template <typename T>
std::pair<Network<T>, PixelStats> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.at("format_version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported format version");

    NetworkSpec spec;
    const auto& js = j.at("spec");
    spec.kind = js.at("kind").get<std::string>() == "conv" ? NetKind::Conv : NetKind::Mlp;
    spec.input_dim = js.at("input_dim").get<std::size_t>();
    spec.channels_in = js.at("channels_in").get<std::size_t>();
    spec.height = js.at("height").get<std::size_t>();
    spec.width = js.at("width").get<std::size_t>();
    spec.blocks = js.at("blocks").get<std::size_t>();
    spec.hidden = js.at("hidden").get<std::size_t>();
    spec.classes = js.at("classes").get<std::size_t>();
    spec.head_mode = js.at("head_mode").get<std::string>() == "multi" ? HeadMode::MultiHead : HeadMode::SingleHead;
    spec.horizon = js.at("horizon").get<std::size_t>();

    Network<T> net = make_network<T>(spec, 0);
    const auto& params = j.at("params");
    if (params.size() != net.params.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        const auto& pj = params[i];
        if (pj.at("name").get<std::string>() != net.params[i].name)
            throw std::runtime_error("checkpoint: parameter order mismatch at " + net.params[i].name);
        net.params[i].value.data = pj.at("data").get<std::vector<T>>();
        if (net.params[i].value.data.size() != shape_numel(net.params[i].value.shape))
            throw std::runtime_error("checkpoint: bad data size for " + net.params[i].name);
    }
    const auto& norms = j.at("norms");
    if (norms.size() != net.norms.size()) throw std::runtime_error("checkpoint: norm layer count mismatch");
    for (std::size_t i = 0; i < net.norms.size(); ++i) {
        auto& n = net.norms[i];
        const auto& nj = norms[i];
        n.momentum = nj.at("momentum").get<T>();
        n.eps = nj.at("eps").get<T>();
        const auto& rm = nj.at("run_mean");
        const auto& rv = nj.at("run_var");
        if (rm.size() != n.run_mean.size()) throw std::runtime_error("checkpoint: norm slot count mismatch");
        for (std::size_t t = 0; t < rm.size(); ++t) {
            n.run_mean[t].data = rm[t].get<std::vector<T>>();
            n.run_var[t].data = rv[t].get<std::vector<T>>();
        }
    }
    PixelStats stats;
    stats.mean = j.at("input_stats").at("mean").get<std::vector<float>>();
    stats.stddev = j.at("input_stats").at("stddev").get<std::vector<float>>();
    return {std::move(net), std::move(stats)};
}

} // namespace cascade
