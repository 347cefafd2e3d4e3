#include "eegdec/config.hpp"

#include "eegdec/errors.hpp"

#include <json.hpp>

#include <fstream>

using json = nlohmann::json;

namespace eegdec {

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void check_known(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys)
            if (it.key() == k) { known = true; break; }
        if (!known)
            throw ValidationError("config: unknown field '" + it.key() + "' in " + where);
    }
}

} // namespace

std::string run_config_to_json(const RunConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    j["data"] = {{"n_channels", c.data.n_channels},   {"n_classes", c.data.n_classes},
                 {"n_timesteps", c.data.n_timesteps}, {"d_img", c.data.d_img},
                 {"d_text", c.data.d_text},           {"n_tokens", c.data.n_tokens}};
    j["encoder"] = {{"rnn_layers", c.encoder.rnn_layers},
                    {"hidden_dim", c.encoder.hidden_dim},
                    {"head_hidden_dim", c.encoder.head_hidden_dim},
                    {"leaky_slope", c.encoder.leaky_slope}};
    j["train"] = {{"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"lr", c.train.lr},
                  {"weight_decay", c.train.weight_decay},
                  {"lr_lambda", c.train.lr_lambda},
                  {"lr_decay_per_step", c.train.lr_decay_per_step}};
    j["gen"] = {{"inference_steps", c.gen.inference_steps}, {"image_scale", c.gen.image_scale}};
    j["metric"] = {{"acc_n", c.metric.acc_n},           {"acc_k", c.metric.acc_k},
                   {"acc_trials", c.metric.acc_trials}, {"is_splits", c.metric.is_splits},
                   {"ssim_window", c.metric.ssim_window}, {"ssim_sigma", c.metric.ssim_sigma},
                   {"ssim_k1", c.metric.ssim_k1},       {"ssim_k2", c.metric.ssim_k2},
                   {"ssim_l", c.metric.ssim_l}};
    return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    RunConfig c;
    try {
        check_known(j, {"schema_version", "data", "encoder", "train", "gen", "metric"}, "config root");
        maybe(j, "schema_version", c.schema_version);
        if (c.schema_version > 1)
            throw VersionError("config: schema_version " + std::to_string(c.schema_version) +
                               " is newer than supported version 1");
        if (j.contains("data")) {
            const auto& d = j.at("data");
            check_known(d, {"n_channels", "n_classes", "n_timesteps", "d_img", "d_text", "n_tokens"}, "data");
            maybe(d, "n_channels", c.data.n_channels);
            maybe(d, "n_classes", c.data.n_classes);
            maybe(d, "n_timesteps", c.data.n_timesteps);
            maybe(d, "d_img", c.data.d_img);
            maybe(d, "d_text", c.data.d_text);
            maybe(d, "n_tokens", c.data.n_tokens);
        }
        if (j.contains("encoder")) {
            const auto& e = j.at("encoder");
            check_known(e, {"rnn_layers", "hidden_dim", "head_hidden_dim", "leaky_slope"}, "encoder");
            maybe(e, "rnn_layers", c.encoder.rnn_layers);
            maybe(e, "hidden_dim", c.encoder.hidden_dim);
            maybe(e, "head_hidden_dim", c.encoder.head_hidden_dim);
            maybe(e, "leaky_slope", c.encoder.leaky_slope);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            check_known(t, {"epochs", "batch_size", "lr", "weight_decay", "lr_lambda", "lr_decay_per_step"},
                        "train");
            maybe(t, "epochs", c.train.epochs);
            maybe(t, "batch_size", c.train.batch_size);
            maybe(t, "lr", c.train.lr);
            maybe(t, "weight_decay", c.train.weight_decay);
            maybe(t, "lr_lambda", c.train.lr_lambda);
            maybe(t, "lr_decay_per_step", c.train.lr_decay_per_step);
        }
        if (j.contains("gen")) {
            const auto& g = j.at("gen");
            check_known(g, {"inference_steps", "image_scale"}, "gen");
            maybe(g, "inference_steps", c.gen.inference_steps);
            maybe(g, "image_scale", c.gen.image_scale);
        }
        if (j.contains("metric")) {
            const auto& m = j.at("metric");
            check_known(m, {"acc_n", "acc_k", "acc_trials", "is_splits", "ssim_window", "ssim_sigma",
                            "ssim_k1", "ssim_k2", "ssim_l"}, "metric");
            maybe(m, "acc_n", c.metric.acc_n);
            maybe(m, "acc_k", c.metric.acc_k);
            maybe(m, "acc_trials", c.metric.acc_trials);
            maybe(m, "is_splits", c.metric.is_splits);
            maybe(m, "ssim_window", c.metric.ssim_window);
            maybe(m, "ssim_sigma", c.metric.ssim_sigma);
            maybe(m, "ssim_k1", c.metric.ssim_k1);
            maybe(m, "ssim_k2", c.metric.ssim_k2);
            maybe(m, "ssim_l", c.metric.ssim_l);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

std::vector<std::string> validate_run_config(const RunConfig& c) {
    std::vector<std::string> v;
    auto pos = [&](long long x, const char* name) {
        if (x < 1) v.push_back(std::string(name) + " must be >= 1, got " + std::to_string(x));
    };
    pos(c.data.n_channels, "data.n_channels");
    pos(c.data.n_classes, "data.n_classes");
    pos(c.data.n_timesteps, "data.n_timesteps");
    pos(c.data.d_img, "data.d_img");
    pos(c.data.d_text, "data.d_text");
    pos(c.data.n_tokens, "data.n_tokens");
    pos(c.encoder.rnn_layers, "encoder.rnn_layers");
    pos(c.encoder.hidden_dim, "encoder.hidden_dim");
    pos(c.encoder.head_hidden_dim, "encoder.head_hidden_dim");
    pos(c.train.epochs, "train.epochs");
    pos(c.gen.inference_steps, "gen.inference_steps");
    if (c.train.batch_size < 2)
        v.push_back("train.batch_size must be >= 2 (batch-norm needs more than one sample), got " +
                    std::to_string(c.train.batch_size));
    if (!(c.train.lr > 0)) v.push_back("train.lr must be > 0");
    if (!(c.train.lr_lambda > 0 && c.train.lr_lambda <= 1))
        v.push_back("train.lr_lambda must be in (0, 1]");
    if (c.train.weight_decay < 0) v.push_back("train.weight_decay must be >= 0");
    if (c.gen.image_scale < 0) v.push_back("gen.image_scale must be >= 0");
    if (!(c.metric.acc_k >= 1 && c.metric.acc_k < c.metric.acc_n))
        v.push_back("metric requires 1 <= acc_k < acc_n");
    if (c.metric.acc_trials < 1) v.push_back("metric.acc_trials must be >= 1");
    if (c.metric.is_splits < 1) v.push_back("metric.is_splits must be >= 1");
    if (c.metric.ssim_window % 2 == 0 || c.metric.ssim_window < 1)
        v.push_back("metric.ssim_window must be odd and >= 1");
    if (!(c.metric.ssim_sigma > 0)) v.push_back("metric.ssim_sigma must be > 0");
    return v;
}

} // namespace eegdec
