#pragma once

// Run configuration: one flat JSON file with nested sections for the CSI
// front end, the simulator, and the three per-module training setups.
// Loading is strict (unknown keys rejected with their path), validation is
// eager with field-level messages, and serialize(load(x)) round-trips.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csiguard/common.hpp"
#include "csiguard/csi.hpp"
#include "csiguard/mv.hpp"
#include "csiguard/sync.hpp"
#include "csiguard/synthgen.hpp"
#include "csiguard/training.hpp"

namespace csiguard::config {

struct HampelConfig {
    int window = 5;
    double n_sigmas = 3.0;
};

struct CsiConfig {
    int k = 30;
    int n_tx = 3;
    int n_rx = 3;
    double rate_hz = 0.0;  // 0 resolves to m * fps

    csi::CsiDims dims() const { return csi::CsiDims{k, n_tx, n_rx}; }
};

struct SimConfig {
    int frames_per_scene = 400;
    std::vector<int> persons = {0, 1, 2};
    double baseline = 1.0;
    double bump_gain = 2.0;
    double bump_sigma = 3.0;
    double noise_sigma = 0.05;
    double outlier_rate = 0.002;
    double outlier_mag = 10.0;
};

struct RunConfig {
    int m = 5;
    int g = 7;
    float lambda = 1.0f;
    float tau = 0.5f;
    float eta = 0.0f;
    int gop_length = 4;
    int block_size = 16;
    int height = 96;
    int width = 128;
    HampelConfig hampel;
    float min_area_frac = 0.001f;
    float lambda_b = 1.0f;
    double forgery_frac = 0.5;
    int min_offset = 0;  // 0 resolves to g
    std::uint64_t seed = 1;
    double fps = 7.5;
    double train_frac = 0.9;
    std::string frame_split = "random";
    std::string clip_split = "contiguous";
    float gate_threshold = 0.5f;
    float verdict_threshold = 0.5f;
    CsiConfig csi;
    SimConfig sim;
    training::TrainConfig train_detector = training::TrainConfig::detector_defaults();
    training::TrainConfig train_segmentor = training::TrainConfig::segmentor_defaults();
    training::TrainConfig train_forgery = training::TrainConfig::forgery_defaults();

    mv::MaskParams mask_params() const {
        return mv::MaskParams{lambda, tau, min_area_frac};
    }
    sync::SplitMode frame_split_mode() const {
        return frame_split == "contiguous" ? sync::SplitMode::contiguous_blocks
                                           : sync::SplitMode::random_frames;
    }
    sync::SplitMode clip_split_mode() const {
        return clip_split == "contiguous" ? sync::SplitMode::contiguous_blocks
                                          : sync::SplitMode::random_frames;
    }
    synthgen::CsiModel csi_model() const {
        synthgen::CsiModel model;
        model.dims = csi.dims();
        model.baseline = sim.baseline;
        model.bump_gain = sim.bump_gain;
        model.bump_sigma = sim.bump_sigma;
        model.noise_sigma = sim.noise_sigma;
        model.outlier_rate = sim.outlier_rate;
        model.outlier_mag = sim.outlier_mag;
        return model;
    }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where,
                       const std::set<std::string>& allowed) {
    if (!j.is_object())
        throw ConfigError(where + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
}

template <class T>
void read_field(const nlohmann::json& j, const std::string& where, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

inline void read_optimizer(const nlohmann::json& j, const std::string& where,
                           training::TrainConfig& out) {
    if (!j.contains("optimizer")) return;
    const std::string name = j.at("optimizer").get<std::string>();
    if (name == "adam")
        out.optimizer = nn::OptKind::adam;
    else if (name == "rmsprop")
        out.optimizer = nn::OptKind::rmsprop;
    else
        throw ConfigError(where + ".optimizer: expected \"adam\" or \"rmsprop\", got \"" + name +
                          "\"");
}

inline void read_train_section(const nlohmann::json& j, const std::string& where,
                               training::TrainConfig& out) {
    check_keys(j, where,
               {"epochs", "batch_size", "lr", "lr_decay", "lr_step_epochs", "optimizer",
                "momentum", "weight_decay"});
    read_field(j, where, "epochs", out.epochs);
    read_field(j, where, "batch_size", out.batch_size);
    read_field(j, where, "lr", out.lr0);
    read_field(j, where, "lr_decay", out.lr_decay);
    read_field(j, where, "lr_step_epochs", out.lr_step_epochs);
    read_optimizer(j, where, out);
    read_field(j, where, "momentum", out.momentum);
    read_field(j, where, "weight_decay", out.weight_decay);
}

inline nlohmann::json train_section_json(const training::TrainConfig& c) {
    return nlohmann::json{
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"lr", c.lr0},
        {"lr_decay", c.lr_decay},
        {"lr_step_epochs", c.lr_step_epochs},
        {"optimizer", c.optimizer == nn::OptKind::adam ? "adam" : "rmsprop"},
        {"momentum", c.momentum},
        {"weight_decay", c.weight_decay},
    };
}

}  // namespace detail

/// Fills the deferred defaults (min_offset, CSI rate) from the rest of the
/// config. Serialization always writes the resolved form.
inline RunConfig resolved(RunConfig cfg) {
    if (cfg.min_offset == 0) cfg.min_offset = cfg.g;
    if (cfg.csi.rate_hz == 0.0) cfg.csi.rate_hz = cfg.m * cfg.fps;
    return cfg;
}

inline void validate(const RunConfig& c) {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (c.m < 1) fail("m: must be >= 1");
    if (c.g < 1) fail("g: must be >= 1");
    if (!(c.eta >= 0.0f && c.eta < 1.0f)) fail("eta: must be in [0, 1)");
    if (c.gop_length < 1) fail("gop_length: must be >= 1");
    if (c.block_size < 1) fail("block_size: must be >= 1");
    if (c.height < 1 || c.width < 1) fail("height/width: must be positive");
    if (c.height % 16 != 0 || c.width % 16 != 0)
        fail("height/width: must be divisible by 16, got " + std::to_string(c.height) + "x" +
             std::to_string(c.width));
    if (c.height % c.block_size != 0 || c.width % c.block_size != 0)
        fail("height/width: must be divisible by block_size " + std::to_string(c.block_size));
    if (c.hampel.window < 3 || c.hampel.window % 2 == 0)
        fail("hampel.window: must be odd and >= 3");
    if (c.hampel.n_sigmas <= 0.0) fail("hampel.n_sigmas: must be positive");
    if (!(c.min_area_frac >= 0.0f && c.min_area_frac <= 1.0f))
        fail("min_area_frac: must be in [0, 1]");
    if (!(c.forgery_frac > 0.0 && c.forgery_frac < 1.0)) fail("forgery_frac: must be in (0, 1)");
    if (c.min_offset != 0 && c.min_offset < c.g)
        fail("min_offset: must be >= g (" + std::to_string(c.g) + "), got " +
             std::to_string(c.min_offset));
    if (c.fps <= 0.0) fail("fps: must be positive");
    if (!(c.train_frac > 0.0 && c.train_frac < 1.0)) fail("train_frac: must be in (0, 1)");
    if (c.frame_split != "random" && c.frame_split != "contiguous")
        fail("frame_split: expected \"random\" or \"contiguous\", got \"" + c.frame_split + "\"");
    if (c.clip_split != "random" && c.clip_split != "contiguous")
        fail("clip_split: expected \"random\" or \"contiguous\", got \"" + c.clip_split + "\"");
    if (!(c.gate_threshold >= 0.0f && c.gate_threshold <= 1.0f))
        fail("gate_threshold: must be in [0, 1]");
    if (!(c.verdict_threshold >= 0.0f && c.verdict_threshold <= 1.0f))
        fail("verdict_threshold: must be in [0, 1]");
    if (c.csi.k < 1 || c.csi.n_tx < 1 || c.csi.n_rx < 1)
        fail("csi.k/n_tx/n_rx: must be >= 1");
    if (c.csi.rate_hz != 0.0 && c.csi.rate_hz < c.m * c.fps)
        fail("csi.rate_hz: must be >= m * fps (" + std::to_string(c.m * c.fps) + ") so every frame holds m measurements");
    if (c.sim.frames_per_scene < 1) fail("sim.frames_per_scene: must be >= 1");
    if (c.sim.persons.empty()) fail("sim.persons: must be non-empty");
    for (int p : c.sim.persons)
        if (p < 0 || p > 3) fail("sim.persons: entries must be in [0, 3]");
    if (c.sim.noise_sigma < 0.0) fail("sim.noise_sigma: must be >= 0");
    if (!(c.sim.outlier_rate >= 0.0 && c.sim.outlier_rate <= 1.0))
        fail("sim.outlier_rate: must be in [0, 1]");
    auto check_train = [&](const training::TrainConfig& t, const std::string& name) {
        if (t.epochs < 1) fail(name + ".epochs: must be >= 1");
        if (t.batch_size < 1) fail(name + ".batch_size: must be >= 1");
        if (t.lr0 <= 0.0) fail(name + ".lr: must be positive");
        if (t.lr_decay <= 0.0) fail(name + ".lr_decay: must be positive");
        if (t.lr_step_epochs < 1) fail(name + ".lr_step_epochs: must be >= 1");
        if (t.momentum < 0.0) fail(name + ".momentum: must be >= 0");
        if (t.weight_decay < 0.0) fail(name + ".weight_decay: must be >= 0");
    };
    check_train(c.train_detector, "train.detector");
    check_train(c.train_segmentor, "train.segmentor");
    check_train(c.train_forgery, "train.forgery");
}

inline RunConfig from_json(const nlohmann::json& j) {
    using detail::check_keys;
    using detail::read_field;
    check_keys(j, "config",
               {"m", "g", "lambda", "tau", "eta", "gop_length", "block_size", "height", "width",
                "hampel", "min_area_frac", "lambda_b", "forgery_frac", "min_offset", "seed",
                "fps", "train_frac", "frame_split", "clip_split", "gate_threshold",
                "verdict_threshold", "csi", "sim", "train"});
    RunConfig c;
    read_field(j, "config", "m", c.m);
    read_field(j, "config", "g", c.g);
    read_field(j, "config", "lambda", c.lambda);
    read_field(j, "config", "tau", c.tau);
    read_field(j, "config", "eta", c.eta);
    read_field(j, "config", "gop_length", c.gop_length);
    read_field(j, "config", "block_size", c.block_size);
    read_field(j, "config", "height", c.height);
    read_field(j, "config", "width", c.width);
    if (j.contains("hampel")) {
        const auto& h = j.at("hampel");
        check_keys(h, "hampel", {"window", "n_sigmas"});
        read_field(h, "hampel", "window", c.hampel.window);
        read_field(h, "hampel", "n_sigmas", c.hampel.n_sigmas);
    }
    read_field(j, "config", "min_area_frac", c.min_area_frac);
    read_field(j, "config", "lambda_b", c.lambda_b);
    read_field(j, "config", "forgery_frac", c.forgery_frac);
    read_field(j, "config", "min_offset", c.min_offset);
    read_field(j, "config", "seed", c.seed);
    read_field(j, "config", "fps", c.fps);
    read_field(j, "config", "train_frac", c.train_frac);
    read_field(j, "config", "frame_split", c.frame_split);
    read_field(j, "config", "clip_split", c.clip_split);
    read_field(j, "config", "gate_threshold", c.gate_threshold);
    read_field(j, "config", "verdict_threshold", c.verdict_threshold);
    if (j.contains("csi")) {
        const auto& s = j.at("csi");
        check_keys(s, "csi", {"k", "n_tx", "n_rx", "rate_hz"});
        read_field(s, "csi", "k", c.csi.k);
        read_field(s, "csi", "n_tx", c.csi.n_tx);
        read_field(s, "csi", "n_rx", c.csi.n_rx);
        read_field(s, "csi", "rate_hz", c.csi.rate_hz);
    }
    if (j.contains("sim")) {
        const auto& s = j.at("sim");
        check_keys(s, "sim",
                   {"frames_per_scene", "persons", "baseline", "bump_gain", "bump_sigma",
                    "noise_sigma", "outlier_rate", "outlier_mag"});
        read_field(s, "sim", "frames_per_scene", c.sim.frames_per_scene);
        read_field(s, "sim", "persons", c.sim.persons);
        read_field(s, "sim", "baseline", c.sim.baseline);
        read_field(s, "sim", "bump_gain", c.sim.bump_gain);
        read_field(s, "sim", "bump_sigma", c.sim.bump_sigma);
        read_field(s, "sim", "noise_sigma", c.sim.noise_sigma);
        read_field(s, "sim", "outlier_rate", c.sim.outlier_rate);
        read_field(s, "sim", "outlier_mag", c.sim.outlier_mag);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t, "train", {"detector", "segmentor", "forgery"});
        if (t.contains("detector"))
            detail::read_train_section(t.at("detector"), "train.detector", c.train_detector);
        if (t.contains("segmentor"))
            detail::read_train_section(t.at("segmentor"), "train.segmentor", c.train_segmentor);
        if (t.contains("forgery"))
            detail::read_train_section(t.at("forgery"), "train.forgery", c.train_forgery);
    }
    validate(c);
    return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
    return nlohmann::json{
        {"m", c.m},
        {"g", c.g},
        {"lambda", c.lambda},
        {"tau", c.tau},
        {"eta", c.eta},
        {"gop_length", c.gop_length},
        {"block_size", c.block_size},
        {"height", c.height},
        {"width", c.width},
        {"hampel", {{"window", c.hampel.window}, {"n_sigmas", c.hampel.n_sigmas}}},
        {"min_area_frac", c.min_area_frac},
        {"lambda_b", c.lambda_b},
        {"forgery_frac", c.forgery_frac},
        {"min_offset", c.min_offset},
        {"seed", c.seed},
        {"fps", c.fps},
        {"train_frac", c.train_frac},
        {"frame_split", c.frame_split},
        {"clip_split", c.clip_split},
        {"gate_threshold", c.gate_threshold},
        {"verdict_threshold", c.verdict_threshold},
        {"csi",
         {{"k", c.csi.k},
          {"n_tx", c.csi.n_tx},
          {"n_rx", c.csi.n_rx},
          {"rate_hz", c.csi.rate_hz}}},
        {"sim",
         {{"frames_per_scene", c.sim.frames_per_scene},
          {"persons", c.sim.persons},
          {"baseline", c.sim.baseline},
          {"bump_gain", c.sim.bump_gain},
          {"bump_sigma", c.sim.bump_sigma},
          {"noise_sigma", c.sim.noise_sigma},
          {"outlier_rate", c.sim.outlier_rate},
          {"outlier_mag", c.sim.outlier_mag}}},
        {"train",
         {{"detector", detail::train_section_json(c.train_detector)},
          {"segmentor", detail::train_section_json(c.train_segmentor)},
          {"forgery", detail::train_section_json(c.train_forgery)}}},
    };
}

inline RunConfig load(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

inline void save(const std::filesystem::path& path, const RunConfig& c) {
    io::write_file(path, to_json(c).dump(2) + "\n");
}

}  // namespace csiguard::config
