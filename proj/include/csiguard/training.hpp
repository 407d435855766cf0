#pragma once

// Training loops for the three networks: seeded shuffling, per-epoch
// learning-rate decay, RMSprop / Adam setup per module, CSV logs, and
// best-epoch weight snapshots.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csiguard/common.hpp"
#include "csiguard/models.hpp"
#include "csiguard/nn.hpp"
#include "csiguard/sync.hpp"

namespace csiguard::training {

struct TrainConfig {
    std::string module;  // "detector" | "segmentor" | "forgery"
    int epochs = 20;
    int batch_size = 32;
    double lr0 = 1e-3;
    double lr_decay = 10.0;
    int lr_step_epochs = 5;
    nn::OptKind optimizer = nn::OptKind::adam;
    double momentum = 0.0;
    double alpha = 0.99;  // rmsprop smoothing
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;

    static TrainConfig detector_defaults() {
        TrainConfig c;
        c.module = "detector";
        c.optimizer = nn::OptKind::rmsprop;
        c.lr0 = 1e-6;
        c.batch_size = 16;
        c.weight_decay = 1e-8;
        c.momentum = 0.9;
        return c;
    }
    static TrainConfig segmentor_defaults() {
        TrainConfig c;
        c.module = "segmentor";
        c.optimizer = nn::OptKind::adam;
        c.lr0 = 1e-3;
        c.batch_size = 32;
        c.weight_decay = 1e-5;
        return c;
    }
    static TrainConfig forgery_defaults() {
        TrainConfig c;
        c.module = "forgery";
        c.optimizer = nn::OptKind::adam;
        c.lr0 = 1e-3;
        c.batch_size = 32;
        c.weight_decay = 2e-5;
        return c;
    }

    nn::OptHyper<float> hyper() const {
        nn::OptHyper<float> h;
        h.kind = optimizer;
        h.weight_decay = static_cast<float>(weight_decay);
        h.momentum = static_cast<float>(momentum);
        h.alpha = static_cast<float>(alpha);
        h.beta1 = static_cast<float>(beta1);
        h.beta2 = static_cast<float>(beta2);
        return h;
    }
};

/// Stepwise decay: lr0 / lr_decay^(epoch / lr_step_epochs).
inline double lr_at(const TrainConfig& cfg, int epoch) {
    if (epoch < 0 || epoch >= cfg.epochs)
        throw std::invalid_argument("lr_at: epoch out of range");
    return cfg.lr0 / std::pow(cfg.lr_decay, epoch / cfg.lr_step_epochs);
}

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

using Weights = std::vector<std::vector<float>>;

template <class Net>
inline Weights snapshot_weights(Net& net) {
    Weights w;
    net.visit_params([&](std::vector<float>& p, std::vector<float>&) { w.push_back(p); });
    return w;
}

template <class Net>
inline void restore_weights(Net& net, const Weights& w) {
    std::size_t slot = 0;
    net.visit_params([&](std::vector<float>& p, std::vector<float>&) {
        if (slot >= w.size() || w[slot].size() != p.size())
            throw TrainingError("restore_weights: snapshot does not match model");
        p = w[slot];
        ++slot;
    });
    if (slot != w.size()) throw TrainingError("restore_weights: snapshot does not match model");
}

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = 0;
    Weights best_weights;  // net itself is left at the final epoch
};

inline void write_train_log_csv(const std::filesystem::path& path,
                                std::span<const EpochLog> log) {
    std::string out = "epoch,lr,train_loss,val_loss,val_acc\n";
    char buf[160];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g\n", e.epoch, e.lr,
                      e.train_loss, e.val_loss, e.val_acc);
        out += buf;
    }
    io::write_file(path, out);
}

namespace detail {

inline void check_finite(double loss, const std::string& module, int epoch) {
    if (!std::isfinite(loss))
        throw TrainingError(module + ": non-finite loss at epoch " + std::to_string(epoch));
}

inline std::vector<std::size_t> epoch_order(std::size_t n, Rng& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    return order;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Detector
// ---------------------------------------------------------------------------

struct BinaryEval {
    double loss = 0.0;
    double acc = 0.0;
    std::vector<int> preds;
};

inline BinaryEval evaluate_detector(models::DetectorNet<float>& net,
                                    std::span<const sync::DetectorItem> items) {
    BinaryEval ev;
    if (items.empty()) return ev;
    std::size_t correct = 0;
    for (const sync::DetectorItem& it : items) {
        const float logit = net.forward(it.window.amps);
        ev.loss += nn::bce_with_logits(logit, static_cast<float>(it.label));
        const int pred = nn::sigmoid(logit) > 0.5f ? 1 : 0;
        ev.preds.push_back(pred);
        if (pred == it.label) ++correct;
    }
    ev.loss /= static_cast<double>(items.size());
    ev.acc = static_cast<double>(correct) / static_cast<double>(items.size());
    return ev;
}

inline TrainResult train_detector(models::DetectorNet<float>& net,
                                  std::span<const sync::DetectorItem> train,
                                  std::span<const sync::DetectorItem> val,
                                  const TrainConfig& cfg) {
    if (train.empty()) throw ConfigError("train_detector: empty training set");
    nn::Optimizer<float> opt(cfg.hyper());
    Rng rng(cfg.seed);
    TrainResult result;
    double best_metric = -1e300;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(cfg, epoch);
        const std::vector<std::size_t> order = detail::epoch_order(train.size(), rng);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
            const float inv_batch = 1.0f / static_cast<float>(end - b);
            nn::Optimizer<float>::zero_grad(net);
            for (std::size_t s = b; s < end; ++s) {
                const sync::DetectorItem& it = train[order[s]];
                const float target = static_cast<float>(it.label);
                const float logit = net.forward(it.window.amps);
                epoch_loss += nn::bce_with_logits(logit, target);
                net.backward(nn::bce_with_logits_grad(logit, target) * inv_batch);
            }
            opt.step(net, static_cast<float>(lr));
        }
        epoch_loss /= static_cast<double>(train.size());
        detail::check_finite(epoch_loss, "detector", epoch);

        const BinaryEval ev = evaluate_detector(net, val);
        result.log.push_back({epoch, lr, epoch_loss, ev.loss, ev.acc});
        const double metric = val.empty() ? -epoch_loss : ev.acc;
        if (metric > best_metric) {
            best_metric = metric;
            result.best_epoch = epoch;
            result.best_weights = snapshot_weights(net);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Segmentor
// ---------------------------------------------------------------------------

struct SegLossParams {
    float lambda_b = 1.0f;
    float smooth = 1.0f;
};

inline std::vector<float> mask_targets(const mv::BinaryMask& mask) {
    std::vector<float> t(mask.grid.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(mask.grid[i]);
    return t;
}

struct SegEval {
    double loss = 0.0;
    double pixel_acc = 0.0;
};

inline SegEval evaluate_segmentor(models::SegmentorNet<float>& net, csi::CsiDims dims,
                                  std::span<const sync::SegmentorItem> items,
                                  const SegLossParams& lp) {
    SegEval ev;
    if (items.empty()) return ev;
    std::size_t correct = 0, total = 0;
    for (const sync::SegmentorItem& it : items) {
        const std::vector<float> tiled = models::tile_to_working_size<float>(
            it.window.amps, it.window.subcarriers, dims.n_tx, dims.n_rx, net.config().h,
            net.config().w);
        const std::vector<float> logits = net.forward(tiled);
        const std::vector<float> targets = mask_targets(it.target);
        ev.loss += nn::segmentor_loss(logits, targets, lp.lambda_b, lp.smooth);
        for (std::size_t i = 0; i < logits.size(); ++i) {
            const int pred = logits[i] > 0.0f ? 1 : 0;
            if (pred == static_cast<int>(it.target.grid[i])) ++correct;
        }
        total += logits.size();
    }
    ev.loss /= static_cast<double>(items.size());
    ev.pixel_acc = static_cast<double>(correct) / static_cast<double>(total);
    return ev;
}

inline TrainResult train_segmentor(models::SegmentorNet<float>& net, csi::CsiDims dims,
                                   std::span<const sync::SegmentorItem> train,
                                   std::span<const sync::SegmentorItem> val,
                                   const TrainConfig& cfg, const SegLossParams& lp = {}) {
    if (train.empty()) throw ConfigError("train_segmentor: empty training set");
    nn::Optimizer<float> opt(cfg.hyper());
    Rng rng(cfg.seed);
    TrainResult result;
    double best_metric = -1e300;
    std::vector<float> grad;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(cfg, epoch);
        const std::vector<std::size_t> order = detail::epoch_order(train.size(), rng);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
            const float inv_batch = 1.0f / static_cast<float>(end - b);
            nn::Optimizer<float>::zero_grad(net);
            for (std::size_t s = b; s < end; ++s) {
                const sync::SegmentorItem& it = train[order[s]];
                const std::vector<float> tiled = models::tile_to_working_size<float>(
                    it.window.amps, it.window.subcarriers, dims.n_tx, dims.n_rx, net.config().h,
                    net.config().w);
                const std::vector<float> logits = net.forward(tiled);
                const std::vector<float> targets = mask_targets(it.target);
                epoch_loss += nn::segmentor_loss(logits, targets, lp.lambda_b, lp.smooth, &grad);
                for (float& g : grad) g *= inv_batch;
                net.backward(grad);
            }
            opt.step(net, static_cast<float>(lr));
        }
        epoch_loss /= static_cast<double>(train.size());
        detail::check_finite(epoch_loss, "segmentor", epoch);

        const SegEval ev = evaluate_segmentor(net, dims, val, lp);
        result.log.push_back({epoch, lr, epoch_loss, ev.loss, ev.pixel_acc});
        const double metric = val.empty() ? -epoch_loss : -ev.loss;
        if (metric > best_metric) {
            best_metric = metric;
            result.best_epoch = epoch;
            result.best_weights = snapshot_weights(net);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Forgery detector
// ---------------------------------------------------------------------------

/// Stack a clip pair into per-step 2 x H x W inputs (visual plane first).
inline std::vector<std::vector<float>> clip_tensor(const sync::ClipPair& pair, int h, int w) {
    std::vector<std::vector<float>> clip(pair.visual.size());
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t t = 0; t < pair.visual.size(); ++t) {
        const mv::BinaryMask& vm = *pair.visual[t];
        const mv::ProbMask& wm = *pair.wireless[t];
        if (vm.width != w || vm.height != h || wm.width != w || wm.height != h)
            throw DimensionError("clip_tensor: mask size does not match working size");
        std::vector<float>& x = clip[t];
        x.resize(2 * plane);
        for (std::size_t i = 0; i < plane; ++i) x[i] = static_cast<float>(vm.grid[i]);
        for (std::size_t i = 0; i < plane; ++i) x[plane + i] = wm.values[i];
    }
    return clip;
}

inline BinaryEval evaluate_forgery(models::ForgeryNet<float>& net,
                                   std::span<const sync::ClipPair> items) {
    BinaryEval ev;
    if (items.empty()) return ev;
    std::size_t correct = 0;
    for (const sync::ClipPair& pair : items) {
        const float logit =
            net.forward(clip_tensor(pair, net.config().h, net.config().w));
        ev.loss += nn::bce_with_logits(logit, static_cast<float>(pair.label));
        const int pred = nn::sigmoid(logit) > 0.5f ? 1 : 0;
        ev.preds.push_back(pred);
        if (pred == pair.label) ++correct;
    }
    ev.loss /= static_cast<double>(items.size());
    ev.acc = static_cast<double>(correct) / static_cast<double>(items.size());
    return ev;
}

inline TrainResult train_forgery(models::ForgeryNet<float>& net,
                                 std::span<const sync::ClipPair> train,
                                 std::span<const sync::ClipPair> val, const TrainConfig& cfg) {
    if (train.empty()) throw ConfigError("train_forgery: empty training set");
    nn::Optimizer<float> opt(cfg.hyper());
    Rng rng(cfg.seed);
    TrainResult result;
    double best_metric = -1e300;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(cfg, epoch);
        const std::vector<std::size_t> order = detail::epoch_order(train.size(), rng);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
            const float inv_batch = 1.0f / static_cast<float>(end - b);
            nn::Optimizer<float>::zero_grad(net);
            for (std::size_t s = b; s < end; ++s) {
                const sync::ClipPair& pair = train[order[s]];
                const float target = static_cast<float>(pair.label);
                const float logit =
                    net.forward(clip_tensor(pair, net.config().h, net.config().w));
                epoch_loss += nn::bce_with_logits(logit, target);
                net.backward(nn::bce_with_logits_grad(logit, target) * inv_batch);
            }
            opt.step(net, static_cast<float>(lr));
        }
        epoch_loss /= static_cast<double>(train.size());
        detail::check_finite(epoch_loss, "forgery", epoch);

        const BinaryEval ev = evaluate_forgery(net, val);
        result.log.push_back({epoch, lr, epoch_loss, ev.loss, ev.acc});
        const double metric = val.empty() ? -epoch_loss : ev.acc;
        if (metric > best_metric) {
            best_metric = metric;
            result.best_epoch = epoch;
            result.best_weights = snapshot_weights(net);
        }
    }
    return result;
}

}  // namespace csiguard::training
