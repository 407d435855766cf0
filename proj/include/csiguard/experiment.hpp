#pragma once

// End-to-end experiment orchestration: simulate scenes, preprocess the two
// modalities into aligned samples, train the three modules, evaluate, and
// persist run artifacts (resolved config, manifest, checkpoints, logs,
// metrics). Also the ablation driver, which re-simulates nothing and
// retrains only what a parameter change invalidates.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csiguard/common.hpp"
#include "csiguard/config.hpp"
#include "csiguard/csi.hpp"
#include "csiguard/evaluation.hpp"
#include "csiguard/models.hpp"
#include "csiguard/mv.hpp"
#include "csiguard/sync.hpp"
#include "csiguard/synthgen.hpp"
#include "csiguard/training.hpp"

namespace csiguard::experiment {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Seed derivation: one base seed fans out to fixed, documented offsets so
// every stochastic stage is independently reproducible.
// ---------------------------------------------------------------------------

namespace seeds {
inline std::uint64_t scene(std::uint64_t base, std::size_t i) { return base + 1000003ULL * (i + 1); }
inline constexpr std::uint64_t kDetectorInit = 11, kSegmentorInit = 12, kForgeryInit = 13;
inline constexpr std::uint64_t kDetectorTrain = 21, kSegmentorTrain = 22, kForgeryTrain = 23;
inline constexpr std::uint64_t kFrameSplit = 31, kClipSplit = 32;
inline std::uint64_t clips(std::uint64_t base, std::size_t rec) { return base + 41 + 17ULL * rec; }
}  // namespace seeds

// ---------------------------------------------------------------------------
// Preprocessing: raw records + motion vectors -> aligned SyncedSamples
// ---------------------------------------------------------------------------

struct PreprocParams {
    int m = 5;
    int hampel_window = 5;
    double hampel_nsigmas = 3.0;
    mv::MaskParams mask;
    float eta = 0.0f;
};

inline PreprocParams preproc_params(const config::RunConfig& cfg) {
    PreprocParams p;
    p.m = cfg.m;
    p.hampel_window = cfg.hampel.window;
    p.hampel_nsigmas = cfg.hampel.n_sigmas;
    p.mask = cfg.mask_params();
    p.eta = cfg.eta;
    return p;
}

struct PreprocResult {
    std::vector<sync::SyncedSample> samples;  // one per frame that kept m records
    std::vector<mv::BinaryMask> pseudo_masks; // one per video frame, unconditionally
    int dropped_frames = 0;
};

inline PreprocResult preprocess(std::span<const csi::CsiRecord> records,
                                std::span<const mv::MotionField> fields,
                                std::span<const std::int64_t> frame_times_us,
                                const PreprocParams& p) {
    std::vector<csi::AmplitudeRecord> amps;
    amps.reserve(records.size());
    for (const csi::CsiRecord& r : records) amps.push_back(csi::amplitude(r));
    const std::vector<csi::AmplitudeRecord> denoised =
        csi::hampel_denoise(amps, p.hampel_window, p.hampel_nsigmas);
    const csi::WindowingResult wr = csi::window_csi(denoised, frame_times_us, p.m);

    PreprocResult result;
    result.dropped_frames = wr.dropped_frames;
    result.pseudo_masks = mv::masks_for_video(fields, p.mask);
    std::map<int, const mv::BinaryMask*> by_frame;
    for (const mv::BinaryMask& mask : result.pseudo_masks) by_frame[mask.frame_index] = &mask;
    result.samples.reserve(wr.windows.size());
    for (const csi::CsiWindow& w : wr.windows) {
        const auto it = by_frame.find(w.frame_index);
        if (it == by_frame.end()) continue;
        sync::SyncedSample s;
        s.frame_index = w.frame_index;
        s.window = w;
        s.pseudo_mask = *it->second;
        s.motion_label = sync::motion_criterion(s.pseudo_mask, p.eta);
        result.samples.push_back(std::move(s));
    }
    return result;
}

inline PreprocResult preprocess(const synthgen::Recording& rec, const PreprocParams& p) {
    return preprocess(rec.records, rec.fields, rec.frame_times_us, p);
}

// ---------------------------------------------------------------------------
// Recording directories on disk
// ---------------------------------------------------------------------------

struct LoadedRecording {
    sync::RecordingManifest manifest;
    std::vector<csi::CsiRecord> records;
    mv::MvSidecar mv;
    std::vector<std::int64_t> frame_times_us;
};

inline LoadedRecording load_recording(const fs::path& dir) {
    LoadedRecording rec;
    rec.manifest = sync::parse_manifest(dir / "manifest.json");
    rec.records = csi::parse_csi_stream(dir / "csi.bin", rec.manifest.dims);
    rec.mv = mv::parse_mv_sidecar(dir / "mv.bin");
    if (rec.mv.width != rec.manifest.width || rec.mv.height != rec.manifest.height)
        throw DimensionError(dir.string() + ": motion-vector geometry disagrees with manifest");
    rec.frame_times_us.reserve(static_cast<std::size_t>(rec.manifest.frame_count));
    for (int f = 0; f < rec.manifest.frame_count; ++f)
        rec.frame_times_us.push_back(
            static_cast<std::int64_t>(std::llround(f * 1e6 / rec.manifest.fps)));
    return rec;
}

inline PreprocResult preprocess_dir(const fs::path& dir, const PreprocParams& p) {
    const LoadedRecording rec = load_recording(dir);
    return preprocess(rec.records, rec.mv.fields, rec.frame_times_us, p);
}

/// Adapts an on-disk recording to the in-memory form the experiment driver
/// consumes. Ground-truth masks are picked up when present; without them
/// the localization check simply has no frames to score.
inline synthgen::Recording to_recording(const LoadedRecording& lr, const fs::path& dir) {
    synthgen::Recording rec;
    rec.scene.width = lr.manifest.width;
    rec.scene.height = lr.manifest.height;
    rec.scene.fps = lr.manifest.fps;
    rec.scene.frames = lr.manifest.frame_count;
    rec.scene.gop_length = lr.manifest.gop_length;
    rec.scene.block_size = lr.manifest.block_size;
    rec.scene.persons = lr.manifest.persons;
    rec.scene.seed = lr.manifest.seed;
    rec.model.dims = lr.manifest.dims;
    rec.records = lr.records;
    rec.fields = lr.mv.fields;
    rec.frame_times_us = lr.frame_times_us;
    char name[32];
    for (int f = 0; f < lr.manifest.frame_count; ++f) {
        std::snprintf(name, sizeof name, "%06d.pgm", f);
        const fs::path mask_path = dir / "gt_masks" / name;
        if (!fs::exists(mask_path)) break;
        rec.gt_masks.push_back(mv::parse_mask_pgm(mask_path));
    }
    return rec;
}

inline synthgen::Recording load_recording_dir(const fs::path& dir) {
    return to_recording(load_recording(dir), dir);
}

// ---------------------------------------------------------------------------
// Net construction from a run config
// ---------------------------------------------------------------------------

inline models::DetectorNet<float>::Config detector_config(const config::RunConfig& c) {
    return {c.csi.k, c.csi.n_tx * c.csi.n_rx, c.m};
}
inline models::SegmentorNet<float>::Config segmentor_config(const config::RunConfig& c) {
    return {c.m * c.csi.k, c.height, c.width};
}
inline models::ForgeryNet<float>::Config forgery_config(const config::RunConfig& c) {
    return {c.height, c.width, c.g};
}

inline models::Fingerprint fingerprint(const config::RunConfig& c, const std::string& module,
                                       int epoch, std::uint64_t seed) {
    models::Fingerprint fp;
    fp.module = module;
    fp.m = c.m;
    fp.g = c.g;
    fp.k = c.csi.k;
    fp.n_tx = c.csi.n_tx;
    fp.n_rx = c.csi.n_rx;
    fp.h = c.height;
    fp.w = c.width;
    fp.epoch = epoch;
    fp.seed = seed;
    return fp;
}

/// The three networks, freshly initialized or loaded from checkpoints.
struct NetBundle {
    models::DetectorNet<float> detector;
    models::SegmentorNet<float> segmentor;
    models::ForgeryNet<float> forgery;

    explicit NetBundle(const config::RunConfig& c)
        : detector(detector_config(c), c.seed + seeds::kDetectorInit),
          segmentor(segmentor_config(c), c.seed + seeds::kSegmentorInit),
          forgery(forgery_config(c), c.seed + seeds::kForgeryInit) {}
};

inline NetBundle load_bundle(const config::RunConfig& c, const fs::path& ckpt_dir) {
    NetBundle nets(c);
    models::load_checkpoint(ckpt_dir / "detector.ckpt", fingerprint(c, "detector", 0, 0),
                            nets.detector);
    models::load_checkpoint(ckpt_dir / "segmentor.ckpt", fingerprint(c, "segmentor", 0, 0),
                            nets.segmentor);
    models::load_checkpoint(ckpt_dir / "forgery.ckpt", fingerprint(c, "forgery", 0, 0),
                            nets.forgery);
    return nets;
}

inline mv::ProbMask predict_mask(models::SegmentorNet<float>& net, const csi::CsiWindow& window,
                                 csi::CsiDims dims) {
    const std::vector<float> tiled = models::tile_to_working_size<float>(
        window.amps, window.subcarriers, dims.n_tx, dims.n_rx, net.config().h, net.config().w);
    std::vector<float> logits = net.forward(tiled);
    mv::ProbMask p;
    p.frame_index = window.frame_index;
    p.width = net.config().w;
    p.height = net.config().h;
    p.values.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) p.values[i] = nn::sigmoid(logits[i]);
    return p;
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

struct ExperimentOutput {
    config::RunConfig cfg;  // resolved
    models::DetectorNet<float> detector;
    models::SegmentorNet<float> segmentor;
    models::ForgeryNet<float> forgery;
    training::TrainResult detector_log, segmentor_log, forgery_log;
    evaluation::MetricsReport detector_metrics, forgery_metrics;
    double segmentor_test_loss = 0.0;
    double segmentor_pixel_acc = 0.0;
    double centroid_hit_rate = 0.0;  // single-actor moving test frames
    int centroid_frames = 0;
    int train_clips = 0, test_clips = 0;
    std::uint64_t detector_seed = 0, segmentor_seed = 0, forgery_seed = 0;

    explicit ExperimentOutput(const config::RunConfig& c)
        : cfg(c),
          detector(detector_config(c), c.seed + seeds::kDetectorInit),
          segmentor(segmentor_config(c), c.seed + seeds::kSegmentorInit),
          forgery(forgery_config(c), c.seed + seeds::kForgeryInit) {}
};

namespace detail {

/// Carves a validation tail off a training list so best-epoch selection
/// never sees the test split.
template <class T>
std::pair<std::span<const T>, std::span<const T>> train_val(const std::vector<T>& items) {
    const std::size_t n = items.size();
    const std::size_t n_val = n >= 10 ? n / 10 : (n > 1 ? 1 : 0);
    std::span<const T> all(items);
    return {all.subspan(0, n - n_val), all.subspan(n - n_val)};
}

struct Centroid {
    double x = 0.0, y = 0.0;
    bool defined = false;
};

inline Centroid mask_centroid(const std::vector<std::uint8_t>& grid, int w, int h) {
    Centroid c;
    std::int64_t n = 0;
    double sx = 0.0, sy = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (grid[static_cast<std::size_t>(y) * w + x]) {
                sx += x;
                sy += y;
                ++n;
            }
    if (n == 0) return c;
    c.x = sx / static_cast<double>(n);
    c.y = sy / static_cast<double>(n);
    c.defined = true;
    return c;
}

inline Centroid prob_centroid(const mv::ProbMask& p, float threshold) {
    std::vector<std::uint8_t> grid(p.values.size());
    for (std::size_t i = 0; i < p.values.size(); ++i) grid[i] = p.values[i] >= threshold ? 1 : 0;
    return mask_centroid(grid, p.width, p.height);
}

}  // namespace detail

/// Simulates the benchmark scenes once, then runs any number of
/// train/evaluate passes over them (possibly with different m or g), which
/// is what the ablation driver needs.
class Workspace {
public:
    explicit Workspace(const config::RunConfig& raw) : base_(config::resolved(raw)) {
        config::validate(base_);
        for (std::size_t i = 0; i < base_.sim.persons.size(); ++i) {
            synthgen::SceneSpec scene =
                synthgen::make_scene(base_.sim.persons[i], base_.sim.frames_per_scene,
                                     seeds::scene(base_.seed, i), base_.width, base_.height);
            scene.fps = base_.fps;
            scene.gop_length = base_.gop_length;
            scene.block_size = base_.block_size;
            recordings_.push_back(synthgen::simulate(scene, base_.csi_model(), base_.csi.rate_hz));
        }
    }

    /// Runs over pre-recorded data instead of simulating.
    Workspace(const config::RunConfig& raw, std::vector<synthgen::Recording> recordings)
        : base_(config::resolved(raw)), recordings_(std::move(recordings)) {
        config::validate(base_);
        if (recordings_.empty()) throw ConfigError("experiment: no recordings given");
    }

    const config::RunConfig& base_config() const { return base_; }
    const std::vector<synthgen::Recording>& recordings() const { return recordings_; }

    /// Full pass: preprocess with cfg's m, train the three modules, and
    /// evaluate. `reuse` donates its trained detector and segmentor when m
    /// is unchanged (a g-only change does not invalidate them).
    ExperimentOutput run(const config::RunConfig& raw_cfg,
                         const ExperimentOutput* reuse = nullptr) const {
        const config::RunConfig cfg = config::resolved(raw_cfg);
        config::validate(cfg);
        ExperimentOutput out(cfg);
        out.detector_seed = cfg.seed + seeds::kDetectorTrain;
        out.segmentor_seed = cfg.seed + seeds::kSegmentorTrain;
        out.forgery_seed = cfg.seed + seeds::kForgeryTrain;

        // Preprocess every recording, then concatenate with bookkeeping.
        const PreprocParams pp = preproc_params(cfg);
        std::vector<PreprocResult> per_rec;
        per_rec.reserve(recordings_.size());
        std::vector<sync::SyncedSample> all;
        std::vector<std::size_t> rec_of;
        for (std::size_t r = 0; r < recordings_.size(); ++r) {
            per_rec.push_back(preprocess(recordings_[r], pp));
            for (const sync::SyncedSample& s : per_rec.back().samples) {
                all.push_back(s);
                rec_of.push_back(r);
            }
        }
        if (all.empty()) throw ConfigError("experiment: preprocessing produced no samples");

        const sync::SplitSpec frame_spec{cfg.train_frac, cfg.seed + seeds::kFrameSplit,
                                         cfg.frame_split_mode()};

        // Detector.
        const bool can_reuse = reuse != nullptr && reuse->cfg.m == cfg.m &&
                               reuse->cfg.seed == cfg.seed &&
                               reuse->cfg.csi.dims() == cfg.csi.dims();
        const sync::DetectorDataset det_ds = sync::build_detector_dataset(all, frame_spec);
        if (can_reuse) {
            out.detector = reuse->detector;
            out.detector_log = reuse->detector_log;
            out.detector_metrics = reuse->detector_metrics;
        } else {
            training::TrainConfig tc = cfg.train_detector;
            tc.module = "detector";
            tc.seed = out.detector_seed;
            const auto [tr, val] = detail::train_val(det_ds.train);
            out.detector_log = training::train_detector(out.detector, tr, val, tc);
            training::restore_weights(out.detector, out.detector_log.best_weights);
            const training::BinaryEval ev = training::evaluate_detector(out.detector, det_ds.test);
            std::vector<int> labels;
            labels.reserve(det_ds.test.size());
            for (const sync::DetectorItem& it : det_ds.test) labels.push_back(it.label);
            out.detector_metrics = evaluation::confusion(ev.preds, labels);
        }

        // Segmentor.
        const sync::SegmentorDataset seg_ds = sync::build_segmentor_dataset(all, frame_spec);
        if (can_reuse) {
            out.segmentor = reuse->segmentor;
            out.segmentor_log = reuse->segmentor_log;
            out.segmentor_test_loss = reuse->segmentor_test_loss;
            out.segmentor_pixel_acc = reuse->segmentor_pixel_acc;
        } else {
            training::TrainConfig tc = cfg.train_segmentor;
            tc.module = "segmentor";
            tc.seed = out.segmentor_seed;
            const training::SegLossParams lp{cfg.lambda_b, 1.0f};
            const auto [tr, val] = detail::train_val(seg_ds.train);
            out.segmentor_log =
                training::train_segmentor(out.segmentor, cfg.csi.dims(), tr, val, tc, lp);
            training::restore_weights(out.segmentor, out.segmentor_log.best_weights);
            const training::SegEval ev =
                training::evaluate_segmentor(out.segmentor, cfg.csi.dims(), seg_ds.test, lp);
            out.segmentor_test_loss = ev.loss;
            out.segmentor_pixel_acc = ev.pixel_acc;
        }

        // Forgery-detection clips, built per moving recording from the
        // trained segmentor's own predictions.
        std::vector<sync::ClipPair> clip_train, clip_test;
        for (std::size_t r = 0; r < recordings_.size(); ++r) {
            if (recordings_[r].scene.persons == 0) continue;
            const std::vector<sync::SyncedSample>& samples = per_rec[r].samples;
            std::vector<std::shared_ptr<const mv::BinaryMask>> visual;
            std::vector<std::shared_ptr<const mv::ProbMask>> wireless;
            visual.reserve(samples.size());
            wireless.reserve(samples.size());
            for (const sync::SyncedSample& s : samples) {
                visual.push_back(std::make_shared<mv::BinaryMask>(s.pseudo_mask));
                wireless.push_back(std::make_shared<mv::ProbMask>(
                    predict_mask(out.segmentor, s.window, cfg.csi.dims())));
            }
            const std::vector<sync::ClipPair> clips = sync::build_forgery_dataset(
                visual, wireless, cfg.g, cfg.forgery_frac, cfg.min_offset,
                seeds::clips(cfg.seed, r));
            const sync::SplitSpec clip_spec{cfg.train_frac, cfg.seed + seeds::kClipSplit,
                                            cfg.clip_split_mode()};
            const sync::SplitIndices idx = sync::split_indices(clips.size(), clip_spec);
            for (std::size_t i : idx.train) clip_train.push_back(clips[i]);
            for (std::size_t i : idx.test) clip_test.push_back(clips[i]);
        }
        out.train_clips = static_cast<int>(clip_train.size());
        out.test_clips = static_cast<int>(clip_test.size());
        if (!clip_train.empty()) {
            training::TrainConfig tc = cfg.train_forgery;
            tc.module = "forgery";
            tc.seed = out.forgery_seed;
            const auto [tr, val] = detail::train_val(clip_train);
            out.forgery_log = training::train_forgery(out.forgery, tr, val, tc);
            training::restore_weights(out.forgery, out.forgery_log.best_weights);
            if (!clip_test.empty()) {
                const training::BinaryEval ev =
                    training::evaluate_forgery(out.forgery, clip_test);
                std::vector<int> labels;
                labels.reserve(clip_test.size());
                for (const sync::ClipPair& c : clip_test) labels.push_back(c.label);
                out.forgery_metrics = evaluation::confusion(ev.preds, labels);
            }
        }

        // Localization check: single-actor moving test frames, predicted
        // centroid against the simulator's ground-truth mask.
        const sync::SplitIndices frame_idx = sync::split_indices(all.size(), frame_spec);
        int hits = 0, total = 0;
        const double limit = 2.0 * cfg.block_size;
        for (std::size_t i : frame_idx.test) {
            const std::size_t r = rec_of[i];
            if (recordings_[r].scene.persons != 1 || all[i].motion_label != 1) continue;
            const mv::BinaryMask& gt =
                recordings_[r].gt_masks[static_cast<std::size_t>(all[i].frame_index)];
            const detail::Centroid gc = detail::mask_centroid(gt.grid, gt.width, gt.height);
            if (!gc.defined) continue;
            ++total;
            const mv::ProbMask pred = predict_mask(out.segmentor, all[i].window, cfg.csi.dims());
            const detail::Centroid pc = detail::prob_centroid(pred, 0.5f);
            if (pc.defined && std::hypot(pc.x - gc.x, pc.y - gc.y) <= limit) ++hits;
        }
        out.centroid_frames = total;
        out.centroid_hit_rate = total > 0 ? static_cast<double>(hits) / total : 0.0;
        return out;
    }

private:
    config::RunConfig base_;
    std::vector<synthgen::Recording> recordings_;
};

// ---------------------------------------------------------------------------
// Run-directory artifacts
// ---------------------------------------------------------------------------

inline nlohmann::json summary_json(const ExperimentOutput& out) {
    return nlohmann::json{
        {"detector", evaluation::metrics_json(out.detector_metrics)},
        {"forgery", evaluation::metrics_json(out.forgery_metrics)},
        {"segmentor",
         {{"test_loss", out.segmentor_test_loss},
          {"pixel_acc", out.segmentor_pixel_acc},
          {"centroid_hit_rate", out.centroid_hit_rate},
          {"centroid_frames", out.centroid_frames}}},
        {"clips", {{"train", out.train_clips}, {"test", out.test_clips}}},
    };
}

inline void write_run_artifacts(ExperimentOutput& out, const fs::path& dir) {
    fs::create_directories(dir / "checkpoints");
    fs::create_directories(dir / "logs");
    fs::create_directories(dir / "metrics");
    config::save(dir / "config.resolved", out.cfg);

    // A caller (the train command) may have recorded data-directory hashes
    // already; keep them and add the resolved config on top.
    nlohmann::json inputs = nlohmann::json::object();
    if (fs::exists(dir / "manifest.json")) {
        try {
            const nlohmann::json prev = nlohmann::json::parse(io::read_file(dir / "manifest.json"));
            if (prev.contains("inputs") && prev.at("inputs").is_object())
                inputs = prev.at("inputs");
        } catch (const nlohmann::json::exception&) {
        }
    }
    inputs["config.resolved"] = content_hash(dir / "config.resolved");

    nlohmann::json manifest{
        {"version", kVersion},
        {"seed", out.cfg.seed},
        {"inputs", inputs},
        {"scenes", nlohmann::json::array()},
    };
    for (std::size_t i = 0; i < out.cfg.sim.persons.size(); ++i)
        manifest["scenes"].push_back({{"persons", out.cfg.sim.persons[i]},
                                      {"frames", out.cfg.sim.frames_per_scene},
                                      {"seed", seeds::scene(out.cfg.seed, i)}});
    io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    models::save_checkpoint(
        dir / "checkpoints" / "detector.ckpt",
        fingerprint(out.cfg, "detector", out.detector_log.best_epoch, out.detector_seed),
        out.detector);
    models::save_checkpoint(
        dir / "checkpoints" / "segmentor.ckpt",
        fingerprint(out.cfg, "segmentor", out.segmentor_log.best_epoch, out.segmentor_seed),
        out.segmentor);
    models::save_checkpoint(
        dir / "checkpoints" / "forgery.ckpt",
        fingerprint(out.cfg, "forgery", out.forgery_log.best_epoch, out.forgery_seed),
        out.forgery);

    training::write_train_log_csv(dir / "logs" / "detector.csv", out.detector_log.log);
    training::write_train_log_csv(dir / "logs" / "segmentor.csv", out.segmentor_log.log);
    training::write_train_log_csv(dir / "logs" / "forgery.csv", out.forgery_log.log);

    io::write_file(dir / "metrics" / "detector.json",
                   evaluation::metrics_json(out.detector_metrics).dump(2) + "\n");
    io::write_file(dir / "metrics" / "forgery.json",
                   evaluation::metrics_json(out.forgery_metrics).dump(2) + "\n");
    io::write_file(dir / "metrics" / "summary.json", summary_json(out).dump(2) + "\n");
}

inline ExperimentOutput run_experiment(const config::RunConfig& cfg,
                                       const std::optional<fs::path>& run_dir = std::nullopt) {
    const Workspace ws(cfg);
    ExperimentOutput out = ws.run(cfg);
    if (run_dir) write_run_artifacts(out, *run_dir);
    return out;
}

// ---------------------------------------------------------------------------
// Ablation: sweep one of {m, g}; a g-only change reuses the base detector
// and segmentor, an m change retrains everything downstream of the CSI
// window length.
// ---------------------------------------------------------------------------

inline std::vector<evaluation::AblationRow> ablate(const Workspace& ws, const std::string& param,
                                                   std::span<const int> values,
                                                   const ExperimentOutput* base = nullptr) {
    if (param != "m" && param != "g")
        throw ConfigError("ablate: param must be \"m\" or \"g\", got \"" + param + "\"");
    if (values.empty()) throw ConfigError("ablate: empty value list");
    std::vector<evaluation::AblationRow> rows;
    for (int v : values) {
        config::RunConfig cfg = ws.base_config();
        if (param == "m") {
            cfg.m = v;
        } else {
            cfg.g = v;
            cfg.min_offset = 0;  // re-resolve against the new g
        }
        cfg = config::resolved(cfg);
        const ExperimentOutput* reuse = base;
        if (base != nullptr && param == "m" && base->cfg.m != v) reuse = nullptr;
        evaluation::AblationRow row;
        row.param = param;
        row.value = v;
        if (base != nullptr && base->cfg.m == cfg.m && base->cfg.g == cfg.g) {
            row.metrics = base->forgery_metrics;
        } else {
            row.metrics = ws.run(cfg, reuse).forgery_metrics;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace csiguard::experiment
