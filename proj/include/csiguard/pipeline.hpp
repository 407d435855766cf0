#pragma once

// Gated real-time inference: CSI windows pass the human detector first;
// only when it confirms motion do the segmentor and forgery detector run.
// Verdicts are emitted per sliding g-frame clip of aligned (visual,
// wireless) masks.

#include <chrono>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csiguard/common.hpp"
#include "csiguard/csi.hpp"
#include "csiguard/models.hpp"
#include "csiguard/mv.hpp"
#include "csiguard/nn.hpp"
#include "csiguard/sync.hpp"

namespace csiguard::pipeline {

struct Verdict {
    int clip_start = 0;
    float score = 0.0f;  // sigmoid of the forgery logit
    bool forged = false;
    std::int64_t latency_us = 0;  // wall time of the step that emitted it
};

struct Counters {
    std::int64_t frames_seen = 0;
    std::int64_t detector_calls = 0;
    std::int64_t segmentor_calls = 0;
    std::int64_t forgery_step_calls = 0;
    std::int64_t forgery_calls = 0;  // clip head evaluations == clips judged
    std::int64_t alerts = 0;
    std::int64_t detector_time_us = 0;
    std::int64_t segmentor_time_us = 0;
    std::int64_t forgery_time_us = 0;
};

struct PipelineParams {
    int g = 7;
    float gate_threshold = 0.5f;
    float verdict_threshold = 0.5f;
};

class Pipeline {
public:
    Pipeline(models::DetectorNet<float>& detector, models::SegmentorNet<float>& segmentor,
             models::ForgeryNet<float>& forgery, csi::CsiDims dims, PipelineParams params)
        : detector_(detector),
          segmentor_(segmentor),
          forgery_(forgery),
          dims_(dims),
          params_(params) {
        if (params.g != forgery.config().g)
            throw ConfigError("Pipeline: params.g differs from the forgery network's g");
    }

    const Counters& counters() const { return counters_; }

    void reset_buffers() {
        visual_buf_.clear();
        wireless_buf_.clear();
        features_.clear();
        indices_.clear();
    }

    /// Feed one time-aligned (CSI window, visual mask) pair. Returns a
    /// verdict once g consecutive gated frames have accumulated.
    std::optional<Verdict> step(const csi::CsiWindow& window, const mv::BinaryMask& visual_mask) {
        namespace chr = std::chrono;
        const auto t0 = chr::steady_clock::now();
        if (window.frame_index != visual_mask.frame_index)
            throw OrderingError("pipeline: modalities disagree on frame index (" +
                                std::to_string(window.frame_index) + " vs " +
                                std::to_string(visual_mask.frame_index) + ")");
        if (last_index_ >= 0 && window.frame_index <= last_index_)
            throw OrderingError("pipeline: frame index regressed from " +
                                std::to_string(last_index_) + " to " +
                                std::to_string(window.frame_index));
        const bool gap = last_index_ >= 0 && window.frame_index != last_index_ + 1;
        if (gap) reset_buffers();
        last_index_ = window.frame_index;
        ++counters_.frames_seen;

        const auto td0 = chr::steady_clock::now();
        const float gate_logit = detector_.forward(window.amps);
        ++counters_.detector_calls;
        counters_.detector_time_us +=
            chr::duration_cast<chr::microseconds>(chr::steady_clock::now() - td0).count();
        if (nn::sigmoid(gate_logit) <= params_.gate_threshold) {
            reset_buffers();
            return std::nullopt;
        }

        const auto ts0 = chr::steady_clock::now();
        const std::vector<float> tiled = models::tile_to_working_size<float>(
            window.amps, window.subcarriers, dims_.n_tx, dims_.n_rx, segmentor_.config().h,
            segmentor_.config().w);
        const std::vector<float> logits = segmentor_.forward(tiled);
        ++counters_.segmentor_calls;
        mv::ProbMask wireless;
        wireless.frame_index = window.frame_index;
        wireless.width = segmentor_.config().w;
        wireless.height = segmentor_.config().h;
        wireless.values.resize(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i)
            wireless.values[i] = nn::sigmoid(logits[i]);
        counters_.segmentor_time_us +=
            chr::duration_cast<chr::microseconds>(chr::steady_clock::now() - ts0).count();

        const auto tf0 = chr::steady_clock::now();
        const std::size_t plane =
            static_cast<std::size_t>(wireless.height) * static_cast<std::size_t>(wireless.width);
        if (visual_mask.grid.size() != plane)
            throw DimensionError("pipeline: visual mask size does not match working size");
        std::vector<float> fused(2 * plane);
        for (std::size_t i = 0; i < plane; ++i) fused[i] = static_cast<float>(visual_mask.grid[i]);
        for (std::size_t i = 0; i < plane; ++i) fused[plane + i] = wireless.values[i];
        typename models::ForgeryNet<float>::StepCache sc;
        std::vector<float> feature = forgery_.step_forward(fused, sc);
        ++counters_.forgery_step_calls;

        visual_buf_.push_back(visual_mask);
        wireless_buf_.push_back(std::move(wireless));
        features_.push_back(std::move(feature));
        indices_.push_back(window.frame_index);
        if (static_cast<int>(features_.size()) > params_.g) {
            visual_buf_.pop_front();
            wireless_buf_.pop_front();
            features_.pop_front();
            indices_.pop_front();
        }

        std::optional<Verdict> verdict;
        if (static_cast<int>(features_.size()) == params_.g) {
            typename models::ForgeryNet<float>::HeadCache hc;
            const std::vector<std::vector<float>> feats(features_.begin(), features_.end());
            const float logit = forgery_.head_forward(feats, hc);
            ++counters_.forgery_calls;
            Verdict v;
            v.clip_start = indices_.front();
            v.score = nn::sigmoid(logit);
            v.forged = v.score >= params_.verdict_threshold;
            if (v.forged) ++counters_.alerts;
            verdict = v;
        }
        counters_.forgery_time_us +=
            chr::duration_cast<chr::microseconds>(chr::steady_clock::now() - tf0).count();
        if (verdict)
            verdict->latency_us =
                chr::duration_cast<chr::microseconds>(chr::steady_clock::now() - t0).count();
        return verdict;
    }

private:
    models::DetectorNet<float>& detector_;
    models::SegmentorNet<float>& segmentor_;
    models::ForgeryNet<float>& forgery_;
    csi::CsiDims dims_;
    PipelineParams params_;
    Counters counters_;
    int last_index_ = -1;

    std::deque<mv::BinaryMask> visual_buf_;
    std::deque<mv::ProbMask> wireless_buf_;
    std::deque<std::vector<float>> features_;
    std::deque<int> indices_;
};

// ---------------------------------------------------------------------------
// Whole-recording driver
// ---------------------------------------------------------------------------

struct StreamParams {
    int m = 5;
    int hampel_window = 5;
    double hampel_nsigmas = 3.0;
    mv::MaskParams mask_params;
    PipelineParams pipeline;
};

struct StreamResult {
    std::vector<Verdict> verdicts;
    Counters counters;
    int dropped_frames = 0;
    double wall_s = 0.0;
    double detector_fps = 0.0;   // frames through the detector per second of its own time
    double segmentor_fps = 0.0;
    double forgery_fps = 0.0;    // clip verdicts per second of forgery time (steps included)
};

/// Run the gated pipeline over a recording directory (csi.bin + mv.bin +
/// manifest.json). The visual masks are derived from the motion-vector
/// sidecar exactly as during training.
inline StreamResult run_stream(const std::filesystem::path& dir, Pipeline& pipe,
                               const StreamParams& params) {
    namespace chr = std::chrono;
    const auto t0 = chr::steady_clock::now();
    const sync::RecordingManifest manifest = sync::parse_manifest(dir / "manifest.json");
    const std::vector<csi::CsiRecord> records =
        csi::parse_csi_stream(dir / "csi.bin", manifest.dims);
    const mv::MvSidecar sidecar = mv::parse_mv_sidecar(dir / "mv.bin");

    std::vector<csi::AmplitudeRecord> amps;
    amps.reserve(records.size());
    for (const csi::CsiRecord& r : records) amps.push_back(csi::amplitude(r));
    amps = csi::hampel_denoise(amps, params.hampel_window, params.hampel_nsigmas);

    std::vector<std::int64_t> frame_times(static_cast<std::size_t>(manifest.frame_count));
    for (int f = 0; f < manifest.frame_count; ++f)
        frame_times[static_cast<std::size_t>(f)] =
            static_cast<std::int64_t>(std::llround(f * 1e6 / manifest.fps));
    const csi::WindowingResult windows = csi::window_csi(amps, frame_times, params.m);

    const std::vector<mv::BinaryMask> visual_masks =
        mv::masks_for_video(sidecar.fields, params.mask_params);

    StreamResult result;
    result.dropped_frames = windows.dropped_frames;
    std::size_t mask_pos = 0;
    for (const csi::CsiWindow& window : windows.windows) {
        while (mask_pos < visual_masks.size() &&
               visual_masks[mask_pos].frame_index < window.frame_index)
            ++mask_pos;
        if (mask_pos >= visual_masks.size() ||
            visual_masks[mask_pos].frame_index != window.frame_index)
            continue;  // no visual mask for this frame
        if (auto v = pipe.step(window, visual_masks[mask_pos])) result.verdicts.push_back(*v);
    }
    result.counters = pipe.counters();
    result.wall_s =
        chr::duration_cast<chr::microseconds>(chr::steady_clock::now() - t0).count() / 1e6;
    const Counters& c = result.counters;
    if (c.detector_time_us > 0)
        result.detector_fps = 1e6 * static_cast<double>(c.detector_calls) /
                              static_cast<double>(c.detector_time_us);
    if (c.segmentor_time_us > 0)
        result.segmentor_fps = 1e6 * static_cast<double>(c.segmentor_calls) /
                               static_cast<double>(c.segmentor_time_us);
    if (c.forgery_time_us > 0)
        result.forgery_fps = 1e6 * static_cast<double>(c.forgery_calls) /
                             static_cast<double>(c.forgery_time_us);
    return result;
}

// ---------------------------------------------------------------------------
// Verdict log (JSON lines)
// ---------------------------------------------------------------------------

inline void write_verdict_log(const std::filesystem::path& path,
                              std::span<const Verdict> verdicts) {
    std::string out;
    for (const Verdict& v : verdicts) {
        nlohmann::json j{{"clip_start", v.clip_start},
                         {"score", v.score},
                         {"forged", v.forged},
                         {"latency_us", v.latency_us}};
        out += j.dump();
        out += '\n';
    }
    io::write_file(path, out);
}

inline std::vector<Verdict> parse_verdict_log(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    std::vector<Verdict> verdicts;
    std::size_t lineno = 0, pos = 0;
    while (pos < bytes.size()) {
        std::size_t eol = bytes.find('\n', pos);
        if (eol == std::string::npos) eol = bytes.size();
        const std::string line = bytes.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (line.empty()) continue;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            Verdict v;
            v.clip_start = j.at("clip_start").get<int>();
            v.score = j.at("score").get<float>();
            v.forged = j.at("forged").get<bool>();
            v.latency_us = j.at("latency_us").get<std::int64_t>();
            verdicts.push_back(v);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return verdicts;
}

}  // namespace csiguard::pipeline
