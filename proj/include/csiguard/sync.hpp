#pragma once

// Cross-modal dataset assembly: motion-existence labels, per-frame
// (CSI window, pseudo-mask) pairs, seeded train/test splits, and
// matched/unmatched clip pairs for forgery training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csiguard/common.hpp"
#include "csiguard/csi.hpp"
#include "csiguard/mv.hpp"

namespace csiguard::sync {

/// One time-aligned training sample: a CSI window and the pseudo-mask of the
/// same video frame.
struct SyncedSample {
    int frame_index = 0;
    csi::CsiWindow window;
    mv::BinaryMask pseudo_mask;
    int motion_label = 0;
};

/// A g-frame pair of visual masks and wireless (predicted) masks.
/// label 0 = corresponding (frame indices match elementwise), 1 = forged.
struct ClipPair {
    std::vector<std::shared_ptr<const mv::BinaryMask>> visual;
    std::vector<std::shared_ptr<const mv::ProbMask>> wireless;
    int label = 0;
    int visual_start = 0;    // frame index of the first visual mask
    int wireless_start = 0;  // frame index of the first wireless mask
};

enum class SplitMode { random_frames, contiguous_blocks };

struct SplitSpec {
    double train_frac = 0.9;
    std::uint64_t seed = 0;
    SplitMode mode = SplitMode::random_frames;
};

// ---------------------------------------------------------------------------
// Motion-existence criterion: label 1 iff the mask's set fraction strictly
// exceeds eta, so an empty mask is always 0.
// ---------------------------------------------------------------------------

inline int motion_criterion(const mv::BinaryMask& mask, float eta = 0.0f) {
    if (!(eta >= 0.0f && eta < 1.0f))
        throw std::invalid_argument("motion_criterion: eta must be in [0, 1)");
    const double frac = static_cast<double>(mask.area()) /
                        (static_cast<double>(mask.width) * mask.height);
    return frac > eta ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Seeded splits
// ---------------------------------------------------------------------------

struct SplitIndices {
    std::vector<std::size_t> train, test;
};

inline SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
    if (!(spec.train_frac > 0.0 && spec.train_frac < 1.0))
        throw ConfigError("split: train_frac must be in (0, 1)");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (spec.mode == SplitMode::random_frames) {
        Rng rng(spec.seed);
        rng.shuffle(order);
    }
    const std::size_t n_train =
        static_cast<std::size_t>(std::llround(spec.train_frac * static_cast<double>(n)));
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + std::min(n_train, n));
    out.test.assign(order.begin() + std::min(n_train, n), order.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// ---------------------------------------------------------------------------
// Detector dataset: every frame, label = motion_criterion
// ---------------------------------------------------------------------------

struct DetectorItem {
    csi::CsiWindow window;
    int label = 0;
};

struct DetectorDataset {
    std::vector<DetectorItem> train, test;
};

inline DetectorDataset build_detector_dataset(std::span<const SyncedSample> samples,
                                              const SplitSpec& spec) {
    DetectorDataset ds;
    const SplitIndices idx = split_indices(samples.size(), spec);
    ds.train.reserve(idx.train.size());
    ds.test.reserve(idx.test.size());
    for (std::size_t i : idx.train)
        ds.train.push_back({samples[i].window, samples[i].motion_label});
    for (std::size_t i : idx.test)
        ds.test.push_back({samples[i].window, samples[i].motion_label});
    return ds;
}

// ---------------------------------------------------------------------------
// Segmentor dataset: moving frames only, target = pseudo-mask
// ---------------------------------------------------------------------------

struct SegmentorItem {
    csi::CsiWindow window;
    mv::BinaryMask target;
};

struct SegmentorDataset {
    std::vector<SegmentorItem> train, test;
};

inline SegmentorDataset build_segmentor_dataset(std::span<const SyncedSample> samples,
                                                const SplitSpec& spec) {
    std::vector<std::size_t> moving;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].motion_label == 1) moving.push_back(i);
    SegmentorDataset ds;
    const SplitIndices idx = split_indices(moving.size(), spec);
    ds.train.reserve(idx.train.size());
    ds.test.reserve(idx.test.size());
    for (std::size_t i : idx.train)
        ds.train.push_back({samples[moving[i]].window, samples[moving[i]].pseudo_mask});
    for (std::size_t i : idx.test)
        ds.test.push_back({samples[moving[i]].window, samples[moving[i]].pseudo_mask});
    return ds;
}

// ---------------------------------------------------------------------------
// Forgery dataset: sliding g-windows; a seeded fraction is mismatched by
// pairing the visual clip with a wireless clip at least min_offset away.
// ---------------------------------------------------------------------------

namespace detail {

/// Starts of g-long windows whose frame indices are consecutive (clips must
/// not straddle dropped frames).
inline std::vector<std::size_t> clip_starts(std::span<const int> frame_indices, int g) {
    std::vector<std::size_t> starts;
    if (static_cast<int>(frame_indices.size()) < g) return starts;
    for (std::size_t s = 0; s + static_cast<std::size_t>(g) <= frame_indices.size(); ++s) {
        bool consecutive = true;
        for (int j = 1; j < g; ++j) {
            if (frame_indices[s + static_cast<std::size_t>(j)] !=
                frame_indices[s] + j) {
                consecutive = false;
                break;
            }
        }
        if (consecutive) starts.push_back(s);
    }
    return starts;
}

}  // namespace detail

inline std::vector<ClipPair> build_forgery_dataset(
    std::span<const std::shared_ptr<const mv::BinaryMask>> visual,
    std::span<const std::shared_ptr<const mv::ProbMask>> wireless, int g, double forgery_frac,
    int min_offset, std::uint64_t seed) {
    if (g < 1) throw std::invalid_argument("build_forgery_dataset: g must be >= 1");
    if (!(forgery_frac > 0.0 && forgery_frac < 1.0))
        throw std::invalid_argument("build_forgery_dataset: forgery_frac must be in (0, 1)");
    if (min_offset < g)
        throw std::invalid_argument("build_forgery_dataset: min_offset must be >= g");
    if (visual.size() != wireless.size())
        throw ValidationError("build_forgery_dataset: modality lengths differ (" +
                              std::to_string(visual.size()) + " vs " +
                              std::to_string(wireless.size()) + ")");
    for (std::size_t i = 0; i < visual.size(); ++i)
        if (visual[i]->frame_index != wireless[i]->frame_index)
            throw ValidationError("build_forgery_dataset: modalities misaligned at position " +
                                  std::to_string(i));

    std::vector<int> indices(visual.size());
    for (std::size_t i = 0; i < visual.size(); ++i) indices[i] = visual[i]->frame_index;
    const std::vector<std::size_t> starts = detail::clip_starts(indices, g);
    if (starts.empty()) return {};

    Rng rng(seed);
    std::vector<std::size_t> order(starts.size());
    for (std::size_t i = 0; i < starts.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const std::size_t n_forged = static_cast<std::size_t>(
        std::llround(forgery_frac * static_cast<double>(starts.size())));
    std::vector<std::uint8_t> forged(starts.size(), 0);
    for (std::size_t i = 0; i < std::min(n_forged, starts.size()); ++i) forged[order[i]] = 1;

    std::vector<ClipPair> pairs;
    pairs.reserve(starts.size());
    for (std::size_t c = 0; c < starts.size(); ++c) {
        const std::size_t s = starts[c];
        ClipPair pair;
        pair.visual.assign(visual.begin() + static_cast<std::ptrdiff_t>(s),
                           visual.begin() + static_cast<std::ptrdiff_t>(s) + g);
        pair.visual_start = indices[s];

        std::size_t ws = s;
        if (forged[c]) {
            std::vector<std::size_t> options;
            for (std::size_t o : starts)
                if (std::abs(indices[o] - indices[s]) >= min_offset) options.push_back(o);
            if (options.empty())
                throw ValidationError(
                    "build_forgery_dataset: no wireless clip at offset >= " +
                    std::to_string(min_offset) + " from frame " + std::to_string(indices[s]) +
                    "; recording too short for the requested forgery offset");
            ws = options[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(options.size()) - 1))];
            pair.label = 1;
        }
        pair.wireless.assign(wireless.begin() + static_cast<std::ptrdiff_t>(ws),
                             wireless.begin() + static_cast<std::ptrdiff_t>(ws) + g);
        pair.wireless_start = indices[ws];
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Recording manifest (dataset directory bookkeeping)
// ---------------------------------------------------------------------------

struct RecordingManifest {
    int frame_count = 0;
    double fps = 7.5;
    int width = 128;
    int height = 96;
    int block_size = 16;
    int gop_length = 4;
    csi::CsiDims dims;
    std::uint64_t seed = 0;
    int persons = 0;
    std::vector<int> split;  // per-frame, 0 = train, 1 = test; empty until assigned
};

inline void write_manifest(const std::filesystem::path& path, const RecordingManifest& m) {
    nlohmann::json j;
    j["frame_count"] = m.frame_count;
    j["fps"] = m.fps;
    j["width"] = m.width;
    j["height"] = m.height;
    j["block_size"] = m.block_size;
    j["gop_length"] = m.gop_length;
    j["csi"] = {{"k", m.dims.subcarriers}, {"n_tx", m.dims.n_tx}, {"n_rx", m.dims.n_rx}};
    j["seed"] = m.seed;
    j["persons"] = m.persons;
    if (!m.split.empty()) j["split"] = m.split;
    io::write_file(path, j.dump(2) + "\n");
}

inline RecordingManifest parse_manifest(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    RecordingManifest m;
    try {
        m.frame_count = j.at("frame_count").get<int>();
        m.fps = j.at("fps").get<double>();
        m.width = j.at("width").get<int>();
        m.height = j.at("height").get<int>();
        m.block_size = j.at("block_size").get<int>();
        m.gop_length = j.at("gop_length").get<int>();
        m.dims.subcarriers = j.at("csi").at("k").get<int>();
        m.dims.n_tx = j.at("csi").at("n_tx").get<int>();
        m.dims.n_rx = j.at("csi").at("n_rx").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.persons = j.value("persons", 0);
        if (j.contains("split")) m.split = j.at("split").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return m;
}

}  // namespace csiguard::sync
