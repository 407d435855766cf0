#pragma once

// Deterministic synthetic recordings: elliptical actors on piecewise-linear
// trajectories, block motion vectors derived from actual pixel displacement,
// ground-truth masks, and a CSI amplitude model whose per-antenna-pair
// response encodes actor position (Gaussian bump over the subcarrier axis)
// and speed (bump height). Intentionally non-physical; it exists so the
// learning tasks are solvable and testable on a desktop.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "csiguard/common.hpp"
#include "csiguard/csi.hpp"
#include "csiguard/mv.hpp"
#include "csiguard/sync.hpp"

namespace csiguard::synthgen {

struct Actor {
    float rx = 20.0f;  // ellipse semi-axes, pixels
    float ry = 24.0f;
    float speed = 1.5f;  // px per frame along the path
    std::vector<std::pair<float, float>> waypoints;  // pixel centers, visited in order
};

struct SceneSpec {
    int width = 128;
    int height = 96;
    double fps = 7.5;
    int frames = 400;
    int gop_length = 4;
    int block_size = 16;
    int persons = 1;  // kept in the manifest; actors carries the geometry
    std::uint64_t seed = 0;
    std::vector<Actor> actors;
};

struct CsiModel {
    csi::CsiDims dims;
    float baseline = 1.0f;
    float bump_gain = 2.0f;     // bump height = bump_gain * actor speed (px/frame)
    float bump_sigma = 3.0f;    // bump width in subcarrier indices
    float noise_sigma = 0.05f;
    float outlier_rate = 0.002f;  // per record entry
    float outlier_mag = 10.0f;
};

struct ForgeryAnnotation {
    std::string mode;  // "shift" | "splice" | "none"
    int offset = 0;
    int begin_frame = 0;  // forged interval [begin, end)
    int end_frame = 0;
};

struct Recording {
    SceneSpec scene;
    CsiModel model;
    double csi_rate_hz = 37.5;
    std::vector<csi::CsiRecord> records;
    std::vector<mv::MotionField> fields;     // one per frame
    std::vector<mv::BinaryMask> gt_masks;    // one per frame
    std::vector<std::int64_t> frame_times_us;
    ForgeryAnnotation forgery{"none", 0, 0, 0};
};

// ---------------------------------------------------------------------------
// Trajectories: constant speed along the waypoint polyline, ping-pong
// reflection at the ends.
// ---------------------------------------------------------------------------

inline std::pair<float, float> actor_position(const Actor& actor, double frame_time) {
    if (actor.waypoints.empty())
        throw ValidationError("actor_position: actor has no waypoints");
    if (actor.waypoints.size() == 1 || actor.speed <= 0.0f) return actor.waypoints.front();
    std::vector<double> cum{0.0};
    for (std::size_t i = 1; i < actor.waypoints.size(); ++i) {
        const double dx = actor.waypoints[i].first - actor.waypoints[i - 1].first;
        const double dy = actor.waypoints[i].second - actor.waypoints[i - 1].second;
        cum.push_back(cum.back() + std::hypot(dx, dy));
    }
    const double total = cum.back();
    if (total <= 0.0) return actor.waypoints.front();
    double s = std::fmod(static_cast<double>(actor.speed) * frame_time, 2.0 * total);
    if (s < 0.0) s += 2.0 * total;
    if (s > total) s = 2.0 * total - s;
    std::size_t seg = 1;
    while (seg < cum.size() - 1 && cum[seg] < s) ++seg;
    const double span = cum[seg] - cum[seg - 1];
    const double u = span > 0.0 ? (s - cum[seg - 1]) / span : 0.0;
    const auto& a = actor.waypoints[seg - 1];
    const auto& b = actor.waypoints[seg];
    return {static_cast<float>(a.first + u * (b.first - a.first)),
            static_cast<float>(a.second + u * (b.second - a.second))};
}

namespace detail {

inline bool inside_ellipse(float px, float py, float cx, float cy, float rx, float ry) {
    const float nx = (px - cx) / rx;
    const float ny = (py - cy) / ry;
    return nx * nx + ny * ny <= 1.0f;
}

inline void validate_scene(const SceneSpec& scene) {
    if (scene.width % scene.block_size != 0 || scene.height % scene.block_size != 0)
        throw ConfigError("scene: frame size must be a multiple of block_size");
    if (scene.frames < 1 || scene.fps <= 0.0) throw ConfigError("scene: frames/fps invalid");
    for (const Actor& a : scene.actors) {
        for (const auto& [wx, wy] : a.waypoints) {
            if (wx - a.rx < 0.0f || wx + a.rx > static_cast<float>(scene.width - 1) ||
                wy - a.ry < 0.0f || wy + a.ry > static_cast<float>(scene.height - 1))
                throw ConfigError("scene: trajectory leaves the frame (waypoint " +
                                  std::to_string(wx) + "," + std::to_string(wy) + ")");
        }
    }
}

}  // namespace detail

/// Rasterized union of the actors at one instant.
inline mv::BinaryMask rasterize(const SceneSpec& scene, double frame_time, int frame_index) {
    mv::BinaryMask mask;
    mask.frame_index = frame_index;
    mask.width = scene.width;
    mask.height = scene.height;
    mask.grid.assign(static_cast<std::size_t>(scene.width) * scene.height, 0);
    for (const Actor& actor : scene.actors) {
        const auto [cx, cy] = actor_position(actor, frame_time);
        const int y0 = std::max(0, static_cast<int>(std::floor(cy - actor.ry)));
        const int y1 = std::min(scene.height - 1, static_cast<int>(std::ceil(cy + actor.ry)));
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - actor.rx)));
        const int x1 = std::min(scene.width - 1, static_cast<int>(std::ceil(cx + actor.rx)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (detail::inside_ellipse(static_cast<float>(x), static_cast<float>(y), cx, cy,
                                           actor.rx, actor.ry))
                    mask.grid[mask.idx(y, x)] = 1;
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Per-block mean displacement of actor-covered pixels between frames
/// f-1 and f; frame 0 gets a zero field.
inline mv::MotionField motion_field(const SceneSpec& scene, int f) {
    mv::MotionField field;
    field.frame_index = f;
    field.gop_index = f / scene.gop_length;
    field.width = scene.width;
    field.height = scene.height;
    field.block_size = scene.block_size;
    const int bx = field.blocks_x(), by = field.blocks_y();
    field.dx.assign(static_cast<std::size_t>(bx) * by, 0.0f);
    field.dy.assign(field.dx.size(), 0.0f);
    if (f == 0) return field;

    std::vector<double> sum_dx(field.dx.size(), 0.0), sum_dy(field.dx.size(), 0.0);
    std::vector<int> count(field.dx.size(), 0);
    std::vector<std::uint8_t> taken(static_cast<std::size_t>(scene.width) * scene.height, 0);
    for (const Actor& actor : scene.actors) {
        const auto [cx, cy] = actor_position(actor, static_cast<double>(f));
        const auto [px, py] = actor_position(actor, static_cast<double>(f - 1));
        const float dx = cx - px, dy = cy - py;
        const int y0 = std::max(0, static_cast<int>(std::floor(cy - actor.ry)));
        const int y1 = std::min(scene.height - 1, static_cast<int>(std::ceil(cy + actor.ry)));
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - actor.rx)));
        const int x1 = std::min(scene.width - 1, static_cast<int>(std::ceil(cx + actor.rx)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const std::size_t p =
                    static_cast<std::size_t>(y) * scene.width + static_cast<std::size_t>(x);
                if (taken[p]) continue;
                if (!detail::inside_ellipse(static_cast<float>(x), static_cast<float>(y), cx, cy,
                                            actor.rx, actor.ry))
                    continue;
                taken[p] = 1;
                const std::size_t b = static_cast<std::size_t>(y / scene.block_size) * bx +
                                      static_cast<std::size_t>(x / scene.block_size);
                sum_dx[b] += dx;
                sum_dy[b] += dy;
                ++count[b];
            }
        }
    }
    for (std::size_t b = 0; b < field.dx.size(); ++b) {
        if (count[b] == 0) continue;
        field.dx[b] = static_cast<float>(sum_dx[b] / count[b]);
        field.dy[b] = static_cast<float>(sum_dy[b] / count[b]);
    }
    return field;
}

inline Recording simulate(const SceneSpec& scene, const CsiModel& model, double csi_rate_hz) {
    detail::validate_scene(scene);
    if (!(csi_rate_hz > 0.0)) throw ConfigError("simulate: csi_rate_hz must be positive");
    Recording rec;
    rec.scene = scene;
    rec.model = model;
    rec.csi_rate_hz = csi_rate_hz;

    rec.frame_times_us.resize(static_cast<std::size_t>(scene.frames));
    for (int f = 0; f < scene.frames; ++f)
        rec.frame_times_us[static_cast<std::size_t>(f)] =
            static_cast<std::int64_t>(std::llround(f * 1e6 / scene.fps));

    rec.fields.reserve(static_cast<std::size_t>(scene.frames));
    rec.gt_masks.reserve(static_cast<std::size_t>(scene.frames));
    for (int f = 0; f < scene.frames; ++f) {
        rec.fields.push_back(motion_field(scene, f));
        rec.gt_masks.push_back(rasterize(scene, static_cast<double>(f), f));
    }

    // Noise stream is independent of the scene geometry so that two scenes
    // with the same seed but different actors still differ only where the
    // actors say they should.
    Rng noise_rng(scene.seed ^ 0x9e3779b97f4a7c15ULL);
    const double duration_s = scene.frames / scene.fps;
    const auto n_records = static_cast<std::int64_t>(std::floor(duration_s * csi_rate_hz));
    const int entries = model.dims.entries();
    const int pairs = model.dims.n_tx * model.dims.n_rx;
    const int k_count = model.dims.subcarriers;
    rec.records.reserve(static_cast<std::size_t>(n_records));
    for (std::int64_t i = 0; i < n_records; ++i) {
        csi::CsiRecord r;
        r.dims = model.dims;
        r.timestamp_us = static_cast<std::int64_t>(std::llround(i * 1e6 / csi_rate_hz));
        r.values.resize(static_cast<std::size_t>(entries));
        const double frame_time = (static_cast<double>(i) / csi_rate_hz) * scene.fps;

        // Per-pair bump centers from the actor positions.
        std::vector<float> amp(static_cast<std::size_t>(entries), model.baseline);
        for (const Actor& actor : scene.actors) {
            const auto [ax, ay] = actor_position(actor, frame_time);
            const float u = ax / static_cast<float>(scene.width - 1) - 0.5f;
            const float v = ay / static_cast<float>(scene.height - 1) - 0.5f;
            const float height = model.bump_gain * actor.speed;
            for (int p = 0; p < pairs; ++p) {
                const float theta = 2.0f * std::numbers::pi_v<float> * static_cast<float>(p) /
                                    static_cast<float>(pairs);
                float c = 0.5f + u * std::cos(theta) + v * std::sin(theta);
                c = std::clamp(c, 0.0f, 1.0f);
                const float mu = c * static_cast<float>(k_count - 1);
                for (int k = 0; k < k_count; ++k) {
                    const float d = (static_cast<float>(k) - mu) / model.bump_sigma;
                    amp[static_cast<std::size_t>(k) * pairs + p] +=
                        height * std::exp(-0.5f * d * d);
                }
            }
        }
        for (int e = 0; e < entries; ++e) {
            float a = amp[static_cast<std::size_t>(e)] +
                      static_cast<float>(noise_rng.normal(0.0, model.noise_sigma));
            if (model.outlier_rate > 0.0f && noise_rng.uniform() < model.outlier_rate)
                a += (noise_rng.uniform() < 0.5 ? -1.0f : 1.0f) * model.outlier_mag;
            const float phi =
                static_cast<float>(noise_rng.uniform(0.0, 2.0 * std::numbers::pi));
            r.values[static_cast<std::size_t>(e)] = {a * std::cos(phi), a * std::sin(phi)};
        }
        rec.records.push_back(std::move(r));
    }
    return rec;
}

/// Default scene geometry: `persons` elliptical actors with seeded waypoint
/// routes well inside the frame.
inline SceneSpec make_scene(int persons, int frames, std::uint64_t seed, int width = 128,
                            int height = 96) {
    if (persons < 0 || persons > 3)
        throw ConfigError("make_scene: persons must be in [0, 3]");
    SceneSpec scene;
    scene.width = width;
    scene.height = height;
    scene.frames = frames;
    scene.persons = persons;
    scene.seed = seed;
    Rng rng(seed);
    for (int a = 0; a < persons; ++a) {
        Actor actor;
        actor.rx = static_cast<float>(rng.uniform(17.0, 21.0));
        actor.ry = static_cast<float>(rng.uniform(21.0, 26.0));
        actor.speed = static_cast<float>(rng.uniform(1.2, 1.9));
        const double mx = actor.rx + 2.0, my = actor.ry + 2.0;
        const int n_points = static_cast<int>(rng.uniform_int(3, 5));
        for (int p = 0; p < n_points; ++p)
            actor.waypoints.emplace_back(
                static_cast<float>(rng.uniform(mx, width - 1 - mx)),
                static_cast<float>(rng.uniform(my, height - 1 - my)));
        scene.actors.push_back(std::move(actor));
    }
    return scene;
}

// ---------------------------------------------------------------------------
// Forgery synthesis: shift or splice the visual side; CSI is untouched.
// ---------------------------------------------------------------------------

inline Recording forge_shift(const Recording& rec, int offset_frames, int min_offset) {
    if (offset_frames < min_offset)
        throw std::invalid_argument("forge_shift: offset " + std::to_string(offset_frames) +
                                    " below required minimum " + std::to_string(min_offset));
    if (offset_frames >= rec.scene.frames)
        throw std::invalid_argument("forge_shift: offset exceeds recording length");
    Recording out = rec;
    for (int f = offset_frames; f < rec.scene.frames; ++f) {
        const std::size_t src = static_cast<std::size_t>(f - offset_frames);
        out.fields[static_cast<std::size_t>(f)] = rec.fields[src];
        out.fields[static_cast<std::size_t>(f)].frame_index = f;
        out.fields[static_cast<std::size_t>(f)].gop_index = f / rec.scene.gop_length;
        out.gt_masks[static_cast<std::size_t>(f)] = rec.gt_masks[src];
        out.gt_masks[static_cast<std::size_t>(f)].frame_index = f;
    }
    out.forgery = {"shift", offset_frames, offset_frames, rec.scene.frames};
    return out;
}

inline Recording forge_splice(const Recording& rec, const Recording& donor, int begin_frame,
                              int end_frame) {
    if (begin_frame < 0 || end_frame <= begin_frame || end_frame > rec.scene.frames ||
        end_frame > donor.scene.frames)
        throw std::invalid_argument("forge_splice: invalid interval");
    if (rec.scene.width != donor.scene.width || rec.scene.height != donor.scene.height)
        throw DimensionError("forge_splice: recordings disagree on frame size");
    Recording out = rec;
    for (int f = begin_frame; f < end_frame; ++f) {
        out.fields[static_cast<std::size_t>(f)] = donor.fields[static_cast<std::size_t>(f)];
        out.fields[static_cast<std::size_t>(f)].frame_index = f;
        out.fields[static_cast<std::size_t>(f)].gop_index = f / rec.scene.gop_length;
        out.gt_masks[static_cast<std::size_t>(f)] = donor.gt_masks[static_cast<std::size_t>(f)];
        out.gt_masks[static_cast<std::size_t>(f)].frame_index = f;
    }
    out.forgery = {"splice", 0, begin_frame, end_frame};
    return out;
}

// ---------------------------------------------------------------------------
// Recording directory I/O (layout per the dataset contract: csi.bin, mv.bin,
// gt_masks/%06d.pgm, manifest.json)
// ---------------------------------------------------------------------------

inline void write_recording(const std::filesystem::path& dir, const Recording& rec) {
    std::filesystem::create_directories(dir / "gt_masks");
    csi::write_csi_stream(dir / "csi.bin", rec.records);
    mv::write_mv_sidecar(dir / "mv.bin", rec.fields, rec.scene.gop_length);
    char name[32];
    for (const mv::BinaryMask& mask : rec.gt_masks) {
        std::snprintf(name, sizeof name, "%06d.pgm", mask.frame_index);
        mv::write_mask_pgm(dir / "gt_masks" / name, mask);
    }
    sync::RecordingManifest manifest;
    manifest.frame_count = rec.scene.frames;
    manifest.fps = rec.scene.fps;
    manifest.width = rec.scene.width;
    manifest.height = rec.scene.height;
    manifest.block_size = rec.scene.block_size;
    manifest.gop_length = rec.scene.gop_length;
    manifest.dims = rec.model.dims;
    manifest.seed = rec.scene.seed;
    manifest.persons = rec.scene.persons;
    sync::write_manifest(dir / "manifest.json", manifest);
    if (rec.forgery.mode != "none") {
        nlohmann::json j{{"mode", rec.forgery.mode},
                         {"offset", rec.forgery.offset},
                         {"begin_frame", rec.forgery.begin_frame},
                         {"end_frame", rec.forgery.end_frame}};
        io::write_file(dir / "forgery.json", j.dump(2) + "\n");
    }
}

}  // namespace csiguard::synthgen
