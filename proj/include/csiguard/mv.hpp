#pragma once

// Motion-vector pseudo-masks: sidecar parsing, GOP accumulation, 3x3
// Gaussian smoothing, amplitude+direction binarization, and morphological
// refinement into per-frame binary human-motion masks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "csiguard/common.hpp"

namespace csiguard::mv {

/// Block-wise motion vectors for one frame. Blocks are row-major over a
/// (height/block_size) x (width/block_size) grid; displacements in pixels.
struct MotionField {
    int frame_index = 0;
    int gop_index = 0;
    int width = 0;   // frame pixels
    int height = 0;  // frame pixels
    int block_size = 16;
    std::vector<float> dx, dy;  // blocks_y() * blocks_x()

    int blocks_x() const { return width / block_size; }
    int blocks_y() const { return height / block_size; }
};

/// Dense per-pixel 2-vector field, row-major.
struct VecField {
    int width = 0;
    int height = 0;
    std::vector<float> dx, dy;

    std::size_t idx(int y, int x) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x);
    }
};

/// GOP-summed motion upsampled to pixels, plus its smoothed copy.
struct AccumulatedField {
    int gop_index = 0;
    VecField raw;       // block replication of the per-block GOP sum
    VecField smoothed;  // 3x3 binomial smoothing of raw, per component
};

struct BinaryMask {
    int frame_index = 0;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> grid;  // 0 or 1, row-major

    std::size_t idx(int y, int x) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x);
    }
    std::int64_t area() const {
        std::int64_t n = 0;
        for (std::uint8_t b : grid) n += b;
        return n;
    }
};

/// Soft mask with per-pixel values in [0,1] (e.g. a sigmoid output).
struct ProbMask {
    int frame_index = 0;
    int width = 0;
    int height = 0;
    std::vector<float> values;  // row-major

    std::size_t idx(int y, int x) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x);
    }
};

struct MaskParams {
    float lambda = 1.0f;        // weight of the direction-agreement term
    float tau = 0.5f;           // binarization threshold
    float min_area_frac = 0.001f;
};

inline constexpr float kVecEps = 1e-8f;  // below this a vector has no direction

// ---------------------------------------------------------------------------
// MVS1 sidecar format
//
//   magic "MVS1"
//   u32 frame_width, u32 frame_height, u32 block_size, u32 gop_length
//   u64 frame_count
//   per frame: u32 frame_index, u32 gop_index,
//              (H/bs)*(W/bs) f32 pairs (dx, dy) row-major
// ---------------------------------------------------------------------------

inline constexpr char kMvMagic[4] = {'M', 'V', 'S', '1'};

inline void write_mv_sidecar(const std::filesystem::path& path,
                             std::span<const MotionField> fields, int gop_length) {
    std::string out;
    out.append(kMvMagic, 4);
    const MotionField ref = fields.empty() ? MotionField{} : fields.front();
    io::put_u32(out, static_cast<std::uint32_t>(ref.width));
    io::put_u32(out, static_cast<std::uint32_t>(ref.height));
    io::put_u32(out, static_cast<std::uint32_t>(ref.block_size));
    io::put_u32(out, static_cast<std::uint32_t>(gop_length));
    io::put_u64(out, fields.size());
    for (const MotionField& f : fields) {
        if (f.width != ref.width || f.height != ref.height || f.block_size != ref.block_size)
            throw DimensionError("write_mv_sidecar: fields disagree on frame geometry");
        io::put_u32(out, static_cast<std::uint32_t>(f.frame_index));
        io::put_u32(out, static_cast<std::uint32_t>(f.gop_index));
        const std::size_t blocks = f.dx.size();
        for (std::size_t b = 0; b < blocks; ++b) {
            io::put_f32(out, f.dx[b]);
            io::put_f32(out, f.dy[b]);
        }
    }
    io::write_file(path, out);
}

struct MvSidecar {
    int width = 0;
    int height = 0;
    int block_size = 0;
    int gop_length = 0;
    std::vector<MotionField> fields;
};

inline MvSidecar parse_mv_sidecar(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    io::Reader r(bytes, path.string());
    if (r.raw(4) != std::string(kMvMagic, 4))
        throw ParseError(path.string() + ": bad magic, expected MVS1");
    MvSidecar sc;
    sc.width = static_cast<int>(r.u32());
    sc.height = static_cast<int>(r.u32());
    sc.block_size = static_cast<int>(r.u32());
    sc.gop_length = static_cast<int>(r.u32());
    const std::uint64_t count = r.u64();
    if (sc.width < 1 || sc.height < 1 || sc.block_size < 1 || sc.gop_length < 1)
        throw DimensionError(path.string() + ": non-positive geometry in header");
    if (sc.width % sc.block_size != 0 || sc.height % sc.block_size != 0)
        throw DimensionError(path.string() + ": frame " + std::to_string(sc.width) + "x" +
                             std::to_string(sc.height) + " is not a multiple of block_size " +
                             std::to_string(sc.block_size));
    const std::size_t blocks = static_cast<std::size_t>(sc.width / sc.block_size) *
                               static_cast<std::size_t>(sc.height / sc.block_size);
    sc.fields.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        MotionField f;
        f.width = sc.width;
        f.height = sc.height;
        f.block_size = sc.block_size;
        f.frame_index = static_cast<int>(r.u32());
        f.gop_index = static_cast<int>(r.u32());
        f.dx.resize(blocks);
        f.dy.resize(blocks);
        for (std::size_t b = 0; b < blocks; ++b) {
            f.dx[b] = r.f32();
            f.dy[b] = r.f32();
        }
        if (!sc.fields.empty()) {
            if (f.frame_index <= sc.fields.back().frame_index)
                throw OrderingError(path.string() + ": non-increasing frame_index at record " +
                                    std::to_string(i));
            if (f.gop_index < sc.fields.back().gop_index)
                throw OrderingError(path.string() + ": decreasing gop_index at record " +
                                    std::to_string(i));
        }
        sc.fields.push_back(std::move(f));
    }
    if (!r.eof())
        throw ParseError(path.string() + ": " + std::to_string(r.remaining()) +
                         " trailing bytes after declared frame count");
    return sc;
}

// ---------------------------------------------------------------------------
// GOP accumulation and smoothing
// ---------------------------------------------------------------------------

/// 3x3 binomial smoothing ([1,2,1] x [1,2,1] / 16) with mirrored borders.
inline VecField smooth_3x3(const VecField& in) {
    VecField out;
    out.width = in.width;
    out.height = in.height;
    out.dx.assign(in.dx.size(), 0.0f);
    out.dy.assign(in.dy.size(), 0.0f);
    static constexpr float w1[3] = {1.0f, 2.0f, 1.0f};
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            float sx = 0.0f, sy = 0.0f;
            for (int ky = -1; ky <= 1; ++ky) {
                const int yy = std::clamp(y + ky, 0, in.height - 1);
                for (int kx = -1; kx <= 1; ++kx) {
                    const int xx = std::clamp(x + kx, 0, in.width - 1);
                    const float w = w1[ky + 1] * w1[kx + 1];
                    sx += w * in.dx[in.idx(yy, xx)];
                    sy += w * in.dy[in.idx(yy, xx)];
                }
            }
            out.dx[out.idx(y, x)] = sx / 16.0f;
            out.dy[out.idx(y, x)] = sy / 16.0f;
        }
    }
    return out;
}

/// Sum the block displacements of one GOP, replicate each block over its
/// pixels, and attach the smoothed copy.
inline AccumulatedField accumulate_gop(std::span<const MotionField> fields) {
    if (fields.empty()) throw ValidationError("accumulate_gop: empty GOP");
    const MotionField& ref = fields.front();
    for (const MotionField& f : fields) {
        if (f.gop_index != ref.gop_index)
            throw ValidationError("accumulate_gop: mixed gop_index " +
                                  std::to_string(f.gop_index) + " vs " +
                                  std::to_string(ref.gop_index));
        if (f.width != ref.width || f.height != ref.height || f.block_size != ref.block_size)
            throw DimensionError("accumulate_gop: fields disagree on frame geometry");
    }
    const int bx = ref.blocks_x();
    const int by = ref.blocks_y();
    std::vector<float> sum_dx(static_cast<std::size_t>(bx) * by, 0.0f);
    std::vector<float> sum_dy(static_cast<std::size_t>(bx) * by, 0.0f);
    for (const MotionField& f : fields) {
        for (std::size_t b = 0; b < sum_dx.size(); ++b) {
            sum_dx[b] += f.dx[b];
            sum_dy[b] += f.dy[b];
        }
    }

    AccumulatedField acc;
    acc.gop_index = ref.gop_index;
    acc.raw.width = ref.width;
    acc.raw.height = ref.height;
    acc.raw.dx.resize(static_cast<std::size_t>(ref.width) * ref.height);
    acc.raw.dy.resize(acc.raw.dx.size());
    for (int y = 0; y < ref.height; ++y) {
        const int iby = y / ref.block_size;
        for (int x = 0; x < ref.width; ++x) {
            const int ibx = x / ref.block_size;
            const std::size_t b = static_cast<std::size_t>(iby) * bx + ibx;
            acc.raw.dx[acc.raw.idx(y, x)] = sum_dx[b];
            acc.raw.dy[acc.raw.idx(y, x)] = sum_dy[b];
        }
    }
    acc.smoothed = smooth_3x3(acc.raw);
    return acc;
}

// ---------------------------------------------------------------------------
// Binarization: per pixel, score = |raw| + lambda * cos(angle between the
// smoothed and raw vectors); mask = score >= tau. A vector shorter than
// kVecEps has no usable direction (cosine term drops to 0), and zero raw
// motion can never fire the mask.
// ---------------------------------------------------------------------------

inline BinaryMask binarize(const AccumulatedField& acc, float lambda, float tau) {
    if (!std::isfinite(lambda) || !std::isfinite(tau))
        throw std::invalid_argument("binarize: lambda and tau must be finite");
    BinaryMask mask;
    mask.width = acc.raw.width;
    mask.height = acc.raw.height;
    mask.grid.assign(acc.raw.dx.size(), 0);
    for (std::size_t i = 0; i < acc.raw.dx.size(); ++i) {
        const float rx = acc.raw.dx[i], ry = acc.raw.dy[i];
        const float sx = acc.smoothed.dx[i], sy = acc.smoothed.dy[i];
        const float rn = std::hypot(rx, ry);
        if (rn == 0.0f) continue;
        const float sn = std::hypot(sx, sy);
        float cosine = 0.0f;
        if (rn >= kVecEps && sn >= kVecEps) cosine = (rx * sx + ry * sy) / (rn * sn);
        const float score = rn + lambda * cosine;
        mask.grid[i] = score >= tau ? 1 : 0;
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Morphological refinement
// ---------------------------------------------------------------------------

namespace detail {

/// 3x3 majority vote with mirrored borders.
inline BinaryMask median_3x3(const BinaryMask& in) {
    BinaryMask out = in;
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            int ones = 0;
            for (int ky = -1; ky <= 1; ++ky) {
                const int yy = std::clamp(y + ky, 0, in.height - 1);
                for (int kx = -1; kx <= 1; ++kx) {
                    const int xx = std::clamp(x + kx, 0, in.width - 1);
                    ones += in.grid[in.idx(yy, xx)];
                }
            }
            out.grid[out.idx(y, x)] = ones >= 5 ? 1 : 0;
        }
    }
    return out;
}

/// 3x3 square dilation; pixels beyond the border are background.
inline BinaryMask dilate_3x3(const BinaryMask& in) {
    BinaryMask out = in;
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            std::uint8_t v = 0;
            for (int ky = -1; ky <= 1 && !v; ++ky) {
                const int yy = y + ky;
                if (yy < 0 || yy >= in.height) continue;
                for (int kx = -1; kx <= 1; ++kx) {
                    const int xx = x + kx;
                    if (xx < 0 || xx >= in.width) continue;
                    if (in.grid[in.idx(yy, xx)]) {
                        v = 1;
                        break;
                    }
                }
            }
            out.grid[out.idx(y, x)] = v;
        }
    }
    return out;
}

/// 3x3 square erosion; out-of-bounds neighbors do not constrain, so shapes
/// touching the image border are not eaten from that side.
inline BinaryMask erode_3x3(const BinaryMask& in) {
    BinaryMask out = in;
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            std::uint8_t v = 1;
            for (int ky = -1; ky <= 1 && v; ++ky) {
                const int yy = y + ky;
                if (yy < 0 || yy >= in.height) continue;
                for (int kx = -1; kx <= 1; ++kx) {
                    const int xx = x + kx;
                    if (xx < 0 || xx >= in.width) continue;
                    if (!in.grid[in.idx(yy, xx)]) {
                        v = 0;
                        break;
                    }
                }
            }
            out.grid[out.idx(y, x)] = v;
        }
    }
    return out;
}

/// Clear 4-connected components with fewer than min_area pixels.
inline void remove_small_components(BinaryMask& mask, std::int64_t min_area) {
    if (min_area <= 1) return;
    std::vector<std::uint8_t> seen(mask.grid.size(), 0);
    std::vector<std::size_t> stack, component;
    for (std::size_t start = 0; start < mask.grid.size(); ++start) {
        if (!mask.grid[start] || seen[start]) continue;
        stack.assign(1, start);
        component.clear();
        seen[start] = 1;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            component.push_back(p);
            const int y = static_cast<int>(p / static_cast<std::size_t>(mask.width));
            const int x = static_cast<int>(p % static_cast<std::size_t>(mask.width));
            const int ny[4] = {y - 1, y + 1, y, y};
            const int nx[4] = {x, x, x - 1, x + 1};
            for (int k = 0; k < 4; ++k) {
                if (ny[k] < 0 || ny[k] >= mask.height || nx[k] < 0 || nx[k] >= mask.width)
                    continue;
                const std::size_t q = mask.idx(ny[k], nx[k]);
                if (mask.grid[q] && !seen[q]) {
                    seen[q] = 1;
                    stack.push_back(q);
                }
            }
        }
        if (static_cast<std::int64_t>(component.size()) < min_area)
            for (std::size_t p : component) mask.grid[p] = 0;
    }
}

}  // namespace detail

/// median -> closing -> opening -> drop small 4-connected components.
inline BinaryMask refine(const BinaryMask& mask, float min_area_frac) {
    if (!(min_area_frac >= 0.0f && min_area_frac < 1.0f))
        throw std::invalid_argument("refine: min_area_frac must be in [0, 1)");
    BinaryMask m = detail::median_3x3(mask);
    m = detail::erode_3x3(detail::dilate_3x3(m));  // closing
    m = detail::dilate_3x3(detail::erode_3x3(m));  // opening
    const std::int64_t min_area = static_cast<std::int64_t>(
        std::ceil(static_cast<double>(min_area_frac) * mask.width * mask.height));
    detail::remove_small_components(m, min_area);
    return m;
}

// ---------------------------------------------------------------------------
// Whole-video driver: one refined mask per GOP, replicated to its frames.
// ---------------------------------------------------------------------------

inline std::vector<BinaryMask> masks_for_video(std::span<const MotionField> fields,
                                               const MaskParams& params = {}) {
    std::vector<BinaryMask> masks;
    std::size_t lo = 0;
    while (lo < fields.size()) {
        std::size_t hi = lo + 1;
        while (hi < fields.size() && fields[hi].gop_index == fields[lo].gop_index) ++hi;
        const AccumulatedField acc = accumulate_gop(fields.subspan(lo, hi - lo));
        const BinaryMask gop_mask = refine(binarize(acc, params.lambda, params.tau),
                                           params.min_area_frac);
        for (std::size_t f = lo; f < hi; ++f) {
            BinaryMask m = gop_mask;
            m.frame_index = fields[f].frame_index;
            masks.push_back(std::move(m));
        }
        lo = hi;
    }
    return masks;
}

// ---------------------------------------------------------------------------
// PGM (P5) mask files, 0 for background and 255 for foreground
// ---------------------------------------------------------------------------

inline void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
    std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) +
                      "\n255\n";
    out.reserve(out.size() + mask.grid.size());
    for (std::uint8_t b : mask.grid) out.push_back(b ? static_cast<char>(255) : '\0');
    io::write_file(path, out);
}

inline BinaryMask parse_mask_pgm(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    std::size_t pos = 0;
    auto token = [&]() -> std::string {
        while (pos < bytes.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (start == pos) throw ParseError(path.string() + ": truncated PGM header");
        return bytes.substr(start, pos - start);
    };
    if (token() != "P5") throw ParseError(path.string() + ": not a P5 PGM file");
    BinaryMask mask;
    try {
        mask.width = std::stoi(token());
        mask.height = std::stoi(token());
        const int maxval = std::stoi(token());
        if (maxval != 255) throw ParseError(path.string() + ": PGM maxval must be 255");
    } catch (const std::logic_error&) {
        throw ParseError(path.string() + ": malformed PGM header");
    }
    if (mask.width < 1 || mask.height < 1)
        throw DimensionError(path.string() + ": non-positive PGM dimensions");
    ++pos;  // single whitespace byte after maxval
    const std::size_t n = static_cast<std::size_t>(mask.width) * mask.height;
    if (bytes.size() - pos != n)
        throw ParseError(path.string() + ": expected " + std::to_string(n) + " pixels, got " +
                         std::to_string(bytes.size() - pos));
    mask.grid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char v = static_cast<unsigned char>(bytes[pos + i]);
        if (v != 0 && v != 255)
            throw ParseError(path.string() + ": pixel value " + std::to_string(int(v)) +
                             " is neither 0 nor 255");
        mask.grid[i] = v ? 1 : 0;
    }
    return mask;
}

}  // namespace csiguard::mv
