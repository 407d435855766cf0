#pragma once

// CSI stream ingestion: record parsing (binary "CSI1" and JSON-lines mirror),
// amplitude extraction, Hampel outlier removal, and per-video-frame
// windowing/concatenation of measurements.

#include <algorithm>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "csiguard/common.hpp"

namespace csiguard::csi {

struct CsiDims {
    int subcarriers = 30;  // K
    int n_tx = 3;
    int n_rx = 3;

    int entries() const { return subcarriers * n_tx * n_rx; }
    bool operator==(const CsiDims&) const = default;
};

/// One timestamped complex channel snapshot, subcarrier-major then tx then rx.
struct CsiRecord {
    std::int64_t timestamp_us = 0;
    CsiDims dims;
    std::vector<std::complex<float>> values;  // dims.entries()
};

struct AmplitudeRecord {
    std::int64_t timestamp_us = 0;
    CsiDims dims;
    std::vector<float> amps;  // dims.entries(), non-negative
};

/// m consecutive amplitude records concatenated along the subcarrier axis.
struct CsiWindow {
    int frame_index = 0;
    int subcarriers = 0;  // m * K
    int n_tx = 0;
    int n_rx = 0;
    std::vector<float> amps;  // subcarriers x n_tx x n_rx

    int entries() const { return subcarriers * n_tx * n_rx; }
};

// ---------------------------------------------------------------------------
// CSI1 binary stream format
//
//   magic "CSI1"
//   u32 K, u32 N_tx, u32 N_rx, u64 record_count
//   per record: u64 timestamp_us, then K*N_tx*N_rx f32 pairs (re, im)
// ---------------------------------------------------------------------------

inline constexpr char kCsiMagic[4] = {'C', 'S', 'I', '1'};

inline void write_csi_stream(const std::filesystem::path& path,
                             std::span<const CsiRecord> records) {
    std::string out;
    out.append(kCsiMagic, 4);
    const CsiDims dims = records.empty() ? CsiDims{} : records.front().dims;
    io::put_u32(out, static_cast<std::uint32_t>(dims.subcarriers));
    io::put_u32(out, static_cast<std::uint32_t>(dims.n_tx));
    io::put_u32(out, static_cast<std::uint32_t>(dims.n_rx));
    io::put_u64(out, records.size());
    for (const CsiRecord& rec : records) {
        if (!(rec.dims == dims))
            throw DimensionError("write_csi_stream: records disagree on dimensions");
        io::put_u64(out, static_cast<std::uint64_t>(rec.timestamp_us));
        for (const auto& z : rec.values) {
            io::put_f32(out, z.real());
            io::put_f32(out, z.imag());
        }
    }
    io::write_file(path, out);
}

inline std::vector<CsiRecord> parse_csi_stream(const std::filesystem::path& path,
                                               std::optional<CsiDims> expected = {}) {
    const std::string bytes = io::read_file(path);
    if (bytes.empty()) return {};
    io::Reader r(bytes, path.string());
    if (r.raw(4) != std::string(kCsiMagic, 4))
        throw ParseError(path.string() + ": bad magic, expected CSI1");
    CsiDims dims;
    dims.subcarriers = static_cast<int>(r.u32());
    dims.n_tx = static_cast<int>(r.u32());
    dims.n_rx = static_cast<int>(r.u32());
    const std::uint64_t count = r.u64();
    if (dims.subcarriers < 1 || dims.n_tx < 1 || dims.n_rx < 1)
        throw DimensionError(path.string() + ": non-positive CSI dimensions in header");
    if (expected && !(dims == *expected))
        throw DimensionError(path.string() + ": header dims (" + std::to_string(dims.subcarriers) +
                             "," + std::to_string(dims.n_tx) + "," + std::to_string(dims.n_rx) +
                             ") do not match expected dims");

    std::vector<CsiRecord> records;
    records.reserve(count);
    const int entries = dims.entries();
    for (std::uint64_t i = 0; i < count; ++i) {
        CsiRecord rec;
        rec.dims = dims;
        rec.timestamp_us = static_cast<std::int64_t>(r.u64());
        rec.values.resize(static_cast<std::size_t>(entries));
        for (int e = 0; e < entries; ++e) {
            const float re = r.f32();
            const float im = r.f32();
            rec.values[static_cast<std::size_t>(e)] = {re, im};
        }
        if (!records.empty() && rec.timestamp_us <= records.back().timestamp_us)
            throw OrderingError(path.string() + ": non-monotone timestamp at record " +
                                std::to_string(i));
        records.push_back(std::move(rec));
    }
    if (!r.eof())
        throw ParseError(path.string() + ": " + std::to_string(r.remaining()) +
                         " trailing bytes after declared record count");
    return records;
}

// ---------------------------------------------------------------------------
// JSON-lines mirror (debugging format, one record per line)
// ---------------------------------------------------------------------------

inline void write_csi_jsonl(const std::filesystem::path& path,
                            std::span<const CsiRecord> records) {
    std::string out;
    for (const CsiRecord& rec : records) {
        nlohmann::json j;
        j["timestamp_us"] = rec.timestamp_us;
        j["k"] = rec.dims.subcarriers;
        j["n_tx"] = rec.dims.n_tx;
        j["n_rx"] = rec.dims.n_rx;
        std::vector<float> re, im;
        re.reserve(rec.values.size());
        im.reserve(rec.values.size());
        for (const auto& z : rec.values) {
            re.push_back(z.real());
            im.push_back(z.imag());
        }
        j["re"] = re;
        j["im"] = im;
        out += j.dump();
        out += '\n';
    }
    io::write_file(path, out);
}

inline std::vector<CsiRecord> parse_csi_jsonl(const std::filesystem::path& path,
                                              std::optional<CsiDims> expected = {}) {
    const std::string bytes = io::read_file(path);
    std::vector<CsiRecord> records;
    std::istringstream in(bytes);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        CsiRecord rec;
        std::vector<float> re, im;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            rec.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
            rec.dims.subcarriers = j.at("k").get<int>();
            rec.dims.n_tx = j.at("n_tx").get<int>();
            rec.dims.n_rx = j.at("n_rx").get<int>();
            re = j.at("re").get<std::vector<float>>();
            im = j.at("im").get<std::vector<float>>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (static_cast<int>(re.size()) != rec.dims.entries() || re.size() != im.size())
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": value count does not match declared dims");
        if (expected && !(rec.dims == *expected))
            throw DimensionError(path.string() + ":" + std::to_string(lineno) +
                                 ": dims do not match expected dims");
        rec.values.resize(re.size());
        for (std::size_t i = 0; i < re.size(); ++i) rec.values[i] = {re[i], im[i]};
        if (!records.empty() && rec.timestamp_us <= records.back().timestamp_us)
            throw OrderingError(path.string() + ":" + std::to_string(lineno) +
                                ": non-monotone timestamp");
        records.push_back(std::move(rec));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Amplitude extraction
// ---------------------------------------------------------------------------

inline AmplitudeRecord amplitude(const CsiRecord& rec) {
    AmplitudeRecord out;
    out.timestamp_us = rec.timestamp_us;
    out.dims = rec.dims;
    out.amps.resize(rec.values.size());
    for (std::size_t i = 0; i < rec.values.size(); ++i) out.amps[i] = std::abs(rec.values[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Hampel identifier
//
// Sliding window outlier filter: a point is replaced by the local median when
// it deviates from it by more than n_sigmas * 1.4826 * MAD. Windows are
// truncated at the sequence boundaries. Non-recursive: every point is judged
// against the original series. A degenerate MAD (0) only flags deviations
// above the absolute floor kMadFloor.
// ---------------------------------------------------------------------------

inline constexpr double kMadScale = 1.4826;
inline constexpr double kMadFloor = 1e-9;

namespace detail {

inline double median_inplace(std::vector<double>& v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// One pass of the Hampel identifier: a sample deviating from its window's
/// median by more than n_sigmas * 1.4826 * MAD is replaced by that median.
/// Edge windows are truncated, never padded. A sample whose deviation is
/// within the threshold is returned bit-identical.
inline std::vector<float> hampel_sweep(std::span<const float> series, int window = 5,
                                       double n_sigmas = 3.0) {
    if (window < 3 || window % 2 == 0)
        throw std::invalid_argument("hampel_sweep: window must be odd and >= 3");
    if (!(n_sigmas > 0.0))
        throw std::invalid_argument("hampel_sweep: n_sigmas must be positive");

    const std::int64_t n = static_cast<std::int64_t>(series.size());
    const std::int64_t half = window / 2;
    std::vector<float> out(series.begin(), series.end());
    std::vector<double> buf;
    buf.reserve(static_cast<std::size_t>(window));
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t lo = std::max<std::int64_t>(0, i - half);
        const std::int64_t hi = std::min<std::int64_t>(n - 1, i + half);
        buf.assign(series.begin() + lo, series.begin() + hi + 1);
        const double med = detail::median_inplace(buf);
        for (double& b : buf) b = std::abs(b - med);
        const double mad = detail::median_inplace(buf);
        const double dev = std::abs(static_cast<double>(series[static_cast<std::size_t>(i)]) - med);
        const double threshold = n_sigmas * kMadScale * mad;
        if (dev > threshold && dev > kMadFloor)
            out[static_cast<std::size_t>(i)] = static_cast<float>(med);
    }
    return out;
}

inline constexpr int kMaxHampelSweeps = 100;

/// Hampel filter as a projection: sweeps repeat until no sample is flagged,
/// so filtering an already-filtered series changes nothing. A single sweep
/// is not a projection (removing one outlier tightens nearby MADs, which
/// can flag previously kept samples), hence the iteration. Converges in a
/// handful of sweeps; a series with no outliers is returned unchanged.
inline std::vector<float> hampel_filter(std::span<const float> series, int window = 5,
                                        double n_sigmas = 3.0) {
    std::vector<float> cur(series.begin(), series.end());
    for (int sweep = 0; sweep < kMaxHampelSweeps; ++sweep) {
        std::vector<float> next = hampel_sweep(cur, window, n_sigmas);
        if (next == cur) break;
        cur = std::move(next);
    }
    return cur;
}

/// Hampel applied independently to every (subcarrier, tx, rx) amplitude
/// series across the stream.
inline std::vector<AmplitudeRecord> hampel_denoise(std::span<const AmplitudeRecord> stream,
                                                   int window = 5, double n_sigmas = 3.0) {
    std::vector<AmplitudeRecord> out(stream.begin(), stream.end());
    if (stream.empty()) return out;
    const int entries = stream.front().dims.entries();
    std::vector<float> series(stream.size());
    for (int e = 0; e < entries; ++e) {
        for (std::size_t t = 0; t < stream.size(); ++t)
            series[t] = stream[t].amps[static_cast<std::size_t>(e)];
        const std::vector<float> filtered = hampel_filter(series, window, n_sigmas);
        for (std::size_t t = 0; t < stream.size(); ++t)
            out[t].amps[static_cast<std::size_t>(e)] = filtered[t];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Per-frame windowing
// ---------------------------------------------------------------------------

struct WindowingResult {
    std::vector<CsiWindow> windows;
    int dropped_frames = 0;  // frames with fewer than m records available
};

/// Assign the records inside each frame interval [t_f, t_next) to that frame,
/// uniformly subsampling down to per_frame when more are available. The last
/// frame's interval extends by the preceding frame spacing (unbounded for a
/// single-frame sequence). Frames with fewer than per_frame records are
/// dropped and counted.
inline WindowingResult window_csi(std::span<const AmplitudeRecord> amps,
                                  std::span<const std::int64_t> frame_times_us, int per_frame) {
    if (per_frame < 1) throw std::invalid_argument("window_csi: per_frame must be >= 1");
    WindowingResult result;
    if (frame_times_us.empty()) return result;
    if (amps.empty()) {
        result.dropped_frames = static_cast<int>(frame_times_us.size());
        return result;
    }
    const CsiDims dims = amps.front().dims;
    const int frame_count = static_cast<int>(frame_times_us.size());

    std::size_t cursor = 0;
    for (int f = 0; f < frame_count; ++f) {
        const std::int64_t start = frame_times_us[static_cast<std::size_t>(f)];
        std::int64_t stop;
        if (f + 1 < frame_count) {
            stop = frame_times_us[static_cast<std::size_t>(f) + 1];
        } else if (frame_count >= 2) {
            stop = start + (start - frame_times_us[static_cast<std::size_t>(f) - 1]);
        } else {
            stop = std::numeric_limits<std::int64_t>::max();
        }
        while (cursor < amps.size() && amps[cursor].timestamp_us < start) ++cursor;
        std::size_t end = cursor;
        while (end < amps.size() && amps[end].timestamp_us < stop) ++end;

        const std::size_t available = end - cursor;
        if (available < static_cast<std::size_t>(per_frame)) {
            ++result.dropped_frames;
            cursor = end;
            continue;
        }
        CsiWindow w;
        w.frame_index = f;
        w.subcarriers = per_frame * dims.subcarriers;
        w.n_tx = dims.n_tx;
        w.n_rx = dims.n_rx;
        w.amps.reserve(static_cast<std::size_t>(w.entries()));
        for (int j = 0; j < per_frame; ++j) {
            const std::size_t pick =
                cursor + static_cast<std::size_t>(j) * available / static_cast<std::size_t>(per_frame);
            const AmplitudeRecord& rec = amps[pick];
            w.amps.insert(w.amps.end(), rec.amps.begin(), rec.amps.end());
        }
        result.windows.push_back(std::move(w));
        cursor = end;
    }
    return result;
}

}  // namespace csiguard::csi
