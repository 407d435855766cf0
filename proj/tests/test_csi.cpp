#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <vector>

#include "csiguard/common.hpp"
#include "csiguard/csi.hpp"

using namespace csiguard;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "csiguard_test_csi";
    fs::create_directories(dir);
    return dir;
}

csi::CsiRecord random_record(Rng& rng, csi::CsiDims dims, std::int64_t ts) {
    csi::CsiRecord rec;
    rec.timestamp_us = ts;
    rec.dims = dims;
    rec.values.resize(static_cast<std::size_t>(dims.entries()));
    for (auto& z : rec.values)
        z = {static_cast<float>(rng.normal(0.0, 1.0)), static_cast<float>(rng.normal(0.0, 1.0))};
    return rec;
}

// Independent one-pass reimplementation used as the oracle: literally sort
// the window, take the median (mean of the middle two when even), and apply
// the 1.4826-scaled MAD rule.
std::vector<float> sweep_oracle(const std::vector<float>& x, int window, double ns) {
    const int n = static_cast<int>(x.size());
    const int half = window / 2;
    std::vector<float> out = x;
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - half);
        const int hi = std::min(n - 1, i + half);
        std::vector<double> w(x.begin() + lo, x.begin() + hi + 1);
        std::sort(w.begin(), w.end());
        const std::size_t k = w.size();
        const double med = k % 2 ? w[k / 2] : 0.5 * (w[k / 2 - 1] + w[k / 2]);
        std::vector<double> devs;
        for (double v : w) devs.push_back(std::abs(v - med));
        std::sort(devs.begin(), devs.end());
        const double mad = k % 2 ? devs[k / 2] : 0.5 * (devs[k / 2 - 1] + devs[k / 2]);
        const double dev = std::abs(x[static_cast<std::size_t>(i)] - med);
        if (dev > ns * 1.4826 * mad && dev > 1e-9) out[static_cast<std::size_t>(i)] = float(med);
    }
    return out;
}

std::vector<float> random_series(Rng& rng, int n) {
    std::vector<float> x(static_cast<std::size_t>(n));
    for (float& v : x) {
        v = static_cast<float>(1.0 + rng.normal(0.0, 0.05));
        if (rng.uniform() < 0.01) v += static_cast<float>(rng.uniform(-10.0, 10.0));
    }
    return x;
}

}  // namespace

TEST_CASE("amplitude is the complex modulus") {
    csi::CsiRecord rec;
    rec.timestamp_us = 7;
    rec.dims = {1, 1, 1};
    rec.values = {{3.0f, 4.0f}};
    const csi::AmplitudeRecord amp = csi::amplitude(rec);
    CHECK(amp.timestamp_us == 7);
    CHECK(amp.amps.size() == 1);
    CHECK(amp.amps[0] == 5.0f);

    rec.values = {{-2.0f, 0.0f}};
    CHECK(csi::amplitude(rec).amps[0] == 2.0f);

    rec.dims = {2, 1, 1};
    rec.values = {{0.0f, 0.0f}, {0.0f, 0.0f}};
    const csi::AmplitudeRecord zero = csi::amplitude(rec);
    CHECK(zero.amps == std::vector<float>{0.0f, 0.0f});
}

TEST_CASE("amplitude is invariant under conjugation") {
    Rng rng(11);
    const csi::CsiDims dims{4, 2, 2};
    for (int trial = 0; trial < 100; ++trial) {
        csi::CsiRecord rec = random_record(rng, dims, trial);
        csi::CsiRecord conj = rec;
        for (auto& z : conj.values) z = std::conj(z);
        CHECK(csi::amplitude(rec).amps == csi::amplitude(conj).amps);
    }
}

TEST_CASE("hampel replaces the canonical spike") {
    // Window of five around the spike: median 1, all deviations from the
    // median are 0 except the spike's 9, so MAD = 0 and the replacement
    // rule fires on the absolute floor.
    const std::vector<float> in{1, 1, 10, 1, 1};
    CHECK(csi::hampel_filter(in, 5, 3.0) == std::vector<float>{1, 1, 1, 1, 1});
}

TEST_CASE("hampel leaves benign series alone") {
    const std::vector<float> constant{1, 1, 1, 1, 1};
    CHECK(csi::hampel_filter(constant, 5, 3.0) == constant);

    const std::vector<float> two{3.0f, 9.0f};
    CHECK(csi::hampel_filter(two, 5, 3.0) == two);

    CHECK(csi::hampel_filter(std::vector<float>{}, 5, 3.0).empty());
    CHECK(csi::hampel_filter(std::vector<float>{42.0f}, 5, 3.0) ==
          std::vector<float>{42.0f});
}

TEST_CASE("hampel rejects invalid windows") {
    const std::vector<float> x{1, 2, 3};
    CHECK_THROWS_AS(csi::hampel_filter(x, 4, 3.0), std::invalid_argument);
    CHECK_THROWS_AS(csi::hampel_filter(x, 1, 3.0), std::invalid_argument);
    CHECK_THROWS_AS(csi::hampel_filter(x, 5, 0.0), std::invalid_argument);
}

TEST_CASE("hampel sweep matches an independent oracle") {
    Rng rng(22);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(0, 120));
        const std::vector<float> x = random_series(rng, n);
        const std::vector<float> got = csi::hampel_sweep(x, 5, 3.0);
        const std::vector<float> want = sweep_oracle(x, 5, 3.0);
        REQUIRE(got == want);
    }
}

TEST_CASE("hampel sweep preserves non-outliers bit for bit") {
    Rng rng(23);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform_int(0, 80));
        const std::vector<float> x = random_series(rng, n);
        const std::vector<float> y = csi::hampel_sweep(x, 5, 3.0);
        // Recompute the decision independently; inliers must be untouched.
        const std::vector<float> oracle = sweep_oracle(x, 5, 3.0);
        for (int i = 0; i < n; ++i) {
            if (oracle[static_cast<std::size_t>(i)] == x[static_cast<std::size_t>(i)])
                REQUIRE(y[static_cast<std::size_t>(i)] == x[static_cast<std::size_t>(i)]);
        }
    }
}

TEST_CASE("hampel filter is idempotent") {
    Rng rng(24);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(0, 150));
        const std::vector<float> x = random_series(rng, n);
        const std::vector<float> once = csi::hampel_filter(x, 5, 3.0);
        const std::vector<float> twice = csi::hampel_filter(once, 5, 3.0);
        REQUIRE(once == twice);
    }
}

TEST_CASE("windowing takes an exact fit in order") {
    csi::CsiDims dims{2, 1, 1};
    std::vector<csi::AmplitudeRecord> amps;
    for (int i = 0; i < 5; ++i) {
        csi::AmplitudeRecord a;
        a.timestamp_us = 10 + i;
        a.dims = dims;
        a.amps = {static_cast<float>(i), static_cast<float>(10 * i)};
        amps.push_back(a);
    }
    const std::vector<std::int64_t> frames{10, 100};
    const csi::WindowingResult wr = csi::window_csi(amps, frames, 5);
    REQUIRE(wr.windows.size() == 1);
    REQUIRE(wr.dropped_frames == 1);  // second frame has no records
    const csi::CsiWindow& w = wr.windows[0];
    CHECK(w.frame_index == 0);
    CHECK(w.subcarriers == 10);
    REQUIRE(w.amps.size() == 10);
    for (int i = 0; i < 5; ++i) {
        CHECK(w.amps[static_cast<std::size_t>(2 * i)] == static_cast<float>(i));
        CHECK(w.amps[static_cast<std::size_t>(2 * i + 1)] == static_cast<float>(10 * i));
    }
}

TEST_CASE("windowing subsamples ten records to positions 0 2 4 6 8") {
    csi::CsiDims dims{1, 1, 1};
    std::vector<csi::AmplitudeRecord> amps;
    for (int i = 0; i < 10; ++i) {
        csi::AmplitudeRecord a;
        a.timestamp_us = i;
        a.dims = dims;
        a.amps = {static_cast<float>(i)};
        amps.push_back(a);
    }
    const std::vector<std::int64_t> frames{0};
    const csi::WindowingResult wr = csi::window_csi(amps, frames, 5);
    REQUIRE(wr.windows.size() == 1);
    CHECK(wr.windows[0].amps == std::vector<float>{0, 2, 4, 6, 8});
}

TEST_CASE("windowing drops short frames and counts them") {
    csi::CsiDims dims{1, 1, 1};
    std::vector<csi::AmplitudeRecord> amps;
    for (int i = 0; i < 3; ++i) {
        csi::AmplitudeRecord a;
        a.timestamp_us = i;
        a.dims = dims;
        a.amps = {1.0f};
        amps.push_back(a);
    }
    const std::vector<std::int64_t> frames{0};
    const csi::WindowingResult wr = csi::window_csi(amps, frames, 5);
    CHECK(wr.windows.empty());
    CHECK(wr.dropped_frames == 1);

    const csi::WindowingResult empty = csi::window_csi({}, std::vector<std::int64_t>{0, 5, 9}, 5);
    CHECK(empty.windows.empty());
    CHECK(empty.dropped_frames == 3);
}

TEST_CASE("window sources stay inside their frame interval") {
    Rng rng(31);
    csi::CsiDims dims{1, 1, 1};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<csi::AmplitudeRecord> amps;
        std::int64_t ts = 0;
        for (int i = 0; i < 200; ++i) {
            ts += 1 + static_cast<std::int64_t>(rng.uniform_int(0, 40));
            csi::AmplitudeRecord a;
            a.timestamp_us = ts;
            a.dims = dims;
            // Encode the timestamp so the windows reveal their sources.
            a.amps = {static_cast<float>(ts)};
            amps.push_back(a);
        }
        std::vector<std::int64_t> frames;
        std::int64_t ft = 0;
        for (int f = 0; f < 20; ++f) {
            frames.push_back(ft);
            ft += 100 + static_cast<std::int64_t>(rng.uniform_int(0, 100));
        }
        const int m = 3;
        const csi::WindowingResult wr = csi::window_csi(amps, frames, m);
        CHECK(wr.windows.size() + static_cast<std::size_t>(wr.dropped_frames) == frames.size());
        for (const csi::CsiWindow& w : wr.windows) {
            const std::size_t f = static_cast<std::size_t>(w.frame_index);
            const std::int64_t lo = frames[f];
            const std::int64_t hi = f + 1 < frames.size()
                                        ? frames[f + 1]
                                        : frames[f] + (frames[f] - frames[f - 1]);
            for (float v : w.amps) {
                CHECK(static_cast<std::int64_t>(v) >= lo);
                CHECK(static_cast<std::int64_t>(v) < hi);
            }
        }
    }
}

TEST_CASE("csi stream round-trips bit for bit") {
    Rng rng(41);
    const csi::CsiDims dims{3, 2, 2};
    std::vector<csi::CsiRecord> records;
    for (int i = 0; i < 17; ++i) records.push_back(random_record(rng, dims, 100 * i + 5));
    const fs::path path = temp_dir() / "roundtrip.bin";
    csi::write_csi_stream(path, records);
    const std::vector<csi::CsiRecord> back = csi::parse_csi_stream(path, dims);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].timestamp_us == records[i].timestamp_us);
        CHECK(back[i].dims == records[i].dims);
        CHECK(back[i].values == records[i].values);
    }
}

TEST_CASE("csi stream parser rejects malformed input") {
    const fs::path dir = temp_dir();

    io::write_file(dir / "empty.bin", "");
    CHECK(csi::parse_csi_stream(dir / "empty.bin").empty());

    io::write_file(dir / "magic.bin", "NOPE????????????????");
    CHECK_THROWS_AS(csi::parse_csi_stream(dir / "magic.bin"), ParseError);

    Rng rng(42);
    const csi::CsiDims dims{2, 1, 1};
    std::vector<csi::CsiRecord> records{random_record(rng, dims, 10),
                                        random_record(rng, dims, 20)};
    const fs::path good = dir / "good.bin";
    csi::write_csi_stream(good, records);

    // Truncated mid-record.
    std::string bytes = io::read_file(good);
    io::write_file(dir / "trunc.bin", bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_WITH(csi::parse_csi_stream(dir / "trunc.bin"),
                      Catch::Matchers::ContainsSubstring("truncated"));

    // Trailing garbage.
    io::write_file(dir / "trail.bin", bytes + "xx");
    CHECK_THROWS_AS(csi::parse_csi_stream(dir / "trail.bin"), ParseError);

    // Expected dims disagree.
    CHECK_THROWS_AS(csi::parse_csi_stream(good, csi::CsiDims{30, 3, 3}), DimensionError);

    // Non-monotone timestamps.
    records[1].timestamp_us = 10;
    const fs::path mono = dir / "mono.bin";
    csi::write_csi_stream(mono, records);
    CHECK_THROWS_AS(csi::parse_csi_stream(mono), OrderingError);
}

TEST_CASE("csi jsonl mirror round-trips and reports line errors") {
    Rng rng(43);
    const csi::CsiDims dims{2, 1, 2};
    std::vector<csi::CsiRecord> records;
    for (int i = 0; i < 5; ++i) records.push_back(random_record(rng, dims, 7 * i));
    const fs::path path = temp_dir() / "records.jsonl";
    csi::write_csi_jsonl(path, records);
    const std::vector<csi::CsiRecord> back = csi::parse_csi_jsonl(path);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].timestamp_us == records[i].timestamp_us);
        CHECK(back[i].values == records[i].values);
    }

    io::write_file(temp_dir() / "bad.jsonl", "{\"timestamp_us\": 1}\nnot json\n");
    CHECK_THROWS_AS(csi::parse_csi_jsonl(temp_dir() / "bad.jsonl"), ParseError);
}

TEST_CASE("hampel denoise filters every antenna series independently") {
    Rng rng(44);
    const csi::CsiDims dims{3, 2, 1};
    std::vector<csi::AmplitudeRecord> stream;
    for (int t = 0; t < 60; ++t) {
        csi::AmplitudeRecord a;
        a.timestamp_us = t;
        a.dims = dims;
        a.amps.resize(static_cast<std::size_t>(dims.entries()));
        for (float& v : a.amps) {
            v = static_cast<float>(1.0 + rng.normal(0.0, 0.05));
            if (rng.uniform() < 0.02) v += 8.0f;
        }
        stream.push_back(a);
    }
    const std::vector<csi::AmplitudeRecord> denoised = csi::hampel_denoise(stream, 5, 3.0);
    REQUIRE(denoised.size() == stream.size());
    for (int e = 0; e < dims.entries(); ++e) {
        std::vector<float> series, want_series;
        for (const csi::AmplitudeRecord& a : stream)
            series.push_back(a.amps[static_cast<std::size_t>(e)]);
        const std::vector<float> filtered = csi::hampel_filter(series, 5, 3.0);
        for (std::size_t t = 0; t < denoised.size(); ++t)
            REQUIRE(denoised[t].amps[static_cast<std::size_t>(e)] == filtered[t]);
    }
}
