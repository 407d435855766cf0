#pragma once

// Metrics over binary decisions (accuracy, false/true positive rates with
// the forged class as positive), per-module throughput benchmarking, and
// report serialization. Rates with empty denominators are reported as
// explicitly undefined, never as a silent 0.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csiguard/common.hpp"
#include "csiguard/csi.hpp"
#include "csiguard/models.hpp"
#include "csiguard/nn.hpp"

namespace csiguard::evaluation {

struct MetricsReport {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    double acc = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
    bool fpr_defined = false;
    bool tpr_defined = false;

    std::int64_t total() const { return tp + fp + tn + fn; }
};

inline MetricsReport confusion(std::span<const int> preds, std::span<const int> labels) {
    if (preds.size() != labels.size())
        throw ValidationError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                              std::to_string(labels.size()) + " labels");
    if (preds.empty()) throw ValidationError("confusion: empty input");
    MetricsReport r;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool p = preds[i] != 0, l = labels[i] != 0;
        if (p && l)
            ++r.tp;
        else if (p && !l)
            ++r.fp;
        else if (!p && l)
            ++r.fn;
        else
            ++r.tn;
    }
    r.acc = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.total());
    if (r.fp + r.tn > 0) {
        r.fpr = static_cast<double>(r.fp) / static_cast<double>(r.fp + r.tn);
        r.fpr_defined = true;
    }
    if (r.tp + r.fn > 0) {
        r.tpr = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
        r.tpr_defined = true;
    }
    return r;
}

/// Machine form. Undefined rates serialize as null. Deliberately excludes
/// any timing so identical runs produce identical bytes.
inline nlohmann::json metrics_json(const MetricsReport& r) {
    nlohmann::json j{{"tp", r.tp}, {"fp", r.fp}, {"tn", r.tn}, {"fn", r.fn}, {"acc", r.acc}};
    if (r.fpr_defined)
        j["fpr"] = r.fpr;
    else
        j["fpr"] = nullptr;
    if (r.tpr_defined)
        j["tpr"] = r.tpr;
    else
        j["tpr"] = nullptr;
    return j;
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.tp = j.at("tp").get<std::int64_t>();
    r.fp = j.at("fp").get<std::int64_t>();
    r.tn = j.at("tn").get<std::int64_t>();
    r.fn = j.at("fn").get<std::int64_t>();
    r.acc = j.at("acc").get<double>();
    if (!j.at("fpr").is_null()) {
        r.fpr = j.at("fpr").get<double>();
        r.fpr_defined = true;
    }
    if (!j.at("tpr").is_null()) {
        r.tpr = j.at("tpr").get<double>();
        r.tpr_defined = true;
    }
    return r;
}

/// Human form.
inline std::string metrics_table(const MetricsReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "  tp=%lld fp=%lld tn=%lld fn=%lld\n",
                  static_cast<long long>(r.tp), static_cast<long long>(r.fp),
                  static_cast<long long>(r.tn), static_cast<long long>(r.fn));
    std::string out = buf;
    std::snprintf(buf, sizeof buf, "  acc=%.4f", r.acc);
    out += buf;
    if (r.fpr_defined)
        std::snprintf(buf, sizeof buf, " fpr=%.4f", r.fpr);
    else
        std::snprintf(buf, sizeof buf, " fpr=undefined");
    out += buf;
    if (r.tpr_defined)
        std::snprintf(buf, sizeof buf, " tpr=%.4f\n", r.tpr);
    else
        std::snprintf(buf, sizeof buf, " tpr=undefined\n");
    out += buf;
    return out;
}

// ---------------------------------------------------------------------------
// Ablation rows
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string param;  // "m" or "g"
    int value = 0;
    MetricsReport metrics;
};

inline void write_ablation_csv(const std::filesystem::path& path,
                               std::span<const AblationRow> rows) {
    std::string out = "param,value,acc,fpr,tpr\n";
    char buf[160];
    for (const AblationRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%.6f,%s,%s\n", r.param.c_str(), r.value,
                      r.metrics.acc,
                      r.metrics.fpr_defined ? std::to_string(r.metrics.fpr).c_str() : "undefined",
                      r.metrics.tpr_defined ? std::to_string(r.metrics.tpr).c_str() : "undefined");
        out += buf;
    }
    io::write_file(path, out);
}

// ---------------------------------------------------------------------------
// Throughput benchmark: per-frame cost of each stage, median over iters
// ---------------------------------------------------------------------------

struct BenchReport {
    double detector_fps = 0.0;
    double segmentor_fps = 0.0;
    double forgery_fps = 0.0;  // one feature step plus one clip head per frame
    int warmup = 0;
    int iters = 0;
    std::string hardware;
};

namespace detail {

inline std::string cpu_descriptor() {
    std::string name = "unknown cpu";
    try {
        const std::string info = io::read_file("/proc/cpuinfo");
        const std::size_t pos = info.find("model name");
        if (pos != std::string::npos) {
            const std::size_t colon = info.find(':', pos);
            const std::size_t eol = info.find('\n', pos);
            if (colon != std::string::npos && eol != std::string::npos && colon < eol) {
                name = info.substr(colon + 1, eol - colon - 1);
                const std::size_t first = name.find_first_not_of(' ');
                if (first != std::string::npos) name = name.substr(first);
            }
        }
    } catch (const ParseError&) {
    }
    return name;
}

template <class F>
inline double median_fps(F&& call, int warmup, int iters) {
    namespace chr = std::chrono;
    for (int i = 0; i < warmup; ++i) call();
    std::vector<double> times(static_cast<std::size_t>(iters));
    for (int i = 0; i < iters; ++i) {
        const auto t0 = chr::steady_clock::now();
        call();
        times[static_cast<std::size_t>(i)] =
            chr::duration_cast<chr::nanoseconds>(chr::steady_clock::now() - t0).count() / 1e9;
    }
    std::sort(times.begin(), times.end());
    const double med = times[times.size() / 2];
    return med > 0.0 ? 1.0 / med : 0.0;
}

}  // namespace detail

/// Measures each stage on one representative input. `window` is a CSI
/// window; `clip_input` is one fused 2 x H x W step input.
inline BenchReport bench(models::DetectorNet<float>& detector,
                         models::SegmentorNet<float>& segmentor,
                         models::ForgeryNet<float>& forgery, csi::CsiDims dims,
                         const csi::CsiWindow& window, const std::vector<float>& clip_input,
                         int warmup, int iters) {
    if (iters < 1) throw std::invalid_argument("bench: iters must be >= 1");
    BenchReport report;
    report.warmup = warmup;
    report.iters = iters;
    report.hardware = detail::cpu_descriptor();

    volatile float sink = 0.0f;
    report.detector_fps = detail::median_fps(
        [&] { sink = sink + detector.forward(window.amps); }, warmup, iters);
    report.segmentor_fps = detail::median_fps(
        [&] {
            const std::vector<float> tiled = models::tile_to_working_size<float>(
                window.amps, window.subcarriers, dims.n_tx, dims.n_rx, segmentor.config().h,
                segmentor.config().w);
            sink = sink + segmentor.forward(tiled)[0];
        },
        warmup, iters);

    std::vector<std::vector<float>> feats(static_cast<std::size_t>(forgery.config().g));
    {
        typename models::ForgeryNet<float>::StepCache sc;
        const std::vector<float> f = forgery.step_forward(clip_input, sc);
        for (auto& slot : feats) slot = f;
    }
    report.forgery_fps = detail::median_fps(
        [&] {
            typename models::ForgeryNet<float>::StepCache sc;
            feats.back() = forgery.step_forward(clip_input, sc);
            typename models::ForgeryNet<float>::HeadCache hc;
            sink = sink + forgery.head_forward(feats, hc);
        },
        warmup, iters);
    return report;
}

inline nlohmann::json bench_json(const BenchReport& r) {
    return nlohmann::json{{"detector_fps", r.detector_fps},
                          {"segmentor_fps", r.segmentor_fps},
                          {"forgery_fps", r.forgery_fps},
                          {"warmup", r.warmup},
                          {"iters", r.iters},
                          {"hardware", r.hardware}};
}

}  // namespace csiguard::evaluation
