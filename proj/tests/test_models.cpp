#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <vector>

#include "csiguard/models.hpp"

namespace fs = std::filesystem;
using namespace csiguard;
using namespace csiguard::models;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "csiguard_test_models";
    fs::create_directories(dir);
    return dir;
}


std::vector<float> random_floats(std::size_t n, std::mt19937& rng, float lo = 0.2f,
                                 float hi = 2.0f) {
    std::uniform_real_distribution<float> d(lo, hi);
    std::vector<float> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

std::vector<double> random_doubles(std::size_t n, std::mt19937& rng, double lo = -1.0,
                                   double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

template <class Net>
void zero_params(Net& net) {
    net.visit_params([](auto& w, auto&) { std::fill(w.begin(), w.end(), 0); });
}

template <class Net>
std::vector<float> flat_params(Net& net) {
    std::vector<float> all;
    net.visit_params([&](std::vector<float>& w, std::vector<float>&) {
        all.insert(all.end(), w.begin(), w.end());
    });
    return all;
}

// Spot-checks a few weights per parameter array against central differences;
// the full per-layer math is covered elsewhere, this catches wiring mistakes
// in the composite nets.
template <class Module>
void check_sampled_grads(Module& mod, const std::function<double()>& loss,
                         std::size_t per_array = 5, double tol = 1e-5) {
    std::vector<std::vector<double>*> params, grads;
    mod.visit_params([&](std::vector<double>& w, std::vector<double>& g) {
        params.push_back(&w);
        grads.push_back(&g);
    });
    const double h = 1e-6;
    for (std::size_t a = 0; a < params.size(); ++a) {
        const std::size_t n = params[a]->size();
        const std::size_t stride = std::max<std::size_t>(1, n / per_array);
        for (std::size_t i = 0; i < n; i += stride) {
            const double keep = (*params[a])[i];
            (*params[a])[i] = keep + h;
            const double lp = loss();
            (*params[a])[i] = keep - h;
            const double lm = loss();
            (*params[a])[i] = keep;
            const double fd = (lp - lm) / (2.0 * h);
            // Near-zero gradients sit below central-difference resolution, so
            // pair the relative bound with a small absolute floor.
            const double g = (*grads[a])[i];
            REQUIRE(std::abs(fd - g) < 1e-9 + tol * (std::abs(fd) + std::abs(g)));
        }
    }
}

Fingerprint detector_fp(int m = 5, int k = 30) {
    Fingerprint fp;
    fp.module = "detector";
    fp.m = m;
    fp.k = k;
    fp.n_tx = 3;
    fp.n_rx = 3;
    return fp;
}

}  // namespace

TEST_CASE("tiling replicates each antenna cell over its pixel block") {
    const int channels = 2, n_tx = 3, n_rx = 3, h = 96, w = 128;
    std::vector<float> amps(static_cast<std::size_t>(channels) * n_tx * n_rx);
    for (int c = 0; c < channels; ++c)
        for (int ty = 0; ty < n_tx; ++ty)
            for (int tx = 0; tx < n_rx; ++tx)
                amps[static_cast<std::size_t>(c) * 9 + ty * 3 + tx] =
                    static_cast<float>(100 * c + 10 * ty + tx);
    const std::vector<float> tiled = tile_to_working_size<float>(amps, channels, n_tx, n_rx, h, w);
    REQUIRE(tiled.size() == static_cast<std::size_t>(channels) * h * w);
    const int cell_h = (h + n_tx - 1) / n_tx;  // 32
    const int cell_w = (w + n_rx - 1) / n_rx;  // 43
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int ty = std::min(y / cell_h, n_tx - 1);
                const int tx = std::min(x / cell_w, n_rx - 1);
                const float want = static_cast<float>(100 * c + 10 * ty + tx);
                REQUIRE(tiled[(static_cast<std::size_t>(c) * h + y) * w + x] == want);
            }
}

TEST_CASE("tiling rejects a window that does not match the grid") {
    const std::vector<float> amps(8, 1.0f);
    REQUIRE_THROWS_AS(tile_to_working_size<float>(amps, 1, 3, 3, 96, 128), DimensionError);
}

TEST_CASE("detector with zero weights sits on the decision boundary") {
    DetectorNet<float> net({30, 9, 5}, 1);
    zero_params(net);
    std::mt19937 rng(1);
    const std::vector<float> window = random_floats(5 * 30 * 9, rng);
    REQUIRE(net.forward(window) == 0.0f);
}

TEST_CASE("detector forward is deterministic and seed-sensitive") {
    std::mt19937 rng(2);
    const std::vector<float> window = random_floats(5 * 30 * 9, rng);
    DetectorNet<float> a({30, 9, 5}, 42), b({30, 9, 5}, 42), c({30, 9, 5}, 43);
    const float la = a.forward(window);
    REQUIRE(la == b.forward(window));
    REQUIRE(la == a.forward(window));
    REQUIRE(la != c.forward(window));
}

TEST_CASE("detector validates its window and config") {
    DetectorNet<float> net({30, 9, 5}, 1);
    const std::vector<float> wrong(100, 1.0f);
    REQUIRE_THROWS_AS(net.forward(wrong), DimensionError);
    REQUIRE_THROWS_AS(DetectorNet<float>({2, 9, 5}, 1), ConfigError);
    REQUIRE_THROWS_AS(DetectorNet<float>({30, 9, 0}, 1), ConfigError);
}

TEST_CASE("detector backward matches sampled finite differences") {
    std::mt19937 rng(11);
    DetectorNet<double> net({6, 2, 2}, 7);
    const std::vector<float> window = random_floats(2 * 6 * 2, rng);
    const auto loss = [&]() { return net.forward(window); };
    nn::Optimizer<double>::zero_grad(net);
    net.forward(window);
    net.backward(1.0);
    check_sampled_grads(net, loss);
}

TEST_CASE("segmentor emits one logit per pixel and zero weights give zero") {
    SegmentorNet<float> net({4, 16, 16}, 3);
    zero_params(net);
    std::mt19937 rng(3);
    const std::vector<float> tiled = random_floats(4 * 16 * 16, rng);
    const std::vector<float> logits = net.forward(tiled);
    REQUIRE(logits.size() == 16 * 16);
    for (float v : logits) REQUIRE(v == 0.0f);
}

TEST_CASE("segmentor validates geometry") {
    REQUIRE_THROWS_AS(SegmentorNet<float>({4, 17, 16}, 1), ConfigError);
    REQUIRE_THROWS_AS(SegmentorNet<float>({4, 16, 24}, 1), ConfigError);
    REQUIRE_THROWS_AS(SegmentorNet<float>({0, 16, 16}, 1), ConfigError);
    SegmentorNet<float> net({4, 16, 16}, 1);
    const std::vector<float> wrong(4 * 16 * 15, 1.0f);
    REQUIRE_THROWS_AS(net.forward(wrong), DimensionError);
}

TEST_CASE("segmentor forward is deterministic per seed") {
    std::mt19937 rng(4);
    const std::vector<float> tiled = random_floats(2 * 16 * 16, rng);
    SegmentorNet<float> a({2, 16, 16}, 9), b({2, 16, 16}, 9);
    REQUIRE(a.forward(tiled) == b.forward(tiled));
}

TEST_CASE("segmentor backward matches sampled finite differences") {
    std::mt19937 rng(12);
    SegmentorNet<double> net({2, 16, 16}, 21);
    std::vector<double> tiled = random_doubles(2 * 16 * 16, rng);
    const std::vector<double> coeff = random_doubles(16 * 16, rng);
    const auto loss = [&]() {
        const std::vector<double> out = net.forward(tiled);
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * coeff[i];
        return s;
    };
    nn::Optimizer<double>::zero_grad(net);
    net.forward(tiled);
    net.backward(coeff);
    check_sampled_grads(net, loss, 4);
}

TEST_CASE("forgery net scores clips and zero weights give an even verdict") {
    ForgeryNet<float> net({16, 16, 3}, 5);
    zero_params(net);
    std::mt19937 rng(5);
    std::vector<std::vector<float>> clip(3);
    for (auto& step : clip) step = random_floats(2 * 16 * 16, rng, 0.0f, 1.0f);
    const float logit = net.forward(clip);
    REQUIRE(logit == 0.0f);
    REQUIRE(nn::sigmoid(logit) == 0.5f);
}

TEST_CASE("forgery net enforces the clip length") {
    ForgeryNet<float> net({16, 16, 3}, 5);
    std::vector<std::vector<float>> clip(2, std::vector<float>(2 * 16 * 16, 0.5f));
    REQUIRE_THROWS_AS(net.forward(clip), DimensionError);
    ForgeryNet<float>::StepCache sc;
    const std::vector<float> bad_step(100, 0.5f);
    REQUIRE_THROWS_AS(net.step_forward(bad_step, sc), DimensionError);
    REQUIRE_THROWS_AS(ForgeryNet<float>({15, 16, 3}, 1), ConfigError);
    REQUIRE_THROWS_AS(ForgeryNet<float>({16, 16, 0}, 1), ConfigError);
}

TEST_CASE("forgery clip forward equals per-step features plus head") {
    std::mt19937 rng(6);
    ForgeryNet<float> net({16, 16, 3}, 8);
    std::vector<std::vector<float>> clip(3);
    for (auto& step : clip) step = random_floats(2 * 16 * 16, rng, 0.0f, 1.0f);
    const float whole = net.forward(clip);

    std::vector<std::vector<float>> feats(3);
    for (int t = 0; t < 3; ++t) {
        ForgeryNet<float>::StepCache sc;
        feats[static_cast<std::size_t>(t)] = net.step_forward(clip[static_cast<std::size_t>(t)], sc);
    }
    ForgeryNet<float>::HeadCache hc;
    REQUIRE(net.head_forward(feats, hc) == whole);
}

TEST_CASE("forgery backward matches sampled finite differences") {
    std::mt19937 rng(13);
    ForgeryNet<double> net({16, 16, 2}, 31);
    std::vector<std::vector<double>> clip(2);
    for (auto& step : clip) step = random_doubles(2 * 16 * 16, rng, 0.0, 1.0);
    const auto loss = [&]() { return net.forward(clip); };
    nn::Optimizer<double>::zero_grad(net);
    net.forward(clip);
    net.backward(1.0);
    check_sampled_grads(net, loss, 4);
}

TEST_CASE("checkpoints restore weights bit for bit") {
    const fs::path path = temp_dir() / "detector.ckpt";
    DetectorNet<float> src({30, 9, 5}, 1);
    DetectorNet<float> dst({30, 9, 5}, 2);
    REQUIRE(flat_params(src) != flat_params(dst));

    Fingerprint fp = detector_fp();
    fp.epoch = 17;
    fp.seed = 1;
    save_checkpoint(path, fp, src);
    const Fingerprint loaded = load_checkpoint(path, detector_fp(), dst);
    REQUIRE(loaded.epoch == 17);
    REQUIRE(flat_params(src) == flat_params(dst));

    std::mt19937 rng(7);
    const std::vector<float> window = random_floats(5 * 30 * 9, rng);
    REQUIRE(src.forward(window) == dst.forward(window));
}

TEST_CASE("checkpoint compatibility ignores provenance but not shape") {
    Fingerprint a = detector_fp();
    Fingerprint b = detector_fp();
    b.epoch = 99;
    b.seed = 123456;
    REQUIRE(a.compatible(b));
    b.m = 1;
    REQUIRE_FALSE(a.compatible(b));

    const fs::path path = temp_dir() / "shape.ckpt";
    DetectorNet<float> net({30, 9, 5}, 1);
    save_checkpoint(path, detector_fp(), net);
    DetectorNet<float> other({30, 9, 5}, 3);
    REQUIRE_THROWS_AS(load_checkpoint(path, detector_fp(1), other), ValidationError);
}

TEST_CASE("checkpoint fingerprint survives json round-trip") {
    Fingerprint fp = detector_fp();
    fp.g = 7;
    fp.h = 96;
    fp.w = 128;
    fp.epoch = 3;
    fp.seed = 77;
    const Fingerprint back = fingerprint_from_json(fingerprint_json(fp));
    REQUIRE(back.compatible(fp));
    REQUIRE(back.epoch == 3);
    REQUIRE(back.seed == 77);
}

TEST_CASE("checkpoint loader rejects damaged files") {
    const fs::path dir = temp_dir();
    DetectorNet<float> net({6, 2, 2}, 1);
    const Fingerprint fp = detector_fp(2, 6);

    std::ofstream(dir / "magic.ckpt", std::ios::binary) << "NOPE";
    DetectorNet<float> target({6, 2, 2}, 2);
    REQUIRE_THROWS_AS(load_checkpoint(dir / "magic.ckpt", fp, target), ParseError);

    save_checkpoint(dir / "trailing.ckpt", fp, net);
    {
        std::ofstream app(dir / "trailing.ckpt", std::ios::binary | std::ios::app);
        app.put('\0');
    }
    REQUIRE_THROWS_AS(load_checkpoint(dir / "trailing.ckpt", fp, target), ParseError);

    save_checkpoint(dir / "short.ckpt", fp, net);
    {
        const auto size = fs::file_size(dir / "short.ckpt");
        fs::resize_file(dir / "short.ckpt", size - 8);
    }
    REQUIRE_THROWS_AS(load_checkpoint(dir / "short.ckpt", fp, target), ParseError);

    save_checkpoint(dir / "count.ckpt", fp, net);
    {
        // Patch the declared parameter count without touching the payload.
        std::fstream f(dir / "count.ckpt", std::ios::binary | std::ios::in | std::ios::out);
        f.seekg(4);
        std::uint32_t meta_len = 0;
        f.read(reinterpret_cast<char*>(&meta_len), 4);
        f.seekp(8 + meta_len);
        const std::uint64_t bogus = 3;
        f.write(reinterpret_cast<const char*>(&bogus), 8);
    }
    REQUIRE_THROWS_AS(load_checkpoint(dir / "count.ckpt", fp, target), ParseError);

    save_checkpoint(dir / "peek.ckpt", fp, net);
    const Fingerprint peeked = peek_checkpoint(dir / "peek.ckpt");
    REQUIRE(peeked.compatible(fp));
}
