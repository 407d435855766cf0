#pragma once

// The three networks: a CSI human-motion detector (1-D convs + LSTM), a
// CSI-to-mask segmentor (4-level encoder-decoder with skip connections), and
// a clip-level forgery detector (residual CNN per step + LSTM). Also the
// antenna-grid tiling that turns a CSI window into segmentor input, and
// fingerprinted checkpoint files.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csiguard/common.hpp"
#include "csiguard/nn.hpp"

namespace csiguard::models {

// ---------------------------------------------------------------------------
// Tiling: replicate the N_tx x N_rx antenna grid up to the working frame
// size, preserving the (m*K) channel axis. Cell (ty, tx) covers a
// ceil(H/N_tx) x ceil(W/N_rx) pixel block, cropped at the frame edge.
// ---------------------------------------------------------------------------

template <class T>
inline std::vector<T> tile_to_working_size(std::span<const float> window_amps, int channels,
                                           int n_tx, int n_rx, int h, int w) {
    if (static_cast<std::size_t>(channels) * n_tx * n_rx != window_amps.size())
        throw DimensionError("tile_to_working_size: window size does not match channels*grid");
    const int cell_h = (h + n_tx - 1) / n_tx;
    const int cell_w = (w + n_rx - 1) / n_rx;
    std::vector<T> out(static_cast<std::size_t>(channels) * h * w);
    for (int c = 0; c < channels; ++c) {
        const float* cell = window_amps.data() + static_cast<std::size_t>(c) * n_tx * n_rx;
        for (int y = 0; y < h; ++y) {
            const int ty = std::min(y / cell_h, n_tx - 1);
            T* row = out.data() + (static_cast<std::size_t>(c) * h + y) * w;
            for (int x = 0; x < w; ++x) {
                const int tx = std::min(x / cell_w, n_rx - 1);
                row[x] = static_cast<T>(cell[ty * n_rx + tx]);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Human detector: per-measurement 1-D convs over the subcarrier axis with
// antenna pairs as channels, LSTM over the m measurements, FC head.
// ---------------------------------------------------------------------------

template <class T>
class DetectorNet {
public:
    struct Config {
        int k = 30;        // subcarriers per measurement
        int channels = 9;  // n_tx * n_rx
        int m = 5;         // measurements per window
    };

    DetectorNet(Config cfg, std::uint64_t seed)
        : cfg_(cfg),
          rng_(seed),
          conv1_(cfg.channels, 32, 3, 2, 1, rng_),
          conv2_(32, 64, 3, 2, 1, rng_),
          lstm_(64, 64, rng_),
          fc1_(64, 32, rng_),
          fc2_(32, 1, rng_) {
        if (cfg.k < 3 || cfg.channels < 1 || cfg.m < 1)
            throw ConfigError("DetectorNet: k >= 3, channels >= 1, m >= 1 required");
    }

    const Config& config() const { return cfg_; }

    /// window_amps: (m*K) x channels, subcarrier-major. Returns the logit.
    T forward(std::span<const float> window_amps) {
        if (window_amps.size() != static_cast<std::size_t>(cfg_.m) * cfg_.k * cfg_.channels)
            throw DimensionError("DetectorNet: window has " +
                                 std::to_string(window_amps.size()) + " values, expected " +
                                 std::to_string(cfg_.m * cfg_.k * cfg_.channels));
        c1_.assign(static_cast<std::size_t>(cfg_.m), {});
        c2_.assign(static_cast<std::size_t>(cfg_.m), {});
        a1_.assign(static_cast<std::size_t>(cfg_.m), {});
        a2_.assign(static_cast<std::size_t>(cfg_.m), {});
        l2_ = conv2_.out_len(conv1_.out_len(cfg_.k));
        std::vector<std::vector<T>> feats(static_cast<std::size_t>(cfg_.m));
        std::vector<T> x(static_cast<std::size_t>(cfg_.channels) * cfg_.k);
        for (int t = 0; t < cfg_.m; ++t) {
            for (int c = 0; c < cfg_.channels; ++c)
                for (int l = 0; l < cfg_.k; ++l)
                    x[static_cast<std::size_t>(c) * cfg_.k + l] = static_cast<T>(
                        window_amps[static_cast<std::size_t>(t * cfg_.k + l) * cfg_.channels + c]);
            a1_[t] = conv1_.forward(x, cfg_.k, c1_[t]);
            nn::relu_inplace(a1_[t]);
            a2_[t] = conv2_.forward(a1_[t], conv1_.out_len(cfg_.k), c2_[t]);
            nn::relu_inplace(a2_[t]);
            std::vector<T>& feat = feats[static_cast<std::size_t>(t)];
            feat.assign(64, T(0));
            for (int c = 0; c < 64; ++c) {
                T acc = T(0);
                for (int l = 0; l < l2_; ++l) acc += a2_[t][static_cast<std::size_t>(c) * l2_ + l];
                feat[static_cast<std::size_t>(c)] = acc / static_cast<T>(l2_);
            }
        }
        const std::vector<T> h = lstm_.forward(feats, lc_);
        f1out_ = fc1_.forward(h, f1c_);
        nn::relu_inplace(f1out_);
        return fc2_.forward(f1out_, f2c_)[0];
    }

    void backward(T dlogit) {
        std::vector<T> g = fc2_.backward({dlogit}, f2c_);
        nn::relu_backward(f1out_, g);
        g = fc1_.backward(g, f1c_);
        std::vector<std::vector<T>> gsteps = lstm_.backward(g, lc_);
        for (int t = cfg_.m - 1; t >= 0; --t) {
            std::vector<T> ga2(static_cast<std::size_t>(64) * l2_);
            for (int c = 0; c < 64; ++c) {
                const T gc = gsteps[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)] /
                             static_cast<T>(l2_);
                for (int l = 0; l < l2_; ++l) ga2[static_cast<std::size_t>(c) * l2_ + l] = gc;
            }
            nn::relu_backward(a2_[t], ga2);
            std::vector<T> ga1 = conv2_.backward(ga2, c2_[t]);
            nn::relu_backward(a1_[t], ga1);
            conv1_.backward(ga1, c1_[t]);
        }
    }

    void visit_params(const nn::ParamFn<T>& f) {
        conv1_.visit_params(f);
        conv2_.visit_params(f);
        lstm_.visit_params(f);
        fc1_.visit_params(f);
        fc2_.visit_params(f);
    }

private:
    Config cfg_;
    Rng rng_;
    nn::Conv1d<T> conv1_, conv2_;
    nn::Lstm<T> lstm_;
    nn::Linear<T> fc1_, fc2_;

    std::vector<typename nn::Conv1d<T>::Cache> c1_, c2_;
    std::vector<std::vector<T>> a1_, a2_;
    typename nn::Lstm<T>::Cache lc_;
    typename nn::Linear<T>::Cache f1c_, f2c_;
    std::vector<T> f1out_;
    int l2_ = 0;
};

// ---------------------------------------------------------------------------
// Human segmentor: encoder-decoder over the tiled CSI image. Four stride-2
// encoder stages (each followed by a refining conv) and four stride-2
// transposed-conv decoder stages, each concatenated with the matching
// encoder skip and refined. 1x1 stem and head.
// ---------------------------------------------------------------------------

template <class T>
class SegmentorNet {
public:
    struct Config {
        int in_channels = 150;  // m * K
        int h = 96;
        int w = 128;
    };

    SegmentorNet(Config cfg, std::uint64_t seed)
        : cfg_(cfg),
          rng_(seed),
          stem_(cfg.in_channels, 8, 1, 1, 0, rng_),
          d1_(8, 16, 3, 2, 1, rng_),
          r1_(16, 16, 3, 1, 1, rng_),
          d2_(16, 32, 3, 2, 1, rng_),
          r2_(32, 32, 3, 1, 1, rng_),
          d3_(32, 64, 3, 2, 1, rng_),
          r3_(64, 64, 3, 1, 1, rng_),
          d4_(64, 64, 3, 2, 1, rng_),
          r4_(64, 64, 3, 1, 1, rng_),
          u1_(64, 64, rng_),
          ur1_(128, 64, 3, 1, 1, rng_),
          u2_(64, 32, rng_),
          ur2_(64, 32, 3, 1, 1, rng_),
          u3_(32, 16, rng_),
          ur3_(32, 16, 3, 1, 1, rng_),
          u4_(16, 8, rng_),
          ur4_(16, 8, 3, 1, 1, rng_),
          head_(8, 1, 1, 1, 0, rng_) {
        if (cfg.h % 16 != 0 || cfg.w % 16 != 0)
            throw ConfigError("SegmentorNet: working size " + std::to_string(cfg.h) + "x" +
                              std::to_string(cfg.w) + " must be divisible by 16");
        if (cfg.in_channels < 1) throw ConfigError("SegmentorNet: in_channels must be >= 1");
    }

    const Config& config() const { return cfg_; }

    /// tiled: in_channels x h x w. Returns the h x w logit map.
    std::vector<T> forward(const std::vector<T>& tiled) {
        const int h = cfg_.h, w = cfg_.w;
        if (tiled.size() != static_cast<std::size_t>(cfg_.in_channels) * h * w)
            throw DimensionError("SegmentorNet: input size mismatch");
        up_out_.clear();
        a_stem_ = stem_.forward(tiled, h, w, c_stem_);
        nn::relu_inplace(a_stem_);
        a_d1_ = d1_.forward(a_stem_, h, w, c_d1_);
        nn::relu_inplace(a_d1_);
        a_r1_ = r1_.forward(a_d1_, h / 2, w / 2, c_r1_);
        nn::relu_inplace(a_r1_);
        a_d2_ = d2_.forward(a_r1_, h / 2, w / 2, c_d2_);
        nn::relu_inplace(a_d2_);
        a_r2_ = r2_.forward(a_d2_, h / 4, w / 4, c_r2_);
        nn::relu_inplace(a_r2_);
        a_d3_ = d3_.forward(a_r2_, h / 4, w / 4, c_d3_);
        nn::relu_inplace(a_d3_);
        a_r3_ = r3_.forward(a_d3_, h / 8, w / 8, c_r3_);
        nn::relu_inplace(a_r3_);
        a_d4_ = d4_.forward(a_r3_, h / 8, w / 8, c_d4_);
        nn::relu_inplace(a_d4_);
        a_r4_ = r4_.forward(a_d4_, h / 16, w / 16, c_r4_);
        nn::relu_inplace(a_r4_);

        a_ur1_ = up_stage(u1_, ur1_, a_r4_, a_r3_, h / 16, w / 16, c_u1_, c_ur1_);
        a_ur2_ = up_stage(u2_, ur2_, a_ur1_, a_r2_, h / 8, w / 8, c_u2_, c_ur2_);
        a_ur3_ = up_stage(u3_, ur3_, a_ur2_, a_r1_, h / 4, w / 4, c_u3_, c_ur3_);
        a_ur4_ = up_stage(u4_, ur4_, a_ur3_, a_stem_, h / 2, w / 2, c_u4_, c_ur4_);
        return head_.forward(a_ur4_, h, w, c_head_);
    }

    void backward(const std::vector<T>& grad_logits) {
        const int h = cfg_.h, w = cfg_.w;
        std::vector<T> g = head_.backward(grad_logits, c_head_);
        std::vector<T> g_stem_skip, g_r1_skip, g_r2_skip, g_r3_skip;
        g = up_stage_backward(u4_, ur4_, a_ur4_, g, 8, g_stem_skip, c_u4_, c_ur4_);
        g = up_stage_backward(u3_, ur3_, a_ur3_, g, 16, g_r1_skip, c_u3_, c_ur3_);
        g = up_stage_backward(u2_, ur2_, a_ur2_, g, 32, g_r2_skip, c_u2_, c_ur2_);
        g = up_stage_backward(u1_, ur1_, a_ur1_, g, 64, g_r3_skip, c_u1_, c_ur1_);

        nn::relu_backward(a_r4_, g);
        g = r4_.backward(g, c_r4_);
        nn::relu_backward(a_d4_, g);
        g = d4_.backward(g, c_d4_);
        add_into(g, g_r3_skip);
        nn::relu_backward(a_r3_, g);
        g = r3_.backward(g, c_r3_);
        nn::relu_backward(a_d3_, g);
        g = d3_.backward(g, c_d3_);
        add_into(g, g_r2_skip);
        nn::relu_backward(a_r2_, g);
        g = r2_.backward(g, c_r2_);
        nn::relu_backward(a_d2_, g);
        g = d2_.backward(g, c_d2_);
        add_into(g, g_r1_skip);
        nn::relu_backward(a_r1_, g);
        g = r1_.backward(g, c_r1_);
        nn::relu_backward(a_d1_, g);
        g = d1_.backward(g, c_d1_);
        add_into(g, g_stem_skip);
        nn::relu_backward(a_stem_, g);
        stem_.backward(g, c_stem_);
    }

    void visit_params(const nn::ParamFn<T>& f) {
        stem_.visit_params(f);
        d1_.visit_params(f);
        r1_.visit_params(f);
        d2_.visit_params(f);
        r2_.visit_params(f);
        d3_.visit_params(f);
        r3_.visit_params(f);
        d4_.visit_params(f);
        r4_.visit_params(f);
        u1_.visit_params(f);
        ur1_.visit_params(f);
        u2_.visit_params(f);
        ur2_.visit_params(f);
        u3_.visit_params(f);
        ur3_.visit_params(f);
        u4_.visit_params(f);
        ur4_.visit_params(f);
        head_.visit_params(f);
    }

private:
    static void add_into(std::vector<T>& dst, const std::vector<T>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }

    /// deconv the bottom feature to 2x scale, concatenate the skip, refine.
    std::vector<T> up_stage(nn::Deconv2d<T>& up, nn::Conv2d<T>& refine, const std::vector<T>& in,
                            const std::vector<T>& skip, int h_in, int w_in,
                            typename nn::Deconv2d<T>::Cache& uc,
                            typename nn::Conv2d<T>::Cache& rc) {
        std::vector<T> upped = up.forward(in, h_in, w_in, uc);
        nn::relu_inplace(upped);
        up_out_.push_back(upped);
        std::vector<T> cat;
        cat.reserve(upped.size() + skip.size());
        cat.insert(cat.end(), upped.begin(), upped.end());
        cat.insert(cat.end(), skip.begin(), skip.end());
        std::vector<T> out = refine.forward(cat, 2 * h_in, 2 * w_in, rc);
        nn::relu_inplace(out);
        return out;
    }

    std::vector<T> up_stage_backward(nn::Deconv2d<T>& up, nn::Conv2d<T>& refine,
                                     const std::vector<T>& stage_out, std::vector<T>& gout,
                                     int, std::vector<T>& g_skip,
                                     typename nn::Deconv2d<T>::Cache& uc,
                                     typename nn::Conv2d<T>::Cache& rc) {
        nn::relu_backward(stage_out, gout);
        std::vector<T> gcat = refine.backward(gout, rc);
        const std::vector<T>& upped = up_out_.back();
        std::vector<T> gup(gcat.begin(), gcat.begin() + static_cast<std::ptrdiff_t>(upped.size()));
        g_skip.assign(gcat.begin() + static_cast<std::ptrdiff_t>(upped.size()), gcat.end());
        nn::relu_backward(upped, gup);
        up_out_.pop_back();
        return up.backward(gup, uc);
    }

    Config cfg_;
    Rng rng_;
    nn::Conv2d<T> stem_;
    nn::Conv2d<T> d1_, r1_, d2_, r2_, d3_, r3_, d4_, r4_;
    nn::Deconv2d<T> u1_;
    nn::Conv2d<T> ur1_;
    nn::Deconv2d<T> u2_;
    nn::Conv2d<T> ur2_;
    nn::Deconv2d<T> u3_;
    nn::Conv2d<T> ur3_;
    nn::Deconv2d<T> u4_;
    nn::Conv2d<T> ur4_;
    nn::Conv2d<T> head_;

    typename nn::Conv2d<T>::Cache c_stem_, c_r1_, c_r2_, c_r3_, c_r4_, c_d1_, c_d2_, c_d3_,
        c_d4_, c_ur1_, c_ur2_, c_ur3_, c_ur4_, c_head_;
    typename nn::Deconv2d<T>::Cache c_u1_, c_u2_, c_u3_, c_u4_;
    std::vector<T> a_stem_, a_d1_, a_r1_, a_d2_, a_r2_, a_d3_, a_r3_, a_d4_, a_r4_, a_ur1_,
        a_ur2_, a_ur3_, a_ur4_;
    std::vector<std::vector<T>> up_out_;  // relu'd deconv outputs, stack order
};

// ---------------------------------------------------------------------------
// Forgery detector: shared residual CNN turning each (visual, wireless) mask
// pair into a 128-d feature, LSTM over the g steps, FC head.
// ---------------------------------------------------------------------------

template <class T>
struct ResBlock {
    nn::Conv2d<T> conv1, conv2, proj;

    struct Cache {
        typename nn::Conv2d<T>::Cache c1, c2, cp;
        std::vector<T> a1, out;
    };

    ResBlock(int cin, int cout, Rng& rng)
        : conv1(cin, cout, 3, 2, 1, rng),
          conv2(cout, cout, 3, 1, 1, rng),
          proj(cin, cout, 1, 2, 0, rng) {}

    std::vector<T> forward(const std::vector<T>& in, int h, int w, Cache& cache) const {
        cache.a1 = conv1.forward(in, h, w, cache.c1);
        nn::relu_inplace(cache.a1);
        std::vector<T> out = conv2.forward(cache.a1, (h + 1) / 2, (w + 1) / 2, cache.c2);
        const std::vector<T> sc = proj.forward(in, h, w, cache.cp);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += sc[i];
        nn::relu_inplace(out);
        cache.out = out;
        return out;
    }

    std::vector<T> backward(std::vector<T>& gout, Cache& cache) {
        nn::relu_backward(cache.out, gout);
        std::vector<T> gin = proj.backward(gout, cache.cp);
        std::vector<T> g1 = conv2.backward(gout, cache.c2);
        nn::relu_backward(cache.a1, g1);
        const std::vector<T> g0 = conv1.backward(g1, cache.c1);
        for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += g0[i];
        return gin;
    }

    void visit_params(const nn::ParamFn<T>& f) {
        conv1.visit_params(f);
        conv2.visit_params(f);
        proj.visit_params(f);
    }
};

template <class T>
class ForgeryNet {
public:
    struct Config {
        int h = 96;
        int w = 128;
        int g = 7;
    };
    static constexpr int kFeatureDim = 128;

    struct StepCache {
        typename nn::Conv2d<T>::Cache c_stem;
        std::vector<T> a_stem;
        typename ResBlock<T>::Cache b1, b2, b3, b4;
        int h4 = 0, w4 = 0;  // spatial size after the last block
    };

    struct HeadCache {
        typename nn::Lstm<T>::Cache lstm;
        typename nn::Linear<T>::Cache f1, f2;
        std::vector<T> f1out;
    };

    ForgeryNet(Config cfg, std::uint64_t seed)
        : cfg_(cfg),
          rng_(seed),
          stem_(2, 8, 3, 2, 1, rng_),
          block1_(8, 16, rng_),
          block2_(16, 32, rng_),
          block3_(32, 64, rng_),
          block4_(64, kFeatureDim, rng_),
          lstm_(kFeatureDim, kFeatureDim, rng_),
          fc1_(kFeatureDim, 64, rng_),
          fc2_(64, 1, rng_) {
        if (cfg.h % 16 != 0 || cfg.w % 16 != 0)
            throw ConfigError("ForgeryNet: working size must be divisible by 16");
        if (cfg.g < 1) throw ConfigError("ForgeryNet: g must be >= 1");
    }

    const Config& config() const { return cfg_; }

    /// One step: input 2 x h x w (visual mask plane then wireless mask
    /// plane) -> 128-d feature.
    std::vector<T> step_forward(const std::vector<T>& input, StepCache& sc) const {
        if (input.size() != static_cast<std::size_t>(2) * cfg_.h * cfg_.w)
            throw DimensionError("ForgeryNet: step input size mismatch");
        sc.a_stem = stem_.forward(input, cfg_.h, cfg_.w, sc.c_stem);
        nn::relu_inplace(sc.a_stem);
        int h = cfg_.h / 2, w = cfg_.w / 2;
        std::vector<T> x = block1_.forward(sc.a_stem, h, w, sc.b1);
        h /= 2;
        w /= 2;
        x = block2_.forward(x, h, w, sc.b2);
        h /= 2;
        w /= 2;
        x = block3_.forward(x, h, w, sc.b3);
        h /= 2;
        w /= 2;
        x = block4_.forward(x, h, w, sc.b4);
        sc.h4 = (h + 1) / 2;
        sc.w4 = (w + 1) / 2;
        const int cells = sc.h4 * sc.w4;
        std::vector<T> feat(kFeatureDim);
        for (int c = 0; c < kFeatureDim; ++c) {
            T acc = T(0);
            for (int i = 0; i < cells; ++i) acc += x[static_cast<std::size_t>(c) * cells + i];
            feat[static_cast<std::size_t>(c)] = acc / static_cast<T>(cells);
        }
        return feat;
    }

    void step_backward(const std::vector<T>& gfeat, StepCache& sc) {
        const int cells = sc.h4 * sc.w4;
        std::vector<T> g(static_cast<std::size_t>(kFeatureDim) * cells);
        for (int c = 0; c < kFeatureDim; ++c) {
            const T gc = gfeat[static_cast<std::size_t>(c)] / static_cast<T>(cells);
            for (int i = 0; i < cells; ++i) g[static_cast<std::size_t>(c) * cells + i] = gc;
        }
        g = block4_.backward(g, sc.b4);
        g = block3_.backward(g, sc.b3);
        g = block2_.backward(g, sc.b2);
        g = block1_.backward(g, sc.b1);
        nn::relu_backward(sc.a_stem, g);
        stem_.backward(g, sc.c_stem);
    }

    /// LSTM + FC head over per-step features. Must see exactly g features.
    T head_forward(const std::vector<std::vector<T>>& feats, HeadCache& hc) const {
        if (static_cast<int>(feats.size()) != cfg_.g)
            throw DimensionError("ForgeryNet: clip has " + std::to_string(feats.size()) +
                                 " steps, expected g=" + std::to_string(cfg_.g));
        const std::vector<T> h = lstm_.forward(feats, hc.lstm);
        hc.f1out = fc1_.forward(h, hc.f1);
        nn::relu_inplace(hc.f1out);
        return fc2_.forward(hc.f1out, hc.f2)[0];
    }

    std::vector<std::vector<T>> head_backward(T dlogit, HeadCache& hc) {
        std::vector<T> g = fc2_.backward({dlogit}, hc.f2);
        nn::relu_backward(hc.f1out, g);
        g = fc1_.backward(g, hc.f1);
        return lstm_.backward(g, hc.lstm);
    }

    /// Full clip forward: g inputs of 2 x h x w.
    T forward(const std::vector<std::vector<T>>& clip) {
        if (static_cast<int>(clip.size()) != cfg_.g)
            throw DimensionError("ForgeryNet: clip has " + std::to_string(clip.size()) +
                                 " steps, expected g=" + std::to_string(cfg_.g));
        steps_.assign(clip.size(), {});
        std::vector<std::vector<T>> feats(clip.size());
        for (std::size_t t = 0; t < clip.size(); ++t)
            feats[t] = step_forward(clip[t], steps_[t]);
        return head_forward(feats, head_);
    }

    void backward(T dlogit) {
        std::vector<std::vector<T>> gfeats = head_backward(dlogit, head_);
        for (std::size_t t = steps_.size(); t-- > 0;) step_backward(gfeats[t], steps_[t]);
    }

    void visit_params(const nn::ParamFn<T>& f) {
        stem_.visit_params(f);
        block1_.visit_params(f);
        block2_.visit_params(f);
        block3_.visit_params(f);
        block4_.visit_params(f);
        lstm_.visit_params(f);
        fc1_.visit_params(f);
        fc2_.visit_params(f);
    }

private:
    Config cfg_;
    Rng rng_;
    nn::Conv2d<T> stem_;
    ResBlock<T> block1_, block2_, block3_, block4_;
    nn::Lstm<T> lstm_;
    nn::Linear<T> fc1_, fc2_;

    std::vector<StepCache> steps_;
    HeadCache head_;
};

// ---------------------------------------------------------------------------
// Checkpoints: "CKP1" magic, JSON fingerprint, then all parameter arrays as
// f32 in visit order. A loader rejects any structural mismatch.
// ---------------------------------------------------------------------------

struct Fingerprint {
    std::string module;  // "detector" | "segmentor" | "forgery"
    int m = 0, g = 0;
    int k = 0, n_tx = 0, n_rx = 0;
    int h = 0, w = 0;
    int epoch = 0;          // informational
    std::uint64_t seed = 0; // informational

    /// Structural equality; epoch and seed describe provenance, not shape.
    bool compatible(const Fingerprint& other) const {
        return module == other.module && m == other.m && g == other.g && k == other.k &&
               n_tx == other.n_tx && n_rx == other.n_rx && h == other.h && w == other.w;
    }
};

inline constexpr char kCkptMagic[4] = {'C', 'K', 'P', '1'};

inline nlohmann::json fingerprint_json(const Fingerprint& fp) {
    return nlohmann::json{{"module", fp.module}, {"m", fp.m},       {"g", fp.g},
                          {"k", fp.k},           {"n_tx", fp.n_tx}, {"n_rx", fp.n_rx},
                          {"h", fp.h},           {"w", fp.w},       {"epoch", fp.epoch},
                          {"seed", fp.seed}};
}

inline Fingerprint fingerprint_from_json(const nlohmann::json& j) {
    Fingerprint fp;
    fp.module = j.at("module").get<std::string>();
    fp.m = j.at("m").get<int>();
    fp.g = j.at("g").get<int>();
    fp.k = j.at("k").get<int>();
    fp.n_tx = j.at("n_tx").get<int>();
    fp.n_rx = j.at("n_rx").get<int>();
    fp.h = j.at("h").get<int>();
    fp.w = j.at("w").get<int>();
    fp.epoch = j.at("epoch").get<int>();
    fp.seed = j.at("seed").get<std::uint64_t>();
    return fp;
}

template <class Net>
inline void save_checkpoint(const std::filesystem::path& path, const Fingerprint& fp, Net& net) {
    std::string out;
    out.append(kCkptMagic, 4);
    const std::string meta = fingerprint_json(fp).dump();
    io::put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out += meta;
    std::uint64_t count = 0;
    net.visit_params([&](std::vector<float>& w, std::vector<float>&) { count += w.size(); });
    io::put_u64(out, count);
    net.visit_params([&](std::vector<float>& w, std::vector<float>&) {
        for (float v : w) io::put_f32(out, v);
    });
    io::write_file(path, out);
}

/// Reads the fingerprint without loading weights.
inline Fingerprint peek_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    io::Reader r(bytes, path.string());
    if (r.raw(4) != std::string(kCkptMagic, 4))
        throw ParseError(path.string() + ": bad magic, expected CKP1");
    const std::uint32_t meta_len = r.u32();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(r.raw(meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": fingerprint: " + e.what());
    }
    return fingerprint_from_json(j);
}

template <class Net>
inline Fingerprint load_checkpoint(const std::filesystem::path& path, const Fingerprint& expected,
                                   Net& net) {
    const std::string bytes = io::read_file(path);
    io::Reader r(bytes, path.string());
    if (r.raw(4) != std::string(kCkptMagic, 4))
        throw ParseError(path.string() + ": bad magic, expected CKP1");
    const std::uint32_t meta_len = r.u32();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(r.raw(meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": fingerprint: " + e.what());
    }
    const Fingerprint fp = fingerprint_from_json(j);
    if (!fp.compatible(expected))
        throw ValidationError(path.string() + ": checkpoint fingerprint " +
                              fingerprint_json(fp).dump() + " does not match expected " +
                              fingerprint_json(expected).dump());
    const std::uint64_t count = r.u64();
    std::uint64_t expected_count = 0;
    net.visit_params([&](std::vector<float>& w, std::vector<float>&) { expected_count += w.size(); });
    if (count != expected_count)
        throw ParseError(path.string() + ": checkpoint holds " + std::to_string(count) +
                         " parameters, model needs " + std::to_string(expected_count));
    net.visit_params([&](std::vector<float>& w, std::vector<float>&) {
        for (float& v : w) v = r.f32();
    });
    if (!r.eof())
        throw ParseError(path.string() + ": trailing bytes after parameter data");
    return fp;
}

}  // namespace csiguard::models
