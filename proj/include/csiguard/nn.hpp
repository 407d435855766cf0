#pragma once

// Minimal neural-network toolkit: conv / deconv / linear / LSTM layers with
// explicit forward caches and hand-written backward passes, binary
// cross-entropy and Dice losses, and RMSprop / Adam optimizers. Templated on
// the scalar type so gradient checks can run in double while training runs in
// float. Eigen is used only as the matrix-multiply kernel.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "csiguard/common.hpp"

namespace csiguard::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapM = Eigen::Map<Mat<T>>;
template <class T>
using CMapM = Eigen::Map<const Mat<T>>;

/// Callback receiving each (weights, grads) array pair of a module.
template <class T>
using ParamFn = std::function<void(std::vector<T>&, std::vector<T>&)>;

template <class T>
inline T sigmoid(T z) {
    if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
}

inline int conv_out_len(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

template <class T>
inline void relu_inplace(std::vector<T>& v) {
    for (T& x : v)
        if (x < T(0)) x = T(0);
}

/// grad *= 1[out > 0]; uses the forward output, valid since out>0 <=> pre>0.
template <class T>
inline void relu_backward(const std::vector<T>& out, std::vector<T>& grad) {
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i] <= T(0)) grad[i] = T(0);
}

namespace init {

/// He-uniform over fan_in.
template <class T>
inline void he_uniform(std::vector<T>& w, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (T& x : w) x = static_cast<T>(rng.uniform(-bound, bound));
}

template <class T>
inline void lstm_uniform(std::vector<T>& w, int hidden, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (T& x : w) x = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace init

// ---------------------------------------------------------------------------
// 1-D convolution (direct loops; used on short subcarrier axes)
// ---------------------------------------------------------------------------

template <class T>
class Conv1d {
public:
    struct Cache {
        std::vector<T> in;
        int lin = 0, lout = 0;
    };

    Conv1d(int cin, int cout, int k, int stride, int pad, Rng& rng)
        : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad) {
        w_.resize(static_cast<std::size_t>(cout) * cin * k);
        b_.assign(static_cast<std::size_t>(cout), T(0));
        init::he_uniform(w_, cin * k, rng);
        gw_.assign(w_.size(), T(0));
        gb_.assign(b_.size(), T(0));
    }

    int out_len(int lin) const { return conv_out_len(lin, k_, stride_, pad_); }
    int out_channels() const { return cout_; }

    /// in: cin x lin row-major -> cout x out_len(lin)
    std::vector<T> forward(const std::vector<T>& in, int lin, Cache& cache) const {
        const int lout = out_len(lin);
        cache.in = in;
        cache.lin = lin;
        cache.lout = lout;
        std::vector<T> out(static_cast<std::size_t>(cout_) * lout);
        for (int co = 0; co < cout_; ++co) {
            for (int o = 0; o < lout; ++o) {
                T acc = b_[static_cast<std::size_t>(co)];
                const int base = o * stride_ - pad_;
                for (int ci = 0; ci < cin_; ++ci) {
                    for (int kk = 0; kk < k_; ++kk) {
                        const int p = base + kk;
                        if (p < 0 || p >= lin) continue;
                        acc += w_[(static_cast<std::size_t>(co) * cin_ + ci) * k_ + kk] *
                               in[static_cast<std::size_t>(ci) * lin + p];
                    }
                }
                out[static_cast<std::size_t>(co) * lout + o] = acc;
            }
        }
        return out;
    }

    /// Accumulates weight grads; returns grad wrt the cached input.
    std::vector<T> backward(const std::vector<T>& gout, const Cache& cache) {
        std::vector<T> gin(static_cast<std::size_t>(cin_) * cache.lin, T(0));
        for (int co = 0; co < cout_; ++co) {
            for (int o = 0; o < cache.lout; ++o) {
                const T g = gout[static_cast<std::size_t>(co) * cache.lout + o];
                gb_[static_cast<std::size_t>(co)] += g;
                const int base = o * stride_ - pad_;
                for (int ci = 0; ci < cin_; ++ci) {
                    for (int kk = 0; kk < k_; ++kk) {
                        const int p = base + kk;
                        if (p < 0 || p >= cache.lin) continue;
                        const std::size_t wi =
                            (static_cast<std::size_t>(co) * cin_ + ci) * k_ + kk;
                        gw_[wi] += g * cache.in[static_cast<std::size_t>(ci) * cache.lin + p];
                        gin[static_cast<std::size_t>(ci) * cache.lin + p] += g * w_[wi];
                    }
                }
            }
        }
        return gin;
    }

    void visit_params(const ParamFn<T>& f) {
        f(w_, gw_);
        f(b_, gb_);
    }

private:
    int cin_, cout_, k_, stride_, pad_;
    std::vector<T> w_, b_, gw_, gb_;
};

// ---------------------------------------------------------------------------
// 2-D convolution via im2col + GEMM
// ---------------------------------------------------------------------------

template <class T>
class Conv2d {
public:
    struct Cache {
        std::vector<T> col;  // (cin*k*k) x (hout*wout)
        int h = 0, w = 0, hout = 0, wout = 0;
    };

    Conv2d(int cin, int cout, int k, int stride, int pad, Rng& rng)
        : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad) {
        w_.resize(static_cast<std::size_t>(cout) * cin * k * k);
        b_.assign(static_cast<std::size_t>(cout), T(0));
        init::he_uniform(w_, cin * k * k, rng);
        gw_.assign(w_.size(), T(0));
        gb_.assign(b_.size(), T(0));
    }

    int out_channels() const { return cout_; }
    int out_h(int h) const { return conv_out_len(h, k_, stride_, pad_); }
    int out_w(int w) const { return conv_out_len(w, k_, stride_, pad_); }

    /// in: cin x h x w row-major -> cout x out_h x out_w
    std::vector<T> forward(const std::vector<T>& in, int h, int w, Cache& cache) const {
        const int hout = out_h(h), wout = out_w(w);
        const int patch = cin_ * k_ * k_;
        const std::size_t cols = static_cast<std::size_t>(hout) * wout;
        cache.h = h;
        cache.w = w;
        cache.hout = hout;
        cache.wout = wout;
        cache.col.assign(static_cast<std::size_t>(patch) * cols, T(0));
        im2col(in, h, w, hout, wout, cache.col);

        std::vector<T> out(static_cast<std::size_t>(cout_) * cols);
        CMapM<T> wm(w_.data(), cout_, patch);
        CMapM<T> cm(cache.col.data(), patch, static_cast<Eigen::Index>(cols));
        MapM<T> om(out.data(), cout_, static_cast<Eigen::Index>(cols));
        om.noalias() = wm * cm;
        for (int co = 0; co < cout_; ++co) om.row(co).array() += b_[static_cast<std::size_t>(co)];
        return out;
    }

    std::vector<T> backward(const std::vector<T>& gout, const Cache& cache) {
        const int patch = cin_ * k_ * k_;
        const std::size_t cols = static_cast<std::size_t>(cache.hout) * cache.wout;
        CMapM<T> gm(gout.data(), cout_, static_cast<Eigen::Index>(cols));
        CMapM<T> cm(cache.col.data(), patch, static_cast<Eigen::Index>(cols));
        MapM<T> gwm(gw_.data(), cout_, patch);
        gwm.noalias() += gm * cm.transpose();
        for (int co = 0; co < cout_; ++co) gb_[static_cast<std::size_t>(co)] += gm.row(co).sum();

        std::vector<T> gcol(static_cast<std::size_t>(patch) * cols);
        MapM<T> gcm(gcol.data(), patch, static_cast<Eigen::Index>(cols));
        CMapM<T> wm(w_.data(), cout_, patch);
        gcm.noalias() = wm.transpose() * gm;

        std::vector<T> gin(static_cast<std::size_t>(cin_) * cache.h * cache.w, T(0));
        col2im(gcol, cache.h, cache.w, cache.hout, cache.wout, gin);
        return gin;
    }

    void visit_params(const ParamFn<T>& f) {
        f(w_, gw_);
        f(b_, gb_);
    }

private:
    void im2col(const std::vector<T>& in, int h, int w, int hout, int wout,
                std::vector<T>& col) const {
        const std::size_t cols = static_cast<std::size_t>(hout) * wout;
        std::size_t row = 0;
        for (int ci = 0; ci < cin_; ++ci) {
            for (int ky = 0; ky < k_; ++ky) {
                for (int kx = 0; kx < k_; ++kx, ++row) {
                    T* dst = col.data() + row * cols;
                    for (int oy = 0; oy < hout; ++oy) {
                        const int y = oy * stride_ - pad_ + ky;
                        if (y < 0 || y >= h) {
                            dst += wout;
                            continue;
                        }
                        const T* src = in.data() + (static_cast<std::size_t>(ci) * h + y) * w;
                        for (int ox = 0; ox < wout; ++ox, ++dst) {
                            const int x = ox * stride_ - pad_ + kx;
                            if (x >= 0 && x < w) *dst = src[x];
                        }
                    }
                }
            }
        }
    }

    void col2im(const std::vector<T>& col, int h, int w, int hout, int wout,
                std::vector<T>& im) const {
        const std::size_t cols = static_cast<std::size_t>(hout) * wout;
        std::size_t row = 0;
        for (int ci = 0; ci < cin_; ++ci) {
            for (int ky = 0; ky < k_; ++ky) {
                for (int kx = 0; kx < k_; ++kx, ++row) {
                    const T* src = col.data() + row * cols;
                    for (int oy = 0; oy < hout; ++oy) {
                        const int y = oy * stride_ - pad_ + ky;
                        if (y < 0 || y >= h) {
                            src += wout;
                            continue;
                        }
                        T* dst = im.data() + (static_cast<std::size_t>(ci) * h + y) * w;
                        for (int ox = 0; ox < wout; ++ox, ++src) {
                            const int x = ox * stride_ - pad_ + kx;
                            if (x >= 0 && x < w) dst[x] += *src;
                        }
                    }
                }
            }
        }
    }

    int cin_, cout_, k_, stride_, pad_;
    std::vector<T> w_, b_, gw_, gb_;
};

// ---------------------------------------------------------------------------
// 2-D transposed convolution, kernel 2, stride 2 (exact 2x upsampling; output
// patches do not overlap, so each output pixel has a single source)
// ---------------------------------------------------------------------------

template <class T>
class Deconv2d {
public:
    struct Cache {
        std::vector<T> in;
        int h = 0, w = 0;
    };

    Deconv2d(int cin, int cout, Rng& rng) : cin_(cin), cout_(cout) {
        w_.resize(static_cast<std::size_t>(cin) * cout * 4);  // cin x (cout*2*2)
        b_.assign(static_cast<std::size_t>(cout), T(0));
        init::he_uniform(w_, cin, rng);
        gw_.assign(w_.size(), T(0));
        gb_.assign(b_.size(), T(0));
    }

    int out_channels() const { return cout_; }

    /// in: cin x h x w -> cout x 2h x 2w
    std::vector<T> forward(const std::vector<T>& in, int h, int w, Cache& cache) const {
        cache.in = in;
        cache.h = h;
        cache.w = w;
        const std::size_t cells = static_cast<std::size_t>(h) * w;
        std::vector<T> patches(static_cast<std::size_t>(cout_) * 4 * cells);
        CMapM<T> wm(w_.data(), cin_, cout_ * 4);
        CMapM<T> im(in.data(), cin_, static_cast<Eigen::Index>(cells));
        MapM<T> pm(patches.data(), cout_ * 4, static_cast<Eigen::Index>(cells));
        pm.noalias() = wm.transpose() * im;

        std::vector<T> out(static_cast<std::size_t>(cout_) * (2 * h) * (2 * w));
        for (int co = 0; co < cout_; ++co) {
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const T* src = patches.data() + (static_cast<std::size_t>(co) * 4 +
                                                     static_cast<std::size_t>(dy) * 2 + dx) *
                                                        cells;
                    for (int y = 0; y < h; ++y) {
                        T* dst = out.data() +
                                 (static_cast<std::size_t>(co) * 2 * h + 2 * y + dy) * (2 * w) + dx;
                        for (int x = 0; x < w; ++x) dst[2 * x] = src[y * w + x] + b_[co];
                    }
                }
            }
        }
        return out;
    }

    std::vector<T> backward(const std::vector<T>& gout, const Cache& cache) {
        const int h = cache.h, w = cache.w;
        const std::size_t cells = static_cast<std::size_t>(h) * w;
        std::vector<T> gpatches(static_cast<std::size_t>(cout_) * 4 * cells);
        for (int co = 0; co < cout_; ++co) {
            T bsum = T(0);
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    T* dst = gpatches.data() + (static_cast<std::size_t>(co) * 4 +
                                                static_cast<std::size_t>(dy) * 2 + dx) *
                                                   cells;
                    for (int y = 0; y < h; ++y) {
                        const T* src =
                            gout.data() +
                            (static_cast<std::size_t>(co) * 2 * h + 2 * y + dy) * (2 * w) + dx;
                        for (int x = 0; x < w; ++x) {
                            dst[y * w + x] = src[2 * x];
                            bsum += src[2 * x];
                        }
                    }
                }
            }
            gb_[static_cast<std::size_t>(co)] += bsum;
        }
        CMapM<T> pm(gpatches.data(), cout_ * 4, static_cast<Eigen::Index>(cells));
        CMapM<T> im(cache.in.data(), cin_, static_cast<Eigen::Index>(cells));
        MapM<T> gwm(gw_.data(), cin_, cout_ * 4);
        gwm.noalias() += im * pm.transpose();

        std::vector<T> gin(static_cast<std::size_t>(cin_) * cells);
        CMapM<T> wm(w_.data(), cin_, cout_ * 4);
        MapM<T> gim(gin.data(), cin_, static_cast<Eigen::Index>(cells));
        gim.noalias() = wm * pm;
        return gin;
    }

    void visit_params(const ParamFn<T>& f) {
        f(w_, gw_);
        f(b_, gb_);
    }

private:
    int cin_, cout_;
    std::vector<T> w_, b_, gw_, gb_;
};

// ---------------------------------------------------------------------------
// Fully connected layer
// ---------------------------------------------------------------------------

template <class T>
class Linear {
public:
    struct Cache {
        std::vector<T> in;
    };

    Linear(int in, int out, Rng& rng) : in_(in), out_(out) {
        w_.resize(static_cast<std::size_t>(out) * in);
        b_.assign(static_cast<std::size_t>(out), T(0));
        init::he_uniform(w_, in, rng);
        gw_.assign(w_.size(), T(0));
        gb_.assign(b_.size(), T(0));
    }

    std::vector<T> forward(const std::vector<T>& in, Cache& cache) const {
        cache.in = in;
        std::vector<T> out(b_.begin(), b_.end());
        for (int o = 0; o < out_; ++o) {
            T acc = out[static_cast<std::size_t>(o)];
            const T* wr = w_.data() + static_cast<std::size_t>(o) * in_;
            for (int i = 0; i < in_; ++i) acc += wr[i] * in[static_cast<std::size_t>(i)];
            out[static_cast<std::size_t>(o)] = acc;
        }
        return out;
    }

    std::vector<T> backward(const std::vector<T>& gout, const Cache& cache) {
        std::vector<T> gin(static_cast<std::size_t>(in_), T(0));
        for (int o = 0; o < out_; ++o) {
            const T g = gout[static_cast<std::size_t>(o)];
            gb_[static_cast<std::size_t>(o)] += g;
            const T* wr = w_.data() + static_cast<std::size_t>(o) * in_;
            T* gwr = gw_.data() + static_cast<std::size_t>(o) * in_;
            for (int i = 0; i < in_; ++i) {
                gwr[i] += g * cache.in[static_cast<std::size_t>(i)];
                gin[static_cast<std::size_t>(i)] += g * wr[i];
            }
        }
        return gin;
    }

    void visit_params(const ParamFn<T>& f) {
        f(w_, gw_);
        f(b_, gb_);
    }

private:
    int in_, out_;
    std::vector<T> w_, b_, gw_, gb_;
};

// ---------------------------------------------------------------------------
// Single-layer LSTM over a short sequence; returns the final hidden state and
// backpropagates through time into every step input. Gate order i, f, g, o.
// ---------------------------------------------------------------------------

template <class T>
class Lstm {
public:
    struct Cache {
        std::vector<std::vector<T>> x, i, f, g, o, c, h;
        int steps = 0;
    };

    Lstm(int input, int hidden, Rng& rng) : in_(input), hid_(hidden) {
        w_ih_.resize(static_cast<std::size_t>(4 * hidden) * input);
        w_hh_.resize(static_cast<std::size_t>(4 * hidden) * hidden);
        b_.resize(static_cast<std::size_t>(4 * hidden));
        init::lstm_uniform(w_ih_, hidden, rng);
        init::lstm_uniform(w_hh_, hidden, rng);
        init::lstm_uniform(b_, hidden, rng);
        gw_ih_.assign(w_ih_.size(), T(0));
        gw_hh_.assign(w_hh_.size(), T(0));
        gb_.assign(b_.size(), T(0));
    }

    int hidden() const { return hid_; }

    /// steps: sequence of input vectors (each length `input`); returns h_T.
    std::vector<T> forward(const std::vector<std::vector<T>>& steps, Cache& cache) const {
        const int n = static_cast<int>(steps.size());
        cache.steps = n;
        cache.x = steps;
        cache.i.assign(n, {});
        cache.f.assign(n, {});
        cache.g.assign(n, {});
        cache.o.assign(n, {});
        cache.c.assign(n, {});
        cache.h.assign(n, {});
        std::vector<T> h(static_cast<std::size_t>(hid_), T(0));
        std::vector<T> c(static_cast<std::size_t>(hid_), T(0));
        std::vector<T> gates(static_cast<std::size_t>(4 * hid_));
        for (int t = 0; t < n; ++t) {
            for (int r = 0; r < 4 * hid_; ++r) {
                T acc = b_[static_cast<std::size_t>(r)];
                const T* wi = w_ih_.data() + static_cast<std::size_t>(r) * in_;
                for (int k = 0; k < in_; ++k) acc += wi[k] * steps[t][static_cast<std::size_t>(k)];
                const T* wh = w_hh_.data() + static_cast<std::size_t>(r) * hid_;
                for (int k = 0; k < hid_; ++k) acc += wh[k] * h[static_cast<std::size_t>(k)];
                gates[static_cast<std::size_t>(r)] = acc;
            }
            auto& ci = cache.i[t];
            auto& cf = cache.f[t];
            auto& cg = cache.g[t];
            auto& co = cache.o[t];
            ci.resize(hid_);
            cf.resize(hid_);
            cg.resize(hid_);
            co.resize(hid_);
            for (int k = 0; k < hid_; ++k) {
                ci[k] = sigmoid(gates[static_cast<std::size_t>(k)]);
                cf[k] = sigmoid(gates[static_cast<std::size_t>(hid_ + k)]);
                cg[k] = std::tanh(gates[static_cast<std::size_t>(2 * hid_ + k)]);
                co[k] = sigmoid(gates[static_cast<std::size_t>(3 * hid_ + k)]);
                c[static_cast<std::size_t>(k)] =
                    cf[k] * c[static_cast<std::size_t>(k)] + ci[k] * cg[k];
                h[static_cast<std::size_t>(k)] = co[k] * std::tanh(c[static_cast<std::size_t>(k)]);
            }
            cache.c[t] = c;
            cache.h[t] = h;
        }
        return h;
    }

    /// grad_h: gradient wrt the final hidden state. Returns per-step grads
    /// wrt the inputs.
    std::vector<std::vector<T>> backward(const std::vector<T>& grad_h, const Cache& cache) {
        const int n = cache.steps;
        std::vector<std::vector<T>> gx(static_cast<std::size_t>(n));
        std::vector<T> dh = grad_h;
        std::vector<T> dc(static_cast<std::size_t>(hid_), T(0));
        std::vector<T> da(static_cast<std::size_t>(4 * hid_));
        for (int t = n - 1; t >= 0; --t) {
            const auto& i = cache.i[t];
            const auto& f = cache.f[t];
            const auto& g = cache.g[t];
            const auto& o = cache.o[t];
            const auto& c = cache.c[t];
            const std::vector<T>* cprev = t > 0 ? &cache.c[t - 1] : nullptr;
            const std::vector<T>* hprev = t > 0 ? &cache.h[t - 1] : nullptr;
            for (int k = 0; k < hid_; ++k) {
                const T tc = std::tanh(c[static_cast<std::size_t>(k)]);
                const T dhk = dh[static_cast<std::size_t>(k)];
                const T dok = dhk * tc;
                const T dck = dc[static_cast<std::size_t>(k)] + dhk * o[k] * (T(1) - tc * tc);
                const T dik = dck * g[k];
                const T dfk = dck * (cprev ? (*cprev)[static_cast<std::size_t>(k)] : T(0));
                const T dgk = dck * i[k];
                da[static_cast<std::size_t>(k)] = dik * i[k] * (T(1) - i[k]);
                da[static_cast<std::size_t>(hid_ + k)] = dfk * f[k] * (T(1) - f[k]);
                da[static_cast<std::size_t>(2 * hid_ + k)] = dgk * (T(1) - g[k] * g[k]);
                da[static_cast<std::size_t>(3 * hid_ + k)] = dok * o[k] * (T(1) - o[k]);
                dc[static_cast<std::size_t>(k)] = dck * f[k];
            }
            gx[static_cast<std::size_t>(t)].assign(static_cast<std::size_t>(in_), T(0));
            std::fill(dh.begin(), dh.end(), T(0));
            for (int r = 0; r < 4 * hid_; ++r) {
                const T d = da[static_cast<std::size_t>(r)];
                gb_[static_cast<std::size_t>(r)] += d;
                T* gwi = gw_ih_.data() + static_cast<std::size_t>(r) * in_;
                const T* wi = w_ih_.data() + static_cast<std::size_t>(r) * in_;
                auto& gxt = gx[static_cast<std::size_t>(t)];
                for (int k = 0; k < in_; ++k) {
                    gwi[k] += d * cache.x[t][static_cast<std::size_t>(k)];
                    gxt[static_cast<std::size_t>(k)] += d * wi[k];
                }
                T* gwh = gw_hh_.data() + static_cast<std::size_t>(r) * hid_;
                const T* wh = w_hh_.data() + static_cast<std::size_t>(r) * hid_;
                for (int k = 0; k < hid_; ++k) {
                    const T hk = hprev ? (*hprev)[static_cast<std::size_t>(k)] : T(0);
                    gwh[k] += d * hk;
                    dh[static_cast<std::size_t>(k)] += d * wh[k];
                }
            }
        }
        return gx;
    }

    void visit_params(const ParamFn<T>& f) {
        f(w_ih_, gw_ih_);
        f(w_hh_, gw_hh_);
        f(b_, gb_);
    }

private:
    int in_, hid_;
    std::vector<T> w_ih_, w_hh_, b_, gw_ih_, gw_hh_, gb_;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Numerically stable binary cross-entropy on a raw logit.
template <class T>
inline T bce_with_logits(T logit, T target) {
    const T zmax = logit > T(0) ? logit : T(0);
    return zmax - logit * target + std::log(T(1) + std::exp(-std::abs(logit)));
}

template <class T>
inline T bce_with_logits_grad(T logit, T target) {
    return sigmoid(logit) - target;
}

/// Mean BCE over a logit map against binary targets.
template <class T>
inline T bce_map(const std::vector<T>& logits, const std::vector<T>& targets) {
    if (logits.size() != targets.size())
        throw DimensionError("bce_map: logit and target sizes differ");
    T sum = T(0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (targets[i] != T(0) && targets[i] != T(1))
            throw ValidationError("bce_map: targets must be 0 or 1");
        sum += bce_with_logits(logits[i], targets[i]);
    }
    return sum / static_cast<T>(logits.size());
}

/// dice = 1 - (2*sum(p*t) + smooth) / (sum(p) + sum(t) + smooth)
template <class T>
inline T dice_loss(const std::vector<T>& probs, const std::vector<T>& targets, T smooth = T(1)) {
    if (probs.size() != targets.size())
        throw DimensionError("dice_loss: prob and target sizes differ");
    if (!(smooth > T(0))) throw std::invalid_argument("dice_loss: smooth must be positive");
    T inter = T(0), psum = T(0), tsum = T(0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (targets[i] != T(0) && targets[i] != T(1))
            throw ValidationError("dice_loss: targets must be 0 or 1");
        inter += probs[i] * targets[i];
        psum += probs[i];
        tsum += targets[i];
    }
    return T(1) - (T(2) * inter + smooth) / (psum + tsum + smooth);
}

/// Combined segmentation loss on a logit map: dice(sigmoid(z), t) +
/// lambda_b * bce(z, t). Returns the loss; grad (wrt logits) is optional.
template <class T>
inline T segmentor_loss(const std::vector<T>& logits, const std::vector<T>& targets, T lambda_b,
                        T smooth = T(1), std::vector<T>* grad_logits = nullptr) {
    if (logits.size() != targets.size())
        throw DimensionError("segmentor_loss: logit and target sizes differ");
    const std::size_t n = logits.size();
    std::vector<T> probs(n);
    for (std::size_t i = 0; i < n; ++i) probs[i] = sigmoid(logits[i]);

    T inter = T(0), psum = T(0), tsum = T(0), bce = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        if (targets[i] != T(0) && targets[i] != T(1))
            throw ValidationError("segmentor_loss: targets must be 0 or 1");
        inter += probs[i] * targets[i];
        psum += probs[i];
        tsum += targets[i];
        bce += bce_with_logits(logits[i], targets[i]);
    }
    const T denom = psum + tsum + smooth;
    const T numer = T(2) * inter + smooth;
    const T dice = T(1) - numer / denom;
    const T loss = dice + lambda_b * bce / static_cast<T>(n);

    if (grad_logits) {
        grad_logits->resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const T ddice_dp = -(T(2) * targets[i] * denom - numer) / (denom * denom);
            const T dp_dz = probs[i] * (T(1) - probs[i]);
            const T dbce_dz = (probs[i] - targets[i]) / static_cast<T>(n);
            (*grad_logits)[i] = ddice_dp * dp_dz + lambda_b * dbce_dz;
        }
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Optimizers (RMSprop with momentum, Adam), L2 weight decay folded into the
// gradient
// ---------------------------------------------------------------------------

enum class OptKind { rmsprop, adam };

template <class T>
struct OptHyper {
    OptKind kind = OptKind::adam;
    T weight_decay = T(0);
    T momentum = T(0);     // rmsprop
    T alpha = T(0.99);     // rmsprop smoothing
    T beta1 = T(0.9);      // adam
    T beta2 = T(0.999);    // adam
    T eps = T(1e-8);
};

template <class T>
class Optimizer {
public:
    explicit Optimizer(OptHyper<T> hyper) : h_(hyper) {}

    /// One update over every (param, grad) array the module exposes.
    template <class Module>
    void step(Module& module, T lr) {
        ++t_;
        std::size_t slot = 0;
        module.visit_params([&](std::vector<T>& w, std::vector<T>& g) {
            if (slot >= s1_.size()) {
                s1_.emplace_back(w.size(), T(0));
                s2_.emplace_back(w.size(), T(0));
            }
            if (s1_[slot].size() != w.size())
                throw TrainingError("optimizer: parameter shape changed between steps");
            update(w, g, s1_[slot], s2_[slot], lr);
            ++slot;
        });
    }

    template <class Module>
    static void zero_grad(Module& module) {
        module.visit_params([](std::vector<T>&, std::vector<T>& g) {
            std::fill(g.begin(), g.end(), T(0));
        });
    }

private:
    void update(std::vector<T>& w, std::vector<T>& g, std::vector<T>& s1, std::vector<T>& s2,
                T lr) {
        if (h_.kind == OptKind::rmsprop) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                T gi = g[i] + h_.weight_decay * w[i];
                s2[i] = h_.alpha * s2[i] + (T(1) - h_.alpha) * gi * gi;
                T upd = gi / (std::sqrt(s2[i]) + h_.eps);
                if (h_.momentum != T(0)) {
                    s1[i] = h_.momentum * s1[i] + upd;
                    upd = s1[i];
                }
                w[i] -= lr * upd;
            }
        } else {
            const T bc1 = T(1) - std::pow(h_.beta1, static_cast<T>(t_));
            const T bc2 = T(1) - std::pow(h_.beta2, static_cast<T>(t_));
            for (std::size_t i = 0; i < w.size(); ++i) {
                const T gi = g[i] + h_.weight_decay * w[i];
                s1[i] = h_.beta1 * s1[i] + (T(1) - h_.beta1) * gi;
                s2[i] = h_.beta2 * s2[i] + (T(1) - h_.beta2) * gi * gi;
                const T mhat = s1[i] / bc1;
                const T vhat = s2[i] / bc2;
                w[i] -= lr * mhat / (std::sqrt(vhat) + h_.eps);
            }
        }
    }

    OptHyper<T> h_;
    long t_ = 0;
    std::vector<std::vector<T>> s1_, s2_;  // momentum/m and sq-avg/v per array
};

}  // namespace csiguard::nn
