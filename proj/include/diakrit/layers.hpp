#pragma once

// Differentiable layers over Tensor<T>. Each layer caches what its backward
// pass needs, returns dx, and leaves parameter gradients in gw/gb. No autodiff
// graph: the two networks in this project are fixed chains assembled by hand.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "diakrit/rng.hpp"
#include "diakrit/tensor.hpp"

namespace diakrit {

enum class Pad { Same, Valid };

// TF-convention SAME: out = ceil(in/stride), pad split begin/end (end gets the
// odd pixel)
inline int conv_out_dim(int in, int k, int stride, Pad pad) {
    if (pad == Pad::Same) return (in + stride - 1) / stride;
    if (in < k) throw Error("valid padding needs input >= kernel, got " + std::to_string(in) +
                            " < " + std::to_string(k));
    return (in - k) / stride + 1;
}

inline int pad_begin(int in, int out, int k, int stride, Pad pad) {
    if (pad == Pad::Valid) return 0;
    int total = std::max(0, (out - 1) * stride + k - in);
    return total / 2;
}

template <typename T>
struct Param {
    Tensor<T>* value;
    Tensor<T>* grad;
    std::string name;
};

// ---- convolution ---------------------------------------------------------------

template <typename T>
struct Conv2d {
    int in_ch, out_ch, k, stride;
    Pad pad;
    Tensor<T> w;  // [k, k, in_ch, out_ch]
    Tensor<T> b;  // [out_ch]
    Tensor<T> gw, gb;

    Conv2d(int in_ch_, int out_ch_, int k_, int stride_, Pad pad_, Rng& rng)
        : in_ch(in_ch_), out_ch(out_ch_), k(k_), stride(stride_), pad(pad_),
          w(Tensor<T>({k_, k_, in_ch_, out_ch_})), b(Tensor<T>({out_ch_})), gw(w.shape),
          gb(b.shape) {
        double scale = std::sqrt(2.0 / (static_cast<double>(k) * k * in_ch)); // Kaiming fan-in
        for (T& x : w.v) x = static_cast<T>(rng.normal() * scale);
    }

    std::vector<Param<T>> params(const std::string& prefix) {
        return {{&w, &gw, prefix + ".w"}, {&b, &gb, prefix + ".b"}};
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        if (x.rank() != 4)
            throw Error("conv2d expects rank-4 input, got " + x.shape_str());
        if (x.dim(3) != in_ch)
            throw Error("conv2d channel mismatch: input " + x.shape_str() + " vs weights " +
                        w.shape_str());
        const int N = x.dim(0), H = x.dim(1), W = x.dim(2);
        const int OH = conv_out_dim(H, k, stride, pad), OW = conv_out_dim(W, k, stride, pad);
        const int ph = pad_begin(H, OH, k, stride, pad), pw = pad_begin(W, OW, k, stride, pad);
        const int M = N * OH * OW, K = k * k * in_ch;

        in_shape_ = x.shape;
        const T* src;
        if (k == 1 && stride == 1) {
            // 1x1 stride-1: the input matrix is already the patch matrix
            if (train) x_cache_ = x;
            src = x.data();
        } else {
            cols_ = Tensor<T>({M, K});
            T* c = cols_.data();
            for (int n = 0; n < N; ++n)
                for (int oh = 0; oh < OH; ++oh)
                    for (int ow = 0; ow < OW; ++ow) {
                        int y0 = oh * stride - ph, x0 = ow * stride - pw;
                        for (int ky = 0; ky < k; ++ky) {
                            int y = y0 + ky;
                            for (int kx = 0; kx < k; ++kx, c += in_ch) {
                                int xx = x0 + kx;
                                if (y < 0 || y >= H || xx < 0 || xx >= W) continue; // stays zero
                                const T* p = &x.v[((static_cast<size_t>(n) * H + y) * W + xx) *
                                                  in_ch];
                                std::copy(p, p + in_ch, c);
                            }
                        }
                    }
            src = cols_.data();
        }

        Tensor<T> out({N, OH, OW, out_ch});
        gemm_nn(src, w.data(), out.data(), M, K, out_ch);
        for (int r = 0; r < M; ++r) {
            T* o = out.data() + static_cast<size_t>(r) * out_ch;
            for (int c = 0; c < out_ch; ++c) o[c] += b.v[static_cast<size_t>(c)];
        }
        if (!train) {
            cols_ = Tensor<T>();
            x_cache_ = Tensor<T>();
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int N = in_shape_[0], H = in_shape_[1], W = in_shape_[2];
        const int OH = dy.dim(1), OW = dy.dim(2);
        const int ph = pad_begin(H, OH, k, stride, pad), pw = pad_begin(W, OW, k, stride, pad);
        const int M = N * OH * OW, K = k * k * in_ch;
        const bool fast1x1 = (k == 1 && stride == 1);
        const T* cols_src = fast1x1 ? x_cache_.data() : cols_.data();

        std::fill(gw.v.begin(), gw.v.end(), T(0));
        gemm_tn_acc(cols_src, dy.data(), gw.data(), M, K, out_ch);
        std::fill(gb.v.begin(), gb.v.end(), T(0));
        for (int r = 0; r < M; ++r) {
            const T* d = dy.data() + static_cast<size_t>(r) * out_ch;
            for (int c = 0; c < out_ch; ++c) gb.v[static_cast<size_t>(c)] += d[c];
        }

        Tensor<T> dx({N, H, W, in_ch});
        if (fast1x1) {
            gemm_nt(dy.data(), w.data(), dx.data(), M, out_ch, K);
            return dx;
        }
        Tensor<T> dcols({M, K});
        gemm_nt(dy.data(), w.data(), dcols.data(), M, out_ch, K);
        const T* c = dcols.data();
        for (int n = 0; n < N; ++n)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    int y0 = oh * stride - ph, x0 = ow * stride - pw;
                    for (int ky = 0; ky < k; ++ky) {
                        int y = y0 + ky;
                        for (int kx = 0; kx < k; ++kx, c += in_ch) {
                            int xx = x0 + kx;
                            if (y < 0 || y >= H || xx < 0 || xx >= W) continue;
                            T* p = &dx.v[((static_cast<size_t>(n) * H + y) * W + xx) * in_ch];
                            for (int ic = 0; ic < in_ch; ++ic) p[ic] += c[ic];
                        }
                    }
                }
        return dx;
    }

private:
    std::vector<int> in_shape_;
    Tensor<T> cols_, x_cache_;
};

// ---- max pooling ----------------------------------------------------------------

template <typename T>
struct MaxPool {
    int k = 3, stride = 2;
    Pad pad = Pad::Same;

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        if (x.rank() != 4) throw Error("maxpool expects rank-4 input, got " + x.shape_str());
        const int N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
        const int OH = conv_out_dim(H, k, stride, pad), OW = conv_out_dim(W, k, stride, pad);
        const int ph = pad_begin(H, OH, k, stride, pad), pw = pad_begin(W, OW, k, stride, pad);
        in_shape_ = x.shape;
        Tensor<T> out({N, OH, OW, C});
        argmax_.assign(out.numel(), -1);
        size_t oi = 0;
        for (int n = 0; n < N; ++n)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow)
                    for (int c = 0; c < C; ++c, ++oi) {
                        T best = -std::numeric_limits<T>::infinity();
                        int64_t besti = -1;
                        for (int ky = 0; ky < k; ++ky) {
                            int y = oh * stride - ph + ky;
                            if (y < 0 || y >= H) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                int xx = ow * stride - pw + kx;
                                if (xx < 0 || xx >= W) continue;
                                size_t idx = ((static_cast<size_t>(n) * H + y) * W + xx) * C + c;
                                if (x.v[idx] > best) { // strict: ties go to first scanned
                                    best = x.v[idx];
                                    besti = static_cast<int64_t>(idx);
                                }
                            }
                        }
                        out.v[oi] = best;
                        argmax_[oi] = besti;
                    }
        if (!train) argmax_.clear();
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(in_shape_);
        for (size_t i = 0; i < dy.numel(); ++i)
            dx.v[static_cast<size_t>(argmax_[i])] += dy.v[i];
        return dx;
    }

private:
    std::vector<int> in_shape_;
    std::vector<int64_t> argmax_;
};

// ---- dense ----------------------------------------------------------------------

template <typename T>
struct Dense {
    int in_n, out_n;
    Tensor<T> w; // [in, out]
    Tensor<T> b; // [out]
    Tensor<T> gw, gb;

    Dense(int in_n_, int out_n_, Rng& rng)
        : in_n(in_n_), out_n(out_n_), w(Tensor<T>({in_n_, out_n_})), b(Tensor<T>({out_n_})),
          gw(w.shape), gb(b.shape) {
        double scale = std::sqrt(2.0 / in_n);
        for (T& x : w.v) x = static_cast<T>(rng.normal() * scale);
    }

    std::vector<Param<T>> params(const std::string& prefix) {
        return {{&w, &gw, prefix + ".w"}, {&b, &gb, prefix + ".b"}};
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        if (x.rank() != 2 || x.dim(1) != in_n)
            throw Error("dense shape mismatch: input " + x.shape_str() + " vs weights " +
                        w.shape_str());
        const int N = x.dim(0);
        if (train) x_cache_ = x;
        Tensor<T> out({N, out_n});
        gemm_nn(x.data(), w.data(), out.data(), N, in_n, out_n);
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < out_n; ++c) out.at(r, c) += b.v[static_cast<size_t>(c)];
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int N = x_cache_.dim(0);
        std::fill(gw.v.begin(), gw.v.end(), T(0));
        gemm_tn_acc(x_cache_.data(), dy.data(), gw.data(), N, in_n, out_n);
        std::fill(gb.v.begin(), gb.v.end(), T(0));
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < out_n; ++c) gb.v[static_cast<size_t>(c)] += dy.at(r, c);
        Tensor<T> dx({N, in_n});
        gemm_nt(dy.data(), w.data(), dx.data(), N, out_n, in_n);
        return dx;
    }

private:
    Tensor<T> x_cache_;
};

// ---- relu -------------------------------------------------------------------------

template <typename T>
struct Relu {
    Tensor<T> forward(const Tensor<T>& x, bool train) {
        Tensor<T> out = x;
        for (T& v : out.v) v = v > T(0) ? v : T(0);
        if (train) {
            mask_.assign(x.numel(), 0);
            for (size_t i = 0; i < x.numel(); ++i) mask_[i] = x.v[i] > T(0);
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.numel(); ++i)
            if (!mask_[i]) dx.v[i] = T(0);
        return dx;
    }

private:
    std::vector<uint8_t> mask_;
};

// ---- softmax (rowwise over the last axis) -------------------------------------------

template <typename T>
inline Tensor<T> softmax(const Tensor<T>& x) {
    const int C = x.dim(x.rank() - 1);
    const size_t rows = x.numel() / static_cast<size_t>(C);
    Tensor<T> out = x;
    for (size_t r = 0; r < rows; ++r) {
        T* p = out.data() + r * C;
        T mx = p[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, p[c]);
        T sum = 0;
        for (int c = 0; c < C; ++c) {
            p[c] = std::exp(p[c] - mx);
            sum += p[c];
        }
        for (int c = 0; c < C; ++c) p[c] /= sum;
    }
    return out;
}

// dx = y ⊙ (dy − Σ_c dy_c·y_c), given y = softmax(x)
template <typename T>
inline Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& dy) {
    const int C = y.dim(y.rank() - 1);
    const size_t rows = y.numel() / static_cast<size_t>(C);
    Tensor<T> dx = dy;
    for (size_t r = 0; r < rows; ++r) {
        const T* yp = y.data() + r * C;
        T* dp = dx.data() + r * C;
        T dot = 0;
        for (int c = 0; c < C; ++c) dot += dp[c] * yp[c];
        for (int c = 0; c < C; ++c) dp[c] = yp[c] * (dp[c] - dot);
    }
    return dx;
}

// ---- dropout ------------------------------------------------------------------------

template <typename T>
struct Dropout {
    double rate;

    explicit Dropout(double rate_) : rate(rate_) {
        if (rate < 0 || rate >= 1) throw Error("dropout rate must be in [0,1)");
    }

    // train: zero with probability `rate`, scale survivors by 1/(1-rate);
    // inference: identity
    Tensor<T> forward(const Tensor<T>& x, bool train, uint64_t seed) {
        if (!train || rate == 0) {
            mask_.assign(x.numel(), 1);
            scale_ = T(1);
            return x;
        }
        Rng rng(seed);
        scale_ = static_cast<T>(1.0 / (1.0 - rate));
        Tensor<T> out = x;
        mask_.assign(x.numel(), 0);
        for (size_t i = 0; i < x.numel(); ++i) {
            if (rng.uniform() >= rate) {
                mask_[i] = 1;
                out.v[i] = x.v[i] * scale_;
            } else {
                out.v[i] = T(0);
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.numel(); ++i) dx.v[i] = mask_[i] ? dx.v[i] * scale_ : T(0);
        return dx;
    }

private:
    std::vector<uint8_t> mask_;
    T scale_ = T(1);
};

// ---- channel concat ------------------------------------------------------------------

template <typename T>
inline Tensor<T> channel_concat(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 4 || b.rank() != 4)
        throw Error("concat expects rank-4 inputs, got " + a.shape_str() + " and " +
                    b.shape_str());
    if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw Error("concat spatial mismatch: " + a.shape_str() + " vs " + b.shape_str());
    const int N = a.dim(0), H = a.dim(1), W = a.dim(2), CA = a.dim(3), CB = b.dim(3);
    Tensor<T> out({N, H, W, CA + CB});
    const size_t cells = static_cast<size_t>(N) * H * W;
    for (size_t i = 0; i < cells; ++i) {
        std::copy(a.data() + i * CA, a.data() + (i + 1) * CA, out.data() + i * (CA + CB));
        std::copy(b.data() + i * CB, b.data() + (i + 1) * CB, out.data() + i * (CA + CB) + CA);
    }
    return out;
}

template <typename T>
inline std::pair<Tensor<T>, Tensor<T>> channel_split(const Tensor<T>& dy, int ca, int cb) {
    const int N = dy.dim(0), H = dy.dim(1), W = dy.dim(2);
    Tensor<T> da({N, H, W, ca}), db({N, H, W, cb});
    const size_t cells = static_cast<size_t>(N) * H * W;
    for (size_t i = 0; i < cells; ++i) {
        std::copy(dy.data() + i * (ca + cb), dy.data() + i * (ca + cb) + ca, da.data() + i * ca);
        std::copy(dy.data() + i * (ca + cb) + ca, dy.data() + (i + 1) * (ca + cb),
                  db.data() + i * cb);
    }
    return {std::move(da), std::move(db)};
}

// ---- fire module ----------------------------------------------------------------------
// squeeze 1x1 → relu → parallel expand 1x1 / expand 3x3 → relu → concat

template <typename T>
struct Fire {
    int s1x1, e1x1, e3x3;
    Conv2d<T> squeeze, expand1, expand3;
    Relu<T> relu_s, relu_e1, relu_e3;

    Fire(int in_ch, int s, int e1, int e3, Rng& rng)
        : s1x1(s), e1x1(e1), e3x3(e3), squeeze(in_ch, s, 1, 1, Pad::Same, rng),
          expand1(s, e1, 1, 1, Pad::Same, rng), expand3(s, e3, 3, 1, Pad::Same, rng) {}

    int out_channels() const { return e1x1 + e3x3; }

    std::vector<Param<T>> params(const std::string& prefix) {
        std::vector<Param<T>> p;
        for (auto& q : squeeze.params(prefix + ".squeeze")) p.push_back(q);
        for (auto& q : expand1.params(prefix + ".expand1")) p.push_back(q);
        for (auto& q : expand3.params(prefix + ".expand3")) p.push_back(q);
        return p;
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        Tensor<T> s = relu_s.forward(squeeze.forward(x, train), train);
        Tensor<T> a = relu_e1.forward(expand1.forward(s, train), train);
        Tensor<T> b = relu_e3.forward(expand3.forward(s, train), train);
        return channel_concat(a, b);
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        auto [da, db] = channel_split(dy, e1x1, e3x3);
        Tensor<T> ds = expand1.backward(relu_e1.backward(da));
        Tensor<T> ds2 = expand3.backward(relu_e3.backward(db));
        for (size_t i = 0; i < ds.numel(); ++i) ds.v[i] += ds2.v[i];
        return squeeze.backward(relu_s.backward(ds));
    }
};

// ---- fused softmax cross-entropy (mean over rows) ---------------------------------------

template <typename T>
struct SoftmaxXent {
    // returns mean CE over rows; targets are class indices per row
    T forward(const Tensor<T>& logits, const std::vector<int>& targets) {
        probs_ = softmax(logits);
        const int C = logits.dim(logits.rank() - 1);
        const size_t rows = logits.numel() / static_cast<size_t>(C);
        if (targets.size() != rows)
            throw Error("cross-entropy target count mismatch: " + std::to_string(targets.size()) +
                        " vs " + std::to_string(rows));
        T loss = 0;
        for (size_t r = 0; r < rows; ++r) {
            T p = probs_.v[r * C + static_cast<size_t>(targets[r])];
            loss -= std::log(std::max(p, static_cast<T>(1e-12)));
        }
        targets_ = targets;
        return loss / static_cast<T>(rows);
    }

    // d(mean CE)/d(logits) = (softmax − onehot) / rows
    Tensor<T> backward() const {
        const int C = probs_.dim(probs_.rank() - 1);
        const size_t rows = probs_.numel() / static_cast<size_t>(C);
        Tensor<T> dx = probs_;
        for (size_t r = 0; r < rows; ++r) {
            dx.v[r * C + static_cast<size_t>(targets_[r])] -= T(1);
        }
        for (T& v : dx.v) v /= static_cast<T>(rows);
        return dx;
    }

private:
    Tensor<T> probs_;
    std::vector<int> targets_;
};

} // namespace diakrit
