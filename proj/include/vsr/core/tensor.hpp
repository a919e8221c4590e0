// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensor with a small fixed set of helpers. Shapes are
// dynamic (rank 1..5 in practice); all numeric modules in this library are
// templated on the scalar type so the same code runs in float for training
// and in double for finite-difference verification.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vsr {

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline long long numel_of(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) {
        require(d > 0, "tensor dimension must be positive, got shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

template <class T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;
    bool requires_grad = false;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)), data(static_cast<size_t>(numel_of(shape)), T(0)) {}
    TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        require(static_cast<long long>(data.size()) == numel_of(shape),
                "tensor data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
    }

    static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }
    static TensorT full(std::vector<int> s, T v) {
        TensorT t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    long long numel() const { return static_cast<long long>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<size_t>(i)); }

    T& operator[](long long i) { return data[static_cast<size_t>(i)]; }
    const T& operator[](long long i) const { return data[static_cast<size_t>(i)]; }

    // rank-specific indexers, row-major
    T& at2(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
    const T& at2(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
    T& at3(int i, int j, int k) { return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k]; }
    const T& at3(int i, int j, int k) const { return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k]; }
    T& at4(int i, int j, int k, int l) {
        return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    const T& at4(int i, int j, int k, int l) const {
        return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    T& at5(int i, int j, int k, int l, int m) {
        return data[(((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l) * shape[4] + m];
    }
    const T& at5(int i, int j, int k, int l, int m) const {
        return data[(((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l) * shape[4] + m];
    }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    TensorT& operator+=(const TensorT& o) {
        require(same_shape(o), "tensor += shape mismatch: " + shape_str(shape) + " vs " + shape_str(o.shape));
        for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
        return *this;
    }
    TensorT& operator-=(const TensorT& o) {
        require(same_shape(o), "tensor -= shape mismatch: " + shape_str(shape) + " vs " + shape_str(o.shape));
        for (size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
        return *this;
    }
    TensorT& operator*=(T s) {
        for (auto& v : data) v *= s;
        return *this;
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
    void zero() { fill(T(0)); }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

// Role aliases: videos and latents are rank-4 (frames, height, width, channels).
template <class T>
using VideoT = TensorT<T>;
using Video = VideoT<float>;

template <class T>
inline void require_rank(const TensorT<T>& t, int r, const std::string& who) {
    require(t.rank() == r, who + ": expected rank-" + std::to_string(r) + " tensor, got " + shape_str(t.shape));
}

template <class T>
inline TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    TensorT<T> out = a;
    out += b;
    return out;
}

template <class T>
inline TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    TensorT<T> out = a;
    out -= b;
    return out;
}

template <class T>
inline TensorT<T> scale(const TensorT<T>& a, T s) {
    TensorT<T> out = a;
    out *= s;
    return out;
}

template <class T>
inline double dot(const TensorT<T>& a, const TensorT<T>& b) {
    require(a.same_shape(b), "dot: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    double s = 0;
    for (size_t i = 0; i < a.data.size(); ++i) s += static_cast<double>(a.data[i]) * static_cast<double>(b.data[i]);
    return s;
}

template <class T>
inline double max_abs(const TensorT<T>& a) {
    double m = 0;
    for (T v : a.data) m = std::max(m, std::abs(static_cast<double>(v)));
    return m;
}

template <class T>
inline double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
    require(a.same_shape(b), "max_abs_diff: shape mismatch");
    double m = 0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
    return m;
}

// Extract one frame (rank-4 -> rank-3 view copy).
template <class T>
inline TensorT<T> frame_of(const TensorT<T>& video, int f) {
    require_rank(video, 4, "frame_of");
    const int H = video.shape[1], W = video.shape[2], C = video.shape[3];
    TensorT<T> out({H, W, C});
    const size_t stride = static_cast<size_t>(H) * W * C;
    std::copy(video.data.begin() + f * stride, video.data.begin() + (f + 1) * stride, out.data.begin());
    return out;
}

template <class T>
inline void set_frame(TensorT<T>& video, int f, const TensorT<T>& frame) {
    require_rank(video, 4, "set_frame");
    const size_t stride = static_cast<size_t>(video.shape[1]) * video.shape[2] * video.shape[3];
    require(static_cast<size_t>(frame.numel()) == stride, "set_frame: frame size mismatch");
    std::copy(frame.data.begin(), frame.data.end(), video.data.begin() + f * stride);
}

// Concatenate two rank-4 tensors along the channel axis.
template <class T>
inline TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    require_rank(a, 4, "concat_channels");
    require_rank(b, 4, "concat_channels");
    require(a.shape[0] == b.shape[0] && a.shape[1] == b.shape[1] && a.shape[2] == b.shape[2],
            "concat_channels: spatial/frame mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    const int L = a.shape[0], H = a.shape[1], W = a.shape[2], Ca = a.shape[3], Cb = b.shape[3];
    TensorT<T> out({L, H, W, Ca + Cb});
    for (int f = 0; f < L; ++f)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                for (int c = 0; c < Ca; ++c) out.at4(f, y, x, c) = a.at4(f, y, x, c);
                for (int c = 0; c < Cb; ++c) out.at4(f, y, x, Ca + c) = b.at4(f, y, x, c);
            }
    return out;
}

template <class T>
inline void split_channels(const TensorT<T>& joint, TensorT<T>& a, TensorT<T>& b, int Ca) {
    require_rank(joint, 4, "split_channels");
    const int L = joint.shape[0], H = joint.shape[1], W = joint.shape[2], C = joint.shape[3];
    const int Cb = C - Ca;
    require(Cb > 0, "split_channels: bad split point");
    a = TensorT<T>({L, H, W, Ca});
    b = TensorT<T>({L, H, W, Cb});
    for (int f = 0; f < L; ++f)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                for (int c = 0; c < Ca; ++c) a.at4(f, y, x, c) = joint.at4(f, y, x, c);
                for (int c = 0; c < Cb; ++c) b.at4(f, y, x, c) = joint.at4(f, y, x, Ca + c);
            }
}

}  // namespace vsr
