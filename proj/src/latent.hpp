#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace drf {

// Shaped real-valued array (channels x height x width). Flat vectors are
// represented as (1, 1, d). All z-domain state in the engine is a Latent.
struct Latent {
    int channels = 0;
    int height   = 0;
    int width    = 0;
    std::vector<double> data;

    Latent() = default;
    Latent(int c, int h, int w) : channels(c), height(h), width(w), data(size_t(c) * h * w, 0.0) {}

    static Latent flat(int d) { return Latent(1, 1, d); }

    int size() const { return channels * height * width; }
    int pixels() const { return height * width; }

    double& operator[](int i) { return data[size_t(i)]; }
    double operator[](int i) const { return data[size_t(i)]; }

    double& at(int c, int y, int x) { return data[(size_t(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return data[(size_t(c) * height + y) * width + x]; }

    bool same_shape(const Latent& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
    std::string shape_str() const {
        return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
    }
};

inline void require_same_shape(const Latent& a, const Latent& b, const char* where) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

inline Latent gaussian_latent(int c, int h, int w, RngStream& rng) {
    Latent z(c, h, w);
    for (auto& v : z.data) v = rng.normal();
    return z;
}

// out = a*x + b*y, elementwise
inline Latent lincomb(double a, const Latent& x, double b, const Latent& y) {
    require_same_shape(x, y, "lincomb");
    Latent out = x;
    for (int i = 0; i < out.size(); ++i) out[i] = a * x[i] + b * y[i];
    return out;
}

inline Latent scaled(const Latent& x, double a) {
    Latent out = x;
    for (auto& v : out.data) v *= a;
    return out;
}

inline void axpy(double a, const Latent& x, Latent& y) {
    require_same_shape(x, y, "axpy");
    for (int i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline double dot(const Latent& a, const Latent& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const Latent& a) { return std::sqrt(dot(a, a)); }

inline double mean_of(const Latent& a) {
    double s = 0.0;
    for (double v : a.data) s += v;
    return a.size() > 0 ? s / a.size() : 0.0;
}

inline bool all_finite(const Latent& a) {
    for (double v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

inline double channel_mean(const Latent& a, int c) {
    double s     = 0.0;
    const int np = a.pixels();
    for (int p = 0; p < np; ++p) s += a.data[size_t(c) * np + p];
    return s / np;
}

// Uncorrected (population) standard deviation of one channel.
inline double channel_std(const Latent& a, int c) {
    const double m = channel_mean(a, c);
    double s       = 0.0;
    const int np   = a.pixels();
    for (int p = 0; p < np; ++p) {
        const double d = a.data[size_t(c) * np + p] - m;
        s += d * d;
    }
    return std::sqrt(s / np);
}

}  // namespace drf
