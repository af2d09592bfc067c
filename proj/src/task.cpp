#include "task.hpp"

#include <cmath>

namespace drf {

ShapeKind shape_kind_from_string(const std::string& s) {
    if (s == "disk") return ShapeKind::disk;
    if (s == "bar") return ShapeKind::bar;
    if (s == "l_shape") return ShapeKind::l_shape;
    if (s == "ring") return ShapeKind::ring;
    throw ConfigError("task.shape: unknown value '" + s + "'");
}

std::string to_string(ShapeKind k) {
    switch (k) {
        case ShapeKind::disk: return "disk";
        case ShapeKind::bar: return "bar";
        case ShapeKind::l_shape: return "l_shape";
        default: return "ring";
    }
}

void TaskSpec::validate() const {
    if (canvas < 4) throw ConfigError("task.canvas must be >= 4");
    if (channels < 1) throw ConfigError("task.channels must be >= 1");
    if (!(size > 0.0)) throw ConfigError("task.size must be > 0");
    if (size > canvas) throw ConfigError("task.size must fit the canvas");
    for (double s : palette_std)
        if (s < 0.0) throw ConfigError("task.palette_std entries must be >= 0");
    if (texture_amplitude < 0.0) throw ConfigError("task.texture_amplitude must be >= 0");
    if (gen_label == app_label) throw ConfigError("task.gen_label must differ from task.app_label");
}

namespace {

bool inside_shape(const TaskSpec& spec, double px, double py) {
    // Rotate pixel centers into the shape frame.
    const double dx = px - spec.pos_x;
    const double dy = py - spec.pos_y;
    const double c  = std::cos(-spec.rotation);
    const double s  = std::sin(-spec.rotation);
    const double x  = c * dx - s * dy;
    const double y  = s * dx + c * dy;
    const double r2 = x * x + y * y;

    switch (spec.shape) {
        case ShapeKind::disk:
            return r2 <= spec.size * spec.size;
        case ShapeKind::ring: {
            const double inner = 0.55 * spec.size;
            return r2 <= spec.size * spec.size && r2 >= inner * inner;
        }
        case ShapeKind::bar:
            return std::abs(x) <= spec.size && std::abs(y) <= 0.35 * spec.size;
        case ShapeKind::l_shape:
        default: {
            const double arm = 0.4 * spec.size;
            const bool vertical   = std::abs(x) <= arm && y >= -spec.size && y <= spec.size;
            const bool horizontal = std::abs(y - spec.size) <= arm && x >= -arm && x <= spec.size;
            return vertical || horizontal;
        }
    }
}

}  // namespace

TaskArtifacts generate_task(const TaskSpec& spec, double tau_s, double tau_a,
                            double struct_cutoff) {
    spec.validate();
    const int n = spec.canvas;

    TaskArtifacts out;
    out.structure_image = ToyImage(spec.channels, n, n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double v = inside_shape(spec, x, y) ? 1.0 : -1.0;
            for (int c = 0; c < spec.channels; ++c) out.structure_image.at(c, y, x) = v;
        }

    // Texture: seeded white noise plus a smooth sinusoidal component, then an
    // affine renormalization so every channel hits its palette (mean, std)
    // exactly. Zero-std palettes collapse to flat channels.
    out.appearance_image = ToyImage(spec.channels, n, n);
    RngStream rng(splitmix64(spec.seed ^ 0x7465787475726530ull));
    for (int c = 0; c < spec.channels; ++c) {
        std::vector<double> raw(size_t(n) * n);
        const double fx = 1.0 + double(rng.next_u64() % 3);
        const double fy = 1.0 + double(rng.next_u64() % 3);
        const double ph = rng.uniform() * 2.0 * M_PI;
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const double wave =
                    std::sin(2.0 * M_PI * (fx * x + fy * y) / n + ph);
                raw[size_t(y) * n + x] = rng.normal() + spec.texture_amplitude * 2.0 * wave;
            }
        double m = 0.0;
        for (double v : raw) m += v;
        m /= raw.size();
        double var = 0.0;
        for (double v : raw) var += (v - m) * (v - m);
        const double sd = std::sqrt(var / raw.size());

        const double target_m = spec.palette_mean[size_t(c)];
        const double target_s = spec.palette_std[size_t(c)];
        for (int p = 0; p < n * n; ++p) {
            const double unit = sd > 0.0 ? (raw[size_t(p)] - m) / sd : 0.0;
            out.appearance_image.pixels[(size_t(c) * n * n) + p] = target_m + target_s * unit;
        }
    }

    out.ctx.z0_structure   = encode_toy_image(out.structure_image);
    out.ctx.structure_mask = threshold_mask(out.ctx.z0_structure);
    out.ctx.z0_appearance  = encode_toy_image(out.appearance_image);
    out.ctx.y_gen          = Condition::of(spec.gen_label);
    out.ctx.y_app          = Condition::of(spec.app_label);
    out.ctx.tau_s          = tau_s;
    out.ctx.tau_a          = tau_a;
    out.ctx.struct_cutoff  = struct_cutoff;
    out.ctx.validate();
    return out;
}

namespace {

// Palette variants of the structure shape per generation condition. Balanced
// so every variant keeps the reference palette's channel means untouched:
// inside/outside deviations are weighted by the complementary areas.
constexpr int kDecoyPalettes      = 4;
constexpr double kPaletteContrast = 1.0;

}  // namespace

std::unique_ptr<GaussianMixtureScore> build_task_model(const TaskArtifacts& task,
                                                       const TaskSpec& spec,
                                                       const NoiseSchedule& sched) {
    const Latent& mask = task.ctx.structure_mask;
    const int np       = mask.pixels();
    int area           = 0;
    for (int p = 0; p < np; ++p) area += mask.data[size_t(p)] != 0.0;
    const double dev_in  = 2.0 * kPaletteContrast * double(np - area) / np;
    const double dev_out = -2.0 * kPaletteContrast * double(area) / np;

    auto recolor = [&](const std::array<double, 3>& palette) {
        Latent z(spec.channels, mask.height, mask.width);
        for (int c = 0; c < spec.channels; ++c)
            for (int p = 0; p < np; ++p)
                z.data[size_t(c) * np + p] =
                    palette[size_t(c % 3)] + (mask.data[size_t(p)] != 0.0 ? dev_in : dev_out);
        return z;
    };

    // The generation condition covers the shape in several palettes: one
    // matching the appearance reference (the fusion target) plus seeded
    // decoys. Which one a run commits to is decided by the sampling
    // trajectory, which is exactly the degree of freedom the feedback loop
    // steers. The appearance condition maps to the texture reference alone.
    std::vector<Latent> means;
    means.push_back(recolor(spec.palette_mean));
    RngStream rng(splitmix64(spec.seed ^ 0x70616c65747465ull));
    for (int k = 0; k < kDecoyPalettes; ++k) {
        std::array<double, 3> palette{};
        for (auto& m : palette) m = rng.uniform() * 1.2 - 0.6;
        means.push_back(recolor(palette));
    }
    means.push_back(task.ctx.z0_appearance);

    std::map<int, std::vector<int>> labels;
    std::vector<int> gen_set(size_t(kDecoyPalettes) + 1);
    for (int k = 0; k <= kDecoyPalettes; ++k) gen_set[size_t(k)] = k;
    labels[spec.gen_label] = gen_set;
    labels[spec.app_label] = {kDecoyPalettes + 1};
    return std::make_unique<GaussianMixtureScore>(std::move(means), std::move(labels), sched);
}

}  // namespace drf
