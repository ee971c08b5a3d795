#include <algorithm>
#include <cmath>
#include <vector>

#include "dibs/data.hpp"
#include "dibs/rng.hpp"

namespace dibs::data {

namespace {

struct Pt {
    double x, y;
};

using Stroke = std::vector<Pt>;

Stroke arc(double cx, double cy, double rx, double ry, double a0_deg,
           double a1_deg, int n = 28) {
    Stroke s;
    s.reserve(n + 1);
    for (int i = 0; i <= n; ++i) {
        const double t = (a0_deg + (a1_deg - a0_deg) * i / n) * M_PI / 180.0;
        s.push_back({cx + rx * std::cos(t), cy - ry * std::sin(t)});
    }
    return s;
}

Stroke seg(double x0, double y0, double x1, double y1) {
    return {{x0, y0}, {x1, y1}};
}

// Glyphs in a unit box, y pointing down.
std::vector<Stroke> glyph(int digit) {
    switch (digit) {
        case 0:
            return {arc(0.5, 0.5, 0.27, 0.36, 0, 360, 48)};
        case 1:
            return {seg(0.38, 0.26, 0.54, 0.12), seg(0.54, 0.12, 0.54, 0.88)};
        case 2:
            return {arc(0.5, 0.32, 0.22, 0.20, 160, -20),
                    seg(0.707, 0.388, 0.26, 0.85), seg(0.26, 0.85, 0.76, 0.85)};
        case 3:
            return {arc(0.47, 0.31, 0.20, 0.19, 140, -90),
                    arc(0.47, 0.69, 0.22, 0.20, 90, -140)};
        case 4:
            return {seg(0.60, 0.10, 0.22, 0.60), seg(0.22, 0.60, 0.80, 0.60),
                    seg(0.60, 0.35, 0.60, 0.90)};
        case 5:
            return {seg(0.72, 0.12, 0.30, 0.12), seg(0.30, 0.12, 0.28, 0.46),
                    arc(0.47, 0.64, 0.23, 0.23, 115, -120)};
        case 6:
            return {arc(0.54, 0.40, 0.30, 0.35, 70, 160),
                    seg(0.258, 0.28, 0.26, 0.66),
                    arc(0.48, 0.66, 0.22, 0.21, 0, 360, 40)};
        case 7:
            return {seg(0.25, 0.13, 0.75, 0.13), seg(0.75, 0.13, 0.42, 0.88)};
        case 8:
            return {arc(0.5, 0.30, 0.17, 0.17, 0, 360, 36),
                    arc(0.5, 0.68, 0.21, 0.20, 0, 360, 40)};
        case 9:
            return {arc(0.5, 0.35, 0.19, 0.20, 0, 360, 36),
                    seg(0.69, 0.35, 0.60, 0.88)};
        default:
            return {};
    }
}

}  // namespace

LabeledDataset make_synthetic_digits(int count, std::uint64_t seed) {
    check(count >= 1, "make_synthetic_digits: count must be >= 1");
    constexpr std::size_t kSide = 28;
    LabeledDataset ds;
    ds.examples = Tensor<float>({std::size_t(count), kSide, kSide, 1});
    ds.labels.resize(count);
    ds.num_classes = 10;
    ds.meta.source = "synthetic_digits";
    ds.meta.seed = seed;
    RngStream rng = RngStream::named(seed, "digits");

    std::vector<float> canvas(kSide * kSide);
    for (int i = 0; i < count; ++i) {
        const int digit = i % 10;
        ds.labels[i] = digit;
        std::fill(canvas.begin(), canvas.end(), 0.0f);

        const double rot = rng.uniform(-10.0, 10.0) * M_PI / 180.0;
        const double sx = rng.uniform(0.88, 1.12), sy = rng.uniform(0.88, 1.12);
        const double tx = rng.uniform(-2.0, 2.0), ty = rng.uniform(-2.0, 2.0);
        const double width = rng.uniform(1.0, 1.7);
        const double sigma = 0.45 * width;
        const double cs = std::cos(rot), sn = std::sin(rot);

        auto to_px = [&](Pt p) -> Pt {
            const double ux = (p.x - 0.5) * sx * 22.0;
            const double uy = (p.y - 0.5) * sy * 22.0;
            return {cs * ux - sn * uy + 13.5 + tx, sn * ux + cs * uy + 13.5 + ty};
        };
        auto stamp = [&](Pt p) {
            const int x0 = std::max(0, int(p.x) - 3), x1 = std::min(int(kSide) - 1, int(p.x) + 3);
            const int y0 = std::max(0, int(p.y) - 3), y1 = std::min(int(kSide) - 1, int(p.y) + 3);
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double d2 = (x - p.x) * (x - p.x) + (y - p.y) * (y - p.y);
                    const float v = float(std::exp(-d2 / (2.0 * sigma * sigma)));
                    canvas[y * kSide + x] = std::max(canvas[y * kSide + x], v);
                }
        };
        for (const Stroke& s : glyph(digit)) {
            for (std::size_t j = 0; j + 1 < s.size(); ++j) {
                const Pt a = to_px(s[j]), b = to_px(s[j + 1]);
                const double len = std::hypot(b.x - a.x, b.y - a.y);
                const int steps = std::max(1, int(len / 0.3));
                for (int t = 0; t <= steps; ++t) {
                    const double u = double(t) / steps;
                    stamp({a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)});
                }
            }
        }
        float* out = ds.examples.data() + std::size_t(i) * kSide * kSide;
        for (std::size_t p = 0; p < kSide * kSide; ++p)
            out[p] = std::clamp(canvas[p] * 1.25f, 0.0f, 1.0f);
    }
    return ds;
}

}  // namespace dibs::data
