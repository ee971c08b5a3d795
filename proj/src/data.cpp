#include "dibs/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "dibs/rng.hpp"

namespace dibs::data {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("truncated file: " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

ShiftSpec::Kind ShiftSpec::kind_from(const std::string& name) {
    if (name == "none") return Kind::none;
    if (name == "translate") return Kind::translate;
    if (name == "rotate") return Kind::rotate;
    if (name == "color") return Kind::color;
    throw std::invalid_argument("unknown shift kind: " + name);
}

std::string ShiftSpec::to_string() const {
    switch (kind) {
        case Kind::none:
            return "none";
        case Kind::translate:
            return "translate[" + std::to_string(int(range.first)) + "," +
                   std::to_string(int(range.second)) + "]";
        case Kind::rotate:
            return "rotate[" + std::to_string(range.first) + "," +
                   std::to_string(range.second) + "]";
        case Kind::color:
            return "color";
    }
    return "?";
}

LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("cannot open: " + images_path);
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("cannot open: " + labels_path);

    if (read_be32(imgs, images_path) != kImageMagic)
        throw std::runtime_error("magic mismatch: " + images_path +
                                 " is not an IDX image file");
    const std::uint32_t n = read_be32(imgs, images_path);
    const std::uint32_t rows = read_be32(imgs, images_path);
    const std::uint32_t cols = read_be32(imgs, images_path);

    if (read_be32(labs, labels_path) != kLabelMagic)
        throw std::runtime_error("magic mismatch: " + labels_path +
                                 " is not an IDX label file");
    const std::uint32_t n_labels = read_be32(labs, labels_path);
    if (n != n_labels)
        throw std::runtime_error("count mismatch: " + std::to_string(n) +
                                 " images vs " + std::to_string(n_labels) +
                                 " labels");

    LabeledDataset ds;
    ds.examples = Tensor<float>({n, rows, cols, 1});
    std::vector<unsigned char> buf(std::size_t(rows) * cols);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(buf.data()), buf.size()))
            throw std::runtime_error("truncated file: " + images_path);
        float* out = ds.examples.data() + std::size_t(i) * rows * cols;
        for (std::size_t p = 0; p < buf.size(); ++p)
            out[p] = float(buf[p]) / 255.0f;
    }
    ds.labels.resize(n);
    std::vector<unsigned char> lbuf(n);
    if (n && !labs.read(reinterpret_cast<char*>(lbuf.data()), n))
        throw std::runtime_error("truncated file: " + labels_path);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        ds.labels[i] = lbuf[i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = max_label + 1;
    ds.meta.source = images_path;
    return ds;
}

void write_idx(const LabeledDataset& ds, const std::string& images_path,
               const std::string& labels_path) {
    check(ds.is_image() && ds.examples.dim(3) == 1,
          "write_idx expects single-channel image data");
    std::ofstream imgs(images_path, std::ios::binary);
    std::ofstream labs(labels_path, std::ios::binary);
    if (!imgs || !labs) throw std::runtime_error("cannot write IDX files");
    const std::size_t n = ds.size(), h = ds.examples.dim(1), w = ds.examples.dim(2);
    write_be32(imgs, kImageMagic);
    write_be32(imgs, std::uint32_t(n));
    write_be32(imgs, std::uint32_t(h));
    write_be32(imgs, std::uint32_t(w));
    std::vector<unsigned char> buf(h * w);
    for (std::size_t i = 0; i < n; ++i) {
        const float* px = ds.examples.data() + i * h * w;
        for (std::size_t p = 0; p < h * w; ++p)
            buf[p] = static_cast<unsigned char>(
                std::lround(std::clamp(px[p], 0.0f, 1.0f) * 255.0f));
        imgs.write(reinterpret_cast<char*>(buf.data()), buf.size());
    }
    write_be32(labs, kLabelMagic);
    write_be32(labs, std::uint32_t(n));
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char b = static_cast<unsigned char>(ds.labels[i]);
        labs.write(reinterpret_cast<const char*>(&b), 1);
    }
}

LabeledDataset make_gaussian_mixture(int num_classes, int per_class, int dim,
                                     double separation, std::uint64_t seed) {
    check(num_classes >= 2, "make_gaussian_mixture: num_classes must be >= 2");
    check(per_class >= 1, "make_gaussian_mixture: per_class must be >= 1");
    check(dim >= 2, "make_gaussian_mixture: dim must be >= 2");
    check(separation > 0, "make_gaussian_mixture: separation must be > 0");

    // Centers on a circle in the first two dims; the adjacent chord equals
    // `separation`, all other pairs are farther apart.
    const double r = separation / (2.0 * std::sin(M_PI / num_classes));
    const std::size_t n = std::size_t(num_classes) * per_class;
    LabeledDataset ds;
    ds.examples = Tensor<float>({n, std::size_t(dim)});
    ds.labels.resize(n);
    ds.num_classes = num_classes;
    RngStream rng = RngStream::named(seed, "gaussian_mixture");
    std::size_t row = 0;
    for (int c = 0; c < num_classes; ++c) {
        const double ang = 2.0 * M_PI * c / num_classes;
        const double cx = r * std::cos(ang), cy = r * std::sin(ang);
        for (int i = 0; i < per_class; ++i, ++row) {
            float* out = ds.examples.data() + row * dim;
            out[0] = float(cx + rng.normal());
            out[1] = float(cy + rng.normal());
            for (int d = 2; d < dim; ++d) out[d] = float(rng.normal());
            ds.labels[row] = c;
        }
    }
    ds.meta.source = "gaussian_mixture";
    ds.meta.seed = seed;
    return ds;
}

namespace {

LabeledDataset copy_meta(const LabeledDataset& ds, const std::string& transform,
                         std::uint64_t seed) {
    LabeledDataset out;
    out.labels = ds.labels;
    out.num_classes = ds.num_classes;
    out.meta = ds.meta;
    out.meta.transform = transform;
    out.meta.seed = seed;
    return out;
}

void translate_image(const float* src, float* dst, std::size_t h, std::size_t w,
                     std::size_t c, int dy, int dx) {
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sy = std::ptrdiff_t(y) - dy;
            const std::ptrdiff_t sx = std::ptrdiff_t(x) - dx;
            const bool in = sy >= 0 && sy < std::ptrdiff_t(h) && sx >= 0 &&
                            sx < std::ptrdiff_t(w);
            for (std::size_t ch = 0; ch < c; ++ch)
                dst[(y * w + x) * c + ch] =
                    in ? src[(std::size_t(sy) * w + std::size_t(sx)) * c + ch]
                       : 0.0f;
        }
}

void rotate_image(const float* src, float* dst, std::size_t h, std::size_t w,
                  std::size_t c, double degrees) {
    const double rad = degrees * M_PI / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (double(h) - 1.0) / 2.0, cx = (double(w) - 1.0) / 2.0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            // Inverse map: rotate the destination pixel back into the source.
            const double ry = double(y) - cy, rx = double(x) - cx;
            const double sy = cs * ry + sn * rx + cy;
            const double sx = -sn * ry + cs * rx + cx;
            const double fy = std::floor(sy), fx = std::floor(sx);
            const double wy = sy - fy, wx = sx - fx;
            for (std::size_t ch = 0; ch < c; ++ch) {
                auto sample = [&](double yy, double xx) -> double {
                    if (yy < 0 || yy > double(h) - 1 || xx < 0 ||
                        xx > double(w) - 1)
                        return 0.0;
                    return src[(std::size_t(yy) * w + std::size_t(xx)) * c + ch];
                };
                const double v = (1 - wy) * (1 - wx) * sample(fy, fx) +
                                 (1 - wy) * wx * sample(fy, fx + 1) +
                                 wy * (1 - wx) * sample(fy + 1, fx) +
                                 wy * wx * sample(fy + 1, fx + 1);
                dst[(y * w + x) * c + ch] = float(v);
            }
        }
}

}  // namespace

LabeledDataset apply_shift(const LabeledDataset& ds, const ShiftSpec& spec,
                           std::uint64_t seed) {
    if (spec.kind == ShiftSpec::Kind::none) {
        LabeledDataset out = copy_meta(ds, "none", seed);
        out.examples = ds.examples;
        return out;
    }
    check(ds.is_image(), "apply_shift: " + spec.to_string() +
                             " requires image data");
    const std::size_t n = ds.size(), h = ds.examples.dim(1),
                      w = ds.examples.dim(2), c = ds.examples.dim(3);
    RngStream rng = RngStream::named(seed, "shift");
    LabeledDataset out = copy_meta(ds, spec.to_string(), seed);

    if (spec.kind == ShiftSpec::Kind::translate) {
        const int lo = int(spec.range.first), hi = int(spec.range.second);
        check(hi >= lo, "apply_shift: empty translate range");
        out.examples = Tensor<float>(ds.examples.shape());
        for (std::size_t i = 0; i < n; ++i) {
            const int dx = lo + int(rng.uniform_int(std::uint64_t(hi - lo + 1)));
            const int dy = lo + int(rng.uniform_int(std::uint64_t(hi - lo + 1)));
            translate_image(ds.examples.data() + i * h * w * c,
                            out.examples.data() + i * h * w * c, h, w, c, dy, dx);
        }
        return out;
    }
    if (spec.kind == ShiftSpec::Kind::rotate) {
        check(std::isfinite(spec.range.first) && std::isfinite(spec.range.second),
              "apply_shift: rotate range must be finite");
        out.examples = Tensor<float>(ds.examples.shape());
        for (std::size_t i = 0; i < n; ++i) {
            const double ang = rng.uniform(spec.range.first, spec.range.second);
            rotate_image(ds.examples.data() + i * h * w * c,
                         out.examples.data() + i * h * w * c, h, w, c,
                         spec.range.first == spec.range.second ? spec.range.first
                                                               : ang);
        }
        return out;
    }
    // color: grayscale in, 3-channel out; foreground (> 0.5) moves into one
    // randomly chosen channel, other channels zeroed there.
    check(c == 1, "apply_shift: color expects single-channel input");
    check(!spec.channels.empty(), "apply_shift: color needs target channels");
    out.examples = Tensor<float>({n, h, w, 3});
    for (std::size_t i = 0; i < n; ++i) {
        const int chosen =
            spec.channels[rng.uniform_int(spec.channels.size())];
        const float* src = ds.examples.data() + i * h * w;
        float* dst = out.examples.data() + i * h * w * 3;
        for (std::size_t p = 0; p < h * w; ++p) {
            const float v = src[p];
            if (v > 0.5f) {
                for (int ch = 0; ch < 3; ++ch)
                    dst[p * 3 + ch] = (ch == chosen) ? v : 0.0f;
            } else {
                for (int ch = 0; ch < 3; ++ch) dst[p * 3 + ch] = v;
            }
        }
    }
    return out;
}

LabeledDataset make_noise_ood(NoiseKind kind, int count,
                              const std::vector<std::size_t>& shape,
                              std::uint64_t seed) {
    check(count >= 1, "make_noise_ood: count must be >= 1");
    check(!shape.empty(), "make_noise_ood: empty shape");
    std::vector<std::size_t> full{std::size_t(count)};
    full.insert(full.end(), shape.begin(), shape.end());
    LabeledDataset ds;
    ds.examples = Tensor<float>(full);
    ds.labels.assign(count, 0);
    ds.num_classes = 1;
    ds.meta.source = kind == NoiseKind::uniform ? "noise_uniform" : "noise_gaussian";
    ds.meta.seed = seed;
    ds.meta.label_sentinel = -1;  // no class
    RngStream rng = RngStream::named(seed, ds.meta.source);
    float* p = ds.examples.data();
    if (kind == NoiseKind::uniform) {
        for (std::size_t i = 0; i < ds.examples.size(); ++i)
            p[i] = float(rng.uniform());
    } else {
        for (std::size_t i = 0; i < ds.examples.size(); ++i)
            p[i] = float(std::clamp(0.5 + rng.normal(), 0.0, 1.0));
    }
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                double fraction,
                                                std::uint64_t seed) {
    check(fraction > 0.0 && fraction < 1.0,
          "split: fraction must lie strictly between 0 and 1");
    const std::size_t n = ds.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    RngStream rng = RngStream::named(seed, "split");
    for (std::size_t i = n; i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    const std::size_t n_first = std::size_t(fraction * double(n));

    auto take = [&](std::size_t b, std::size_t e) {
        std::vector<std::size_t> part(idx.begin() + b, idx.begin() + e);
        LabeledDataset out;
        out.num_classes = ds.num_classes;
        out.meta = ds.meta;
        out.meta.seed = seed;
        out.labels = gather_labels(ds, part);
        std::vector<std::size_t> shp = ds.examples.shape();
        shp[0] = part.size();
        out.examples = Tensor<float>(shp);
        const std::size_t fc = ds.feature_count();
        for (std::size_t i = 0; i < part.size(); ++i)
            std::memcpy(out.examples.data() + i * fc,
                        ds.examples.data() + part[i] * fc, fc * sizeof(float));
        return out;
    };
    return {take(0, n_first), take(n_first, n)};
}

Tensor<float> gather_batch(const LabeledDataset& ds,
                           const std::vector<std::size_t>& indices) {
    const std::size_t b = indices.size();
    if (ds.is_image()) {
        const std::size_t h = ds.examples.dim(1), w = ds.examples.dim(2),
                          c = ds.examples.dim(3);
        Tensor<float> out({b, c, h, w});
        for (std::size_t i = 0; i < b; ++i) {
            const float* src = ds.examples.data() + indices[i] * h * w * c;
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x)
                        out(i, ch, y, x) = src[(y * w + x) * c + ch];
        }
        return out;
    }
    const std::size_t d = ds.feature_count();
    Tensor<float> out({b, d});
    for (std::size_t i = 0; i < b; ++i)
        std::memcpy(out.data() + i * d, ds.examples.data() + indices[i] * d,
                    d * sizeof(float));
    return out;
}

std::vector<int> gather_labels(const LabeledDataset& ds,
                               const std::vector<std::size_t>& indices) {
    std::vector<int> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) out[i] = ds.labels[indices[i]];
    return out;
}

std::pair<std::vector<float>, std::vector<float>> feature_bounds(
    const LabeledDataset& ds) {
    const std::size_t d = ds.feature_count();
    std::vector<float> lo(d, std::numeric_limits<float>::infinity());
    std::vector<float> hi(d, -std::numeric_limits<float>::infinity());
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const float v = ds.examples[i * d + j];
            lo[j] = std::min(lo[j], v);
            hi[j] = std::max(hi[j], v);
        }
    return {lo, hi};
}

}  // namespace dibs::data
