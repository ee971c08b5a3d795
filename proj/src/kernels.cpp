#include "dibs/kernels.hpp"

#include <cstring>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dibs::kernels {

namespace {

// Work below this many multiply-adds is not worth a parallel region.
constexpr std::size_t kParallelCutoff = 1u << 15;

// Row-range core shared by the serial reference and the OpenMP wrapper, so
// both produce the same instruction sequence per output element. noinline
// keeps the compiler from specializing the two call sites differently.
template <typename T>
__attribute__((noinline)) void gemm_nn_rows(const T* a, const T* b, T* c,
                                            std::size_t k, std::size_t n,
                                            std::size_t i0, std::size_t i1,
                                            bool accumulate) {
    for (std::size_t i = i0; i < i1; ++i) {
        T* crow = c + i * n;
        if (!accumulate)
            for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
        const T* arow = a + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T av = arow[kk];
            const T* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
std::vector<T> transpose_copy(const T* a, std::size_t rows, std::size_t cols) {
    std::vector<T> t(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
    return t;
}

template <typename T>
__attribute__((noinline)) void im2col_rows(const T* x, T* cols,
                                           const ConvShape& s, std::size_t r0,
                                           std::size_t r1) {
    const std::size_t oh = s.out_h(), ow = s.out_w(), patch = s.patch();
    for (std::size_t r = r0; r < r1; ++r) {
        const std::size_t b = r / (oh * ow);
        const std::size_t oy = (r / ow) % oh;
        const std::size_t ox = r % ow;
        T* out = cols + r * patch;
        for (std::size_t ic = 0; ic < s.in_c; ++ic) {
            const T* plane = x + (b * s.in_c + ic) * s.in_h * s.in_w;
            for (std::size_t ky = 0; ky < s.kh; ++ky) {
                const std::ptrdiff_t iy =
                    static_cast<std::ptrdiff_t>(oy * s.stride + ky) -
                    static_cast<std::ptrdiff_t>(s.pad);
                for (std::size_t kx = 0; kx < s.kw; ++kx) {
                    const std::ptrdiff_t ix =
                        static_cast<std::ptrdiff_t>(ox * s.stride + kx) -
                        static_cast<std::ptrdiff_t>(s.pad);
                    const bool in =
                        iy >= 0 && iy < static_cast<std::ptrdiff_t>(s.in_h) &&
                        ix >= 0 && ix < static_cast<std::ptrdiff_t>(s.in_w);
                    *out++ = in ? plane[iy * s.in_w + ix] : T(0);
                }
            }
        }
    }
}

template <typename T>
__attribute__((noinline)) void col2im_cells(const T* cols, T* dx,
                                            const ConvShape& s, std::size_t c0,
                                            std::size_t c1) {
    const std::size_t oh = s.out_h(), ow = s.out_w(), patch = s.patch();
    const std::size_t plane = s.in_h * s.in_w;
    for (std::size_t cell = c0; cell < c1; ++cell) {
        const std::size_t b = cell / (s.in_c * plane);
        const std::size_t ic = (cell / plane) % s.in_c;
        const std::size_t iy = (cell / s.in_w) % s.in_h;
        const std::size_t ix = cell % s.in_w;
        T sum = T(0);
        for (std::size_t ky = 0; ky < s.kh; ++ky) {
            const std::ptrdiff_t oy_num =
                static_cast<std::ptrdiff_t>(iy + s.pad) -
                static_cast<std::ptrdiff_t>(ky);
            if (oy_num < 0 || oy_num % static_cast<std::ptrdiff_t>(s.stride)) continue;
            const std::size_t oy = static_cast<std::size_t>(oy_num) / s.stride;
            if (oy >= oh) continue;
            for (std::size_t kx = 0; kx < s.kw; ++kx) {
                const std::ptrdiff_t ox_num =
                    static_cast<std::ptrdiff_t>(ix + s.pad) -
                    static_cast<std::ptrdiff_t>(kx);
                if (ox_num < 0 || ox_num % static_cast<std::ptrdiff_t>(s.stride))
                    continue;
                const std::size_t ox = static_cast<std::size_t>(ox_num) / s.stride;
                if (ox >= ow) continue;
                const std::size_t row = (b * oh + oy) * ow + ox;
                const std::size_t col = (ic * s.kh + ky) * s.kw + kx;
                sum += cols[row * patch + col];
            }
        }
        dx[cell] = sum;
    }
}

template <typename T>
__attribute__((noinline)) void maxpool2_windows(const T* x, T* y,
                                                std::uint32_t* argmax,
                                                std::size_t c, std::size_t h,
                                                std::size_t w, std::size_t p0,
                                                std::size_t p1) {
    const std::size_t oh = h / 2, ow = w / 2;
    for (std::size_t p = p0; p < p1; ++p) {
        const std::size_t bc = p / (oh * ow);
        const std::size_t oy = (p / ow) % oh;
        const std::size_t ox = p % ow;
        const T* plane = x + bc * h * w;
        const std::size_t base = bc * h * w;
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_ix = 0;
        for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx2 = 0; dx2 < 2; ++dx2) {
                const std::size_t iy = oy * 2 + dy, ix = ox * 2 + dx2;
                const T v = plane[iy * w + ix];
                if (v > best) {
                    best = v;
                    best_ix = base + iy * w + ix;
                }
            }
        y[p] = best;
        argmax[p] = static_cast<std::uint32_t>(best_ix);
    }
    (void)c;
}

}  // namespace

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
#ifdef _OPENMP
    const bool par = m * n * k > kParallelCutoff && m > 1;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i)
        gemm_nn_rows(a, b, c, k, n, i, i + 1, accumulate);
#else
    gemm_nn_rows(a, b, c, k, n, 0, m, accumulate);
#endif
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    auto bt = transpose_copy(b, n, k);  // [k x n]
    gemm_nn(a, bt.data(), c, m, k, n, accumulate);
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    auto at = transpose_copy(a, k, m);  // [m x k]
    gemm_nn(at.data(), b, c, m, k, n, accumulate);
}

template <typename T>
void add_bias_rows(T* y, const T* bias, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static) if (rows * cols > kParallelCutoff)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i) {
        T* row = y + i * cols;
        for (std::size_t j = 0; j < cols; ++j) row[j] += bias[j];
    }
}

template <typename T>
void relu_forward(const T* x, T* y, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
        y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* x, const T* dy, T* dx, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
        dx[i] = x[i] > T(0) ? dy[i] : T(0);
}

template <typename T>
void im2col(const T* x, T* cols, const ConvShape& s) {
    const std::size_t rows = s.batch * s.out_h() * s.out_w();
#pragma omp parallel for schedule(static) if (rows * s.patch() > kParallelCutoff)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r)
        im2col_rows(x, cols, s, r, r + 1);
}

template <typename T>
void col2im(const T* cols, T* dx, const ConvShape& s) {
    const std::size_t cells = s.batch * s.in_c * s.in_h * s.in_w;
#pragma omp parallel for schedule(static) if (cells * s.kh * s.kw > kParallelCutoff)
    for (std::ptrdiff_t cell = 0; cell < static_cast<std::ptrdiff_t>(cells); ++cell)
        col2im_cells(cols, dx, s, cell, cell + 1);
}

template <typename T>
void maxpool2_forward(const T* x, T* y, std::uint32_t* argmax, std::size_t batch,
                      std::size_t c, std::size_t h, std::size_t w) {
    const std::size_t windows = batch * c * (h / 2) * (w / 2);
#pragma omp parallel for schedule(static) if (windows > kParallelCutoff)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(windows); ++p)
        maxpool2_windows(x, y, argmax, c, h, w, p, p + 1);
}

template <typename T>
void maxpool2_backward(const T* dy, const std::uint32_t* argmax, T* dx,
                       std::size_t batch, std::size_t c, std::size_t h,
                       std::size_t w) {
    std::memset(dx, 0, batch * c * h * w * sizeof(T));
    const std::size_t windows = batch * c * (h / 2) * (w / 2);
    // Pool windows are disjoint, so scattering is race-free.
#pragma omp parallel for schedule(static) if (windows > kParallelCutoff)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(windows); ++p)
        dx[argmax[p]] = dy[p];
}

namespace serial {

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    gemm_nn_rows(a, b, c, k, n, 0, m, accumulate);
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    auto bt = transpose_copy(b, n, k);
    gemm_nn_rows(a, bt.data(), c, k, n, 0, m, accumulate);
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    auto at = transpose_copy(a, k, m);
    gemm_nn_rows(at.data(), b, c, k, n, 0, m, accumulate);
}

template <typename T>
void im2col(const T* x, T* cols, const ConvShape& s) {
    im2col_rows(x, cols, s, 0, s.batch * s.out_h() * s.out_w());
}

template <typename T>
void col2im(const T* cols, T* dx, const ConvShape& s) {
    col2im_cells(cols, dx, s, 0, s.batch * s.in_c * s.in_h * s.in_w);
}

template <typename T>
void maxpool2_forward(const T* x, T* y, std::uint32_t* argmax, std::size_t batch,
                      std::size_t c, std::size_t h, std::size_t w) {
    maxpool2_windows(x, y, argmax, c, h, w, 0, batch * c * (h / 2) * (w / 2));
}

template <typename T>
void relu_forward(const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

}  // namespace serial

#define DIBS_INSTANTIATE_KERNELS(T)                                              \
    template void gemm_nn<T>(const T*, const T*, T*, std::size_t, std::size_t,   \
                             std::size_t, bool);                                  \
    template void gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t,   \
                             std::size_t, bool);                                  \
    template void gemm_tn<T>(const T*, const T*, T*, std::size_t, std::size_t,   \
                             std::size_t, bool);                                  \
    template void add_bias_rows<T>(T*, const T*, std::size_t, std::size_t);      \
    template void relu_forward<T>(const T*, T*, std::size_t);                     \
    template void relu_backward<T>(const T*, const T*, T*, std::size_t);          \
    template void im2col<T>(const T*, T*, const ConvShape&);                      \
    template void col2im<T>(const T*, T*, const ConvShape&);                      \
    template void maxpool2_forward<T>(const T*, T*, std::uint32_t*, std::size_t,  \
                                      std::size_t, std::size_t, std::size_t);     \
    template void maxpool2_backward<T>(const T*, const std::uint32_t*, T*,        \
                                       std::size_t, std::size_t, std::size_t,     \
                                       std::size_t);                              \
    template void serial::gemm_nn<T>(const T*, const T*, T*, std::size_t,        \
                                     std::size_t, std::size_t, bool);             \
    template void serial::gemm_nt<T>(const T*, const T*, T*, std::size_t,        \
                                     std::size_t, std::size_t, bool);             \
    template void serial::gemm_tn<T>(const T*, const T*, T*, std::size_t,        \
                                     std::size_t, std::size_t, bool);             \
    template void serial::im2col<T>(const T*, T*, const ConvShape&);              \
    template void serial::col2im<T>(const T*, T*, const ConvShape&);              \
    template void serial::maxpool2_forward<T>(const T*, T*, std::uint32_t*,       \
                                              std::size_t, std::size_t,           \
                                              std::size_t, std::size_t);          \
    template void serial::relu_forward<T>(const T*, T*, std::size_t);

DIBS_INSTANTIATE_KERNELS(float)
DIBS_INSTANTIATE_KERNELS(double)

}  // namespace dibs::kernels
