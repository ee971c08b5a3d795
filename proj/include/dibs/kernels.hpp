#pragma once

#include <cstddef>
#include <cstdint>

// Batched linear-algebra kernels used by the network layers. The OpenMP
// variants in dibs::kernels partition work so that every output element is
// written by exactly one thread using the same inner accumulation order as
// the serial reference in dibs::kernels::serial. Outputs are therefore
// bitwise identical for any thread count, which the tests assert.
namespace dibs::kernels {

struct ConvShape {
    std::size_t batch = 0;
    std::size_t in_c = 0, in_h = 0, in_w = 0;
    std::size_t out_c = 0;
    std::size_t kh = 3, kw = 3;
    std::size_t pad = 1, stride = 1;

    std::size_t out_h() const { return (in_h + 2 * pad - kh) / stride + 1; }
    std::size_t out_w() const { return (in_w + 2 * pad - kw) / stride + 1; }
    std::size_t patch() const { return in_c * kh * kw; }
};

// c[m x n] = a[m x k] * b[k x n], or += when accumulate.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false);

// c[m x n] = a[m x k] * b^T, with b stored [n x k].
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false);

// c[m x n] = a^T * b, with a stored [k x m], b stored [k x n].
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false);

template <typename T>
void add_bias_rows(T* y, const T* bias, std::size_t rows, std::size_t cols);

template <typename T>
void relu_forward(const T* x, T* y, std::size_t n);

// dx = dy where x > 0 else 0.
template <typename T>
void relu_backward(const T* x, const T* dy, T* dx, std::size_t n);

// x is [batch, in_c, in_h, in_w]; cols is [batch*out_h*out_w, in_c*kh*kw]
// with the patch axis ordered (in_c, kh, kw).
template <typename T>
void im2col(const T* x, T* cols, const ConvShape& s);

// Adjoint of im2col; overwrites dx. Gather formulation: each input cell sums
// its incident patch positions in a fixed order.
template <typename T>
void col2im(const T* cols, T* dx, const ConvShape& s);

// 2x2 max pooling, stride 2, floor semantics for odd extents. argmax holds
// the flat input index of each selected element (first maximum wins).
template <typename T>
void maxpool2_forward(const T* x, T* y, std::uint32_t* argmax, std::size_t batch,
                      std::size_t c, std::size_t h, std::size_t w);

template <typename T>
void maxpool2_backward(const T* dy, const std::uint32_t* argmax, T* dx,
                       std::size_t batch, std::size_t c, std::size_t h,
                       std::size_t w);

namespace serial {

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false);
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false);
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false);
template <typename T>
void im2col(const T* x, T* cols, const ConvShape& s);
template <typename T>
void col2im(const T* cols, T* dx, const ConvShape& s);
template <typename T>
void maxpool2_forward(const T* x, T* y, std::uint32_t* argmax, std::size_t batch,
                      std::size_t c, std::size_t h, std::size_t w);
template <typename T>
void relu_forward(const T* x, T* y, std::size_t n);

}  // namespace serial

}  // namespace dibs::kernels
