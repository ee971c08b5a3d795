#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace dibs {

// Dense row-major n-d array. Shapes are fixed at construction; reshape
// requires an equal element count.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), T(0)) {}

    Tensor(std::vector<std::size_t> shape, T value)
        : shape_(std::move(shape)), data_(count(shape_), value) {}

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    template <typename... Ix>
    T& operator()(Ix... ix) { return data_[offset(ix...)]; }
    template <typename... Ix>
    const T& operator()(Ix... ix) const { return data_[offset(ix...)]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void reshape(std::vector<std::size_t> shape) {
        if (count(shape) != data_.size())
            throw std::invalid_argument("reshape: element count mismatch");
        shape_ = std::move(shape);
    }

    std::string shape_str() const {  // e.g. "(2,3)"
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < shape_.size(); ++i)
            os << shape_[i] << (i + 1 < shape_.size() ? "," : "");
        os << ")";
        return os.str();
    }

private:
    template <typename... Ix>
    std::size_t offset(Ix... ix) const {
        const std::size_t idx[] = {static_cast<std::size_t>(ix)...};
        constexpr std::size_t n = sizeof...(Ix);
        std::size_t off = 0;
        for (std::size_t i = 0; i < n; ++i) off = off * shape_[i] + idx[i];
        return off;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

inline void check(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace dibs
