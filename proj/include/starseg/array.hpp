#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace starseg {

/// Dense row-major H x W map.
template <typename T>
struct Array2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Array2() = default;
    Array2(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

    T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool in_bounds(std::int64_t r, std::int64_t c) const {
        return r >= 0 && c >= 0 && r < static_cast<std::int64_t>(rows) &&
               c < static_cast<std::int64_t>(cols);
    }
    std::size_t size() const { return data.size(); }

    friend bool operator==(const Array2&, const Array2&) = default;
};

/// Dense row-major H x W x C stack, channel-last.
template <typename T>
struct Array3 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t channels = 0;
    std::vector<T> data;

    Array3() = default;
    Array3(std::size_t r, std::size_t c, std::size_t ch, T fill = T{})
        : rows(r), cols(c), channels(ch), data(r * c * ch, fill) {}

    T& operator()(std::size_t r, std::size_t c, std::size_t k) {
        return data[(r * cols + c) * channels + k];
    }
    const T& operator()(std::size_t r, std::size_t c, std::size_t k) const {
        return data[(r * cols + c) * channels + k];
    }

    std::span<T> pixel(std::size_t r, std::size_t c) {
        return {data.data() + (r * cols + c) * channels, channels};
    }
    std::span<const T> pixel(std::size_t r, std::size_t c) const {
        return {data.data() + (r * cols + c) * channels, channels};
    }
    std::size_t size() const { return data.size(); }

    friend bool operator==(const Array3&, const Array3&) = default;
};

using InstanceMap = Array2<std::int32_t>;
using Mask = Array2<std::uint8_t>;
using Image = Array3<float>;

}  // namespace starseg
