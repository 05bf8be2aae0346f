#pragma once

#include "mapdiff/errors.hpp"
#include "mapdiff/volume.hpp"

#include <span>
#include <string>
#include <vector>

namespace mapdiff {

/// Channel-major feature map [C][H][W][D] for a single sample.
template <typename T>
struct Tensor {
    int channels{0};
    Dims spatial{};
    std::vector<T> data;

    Tensor() = default;
    Tensor(int c, Dims s, T fill = T(0))
        : channels(c), spatial(s), data(static_cast<std::size_t>(c) * s.count(), fill) {}
    Tensor(int c, Dims s, std::vector<T> values) : channels(c), spatial(s), data(std::move(values)) {
        if (data.size() != static_cast<std::size_t>(c) * s.count()) throw ConfigError("tensor size mismatch");
    }

    [[nodiscard]] std::size_t plane() const { return spatial.count(); }
    [[nodiscard]] std::size_t size() const { return data.size(); }
    [[nodiscard]] std::span<T> channel(int c) {
        return std::span<T>(data).subspan(static_cast<std::size_t>(c) * plane(), plane());
    }
    [[nodiscard]] std::span<const T> channel(int c) const {
        return std::span<const T>(data).subspan(static_cast<std::size_t>(c) * plane(), plane());
    }
    [[nodiscard]] bool same_shape(const Tensor& o) const { return channels == o.channels && spatial == o.spatial; }
};

/// Single-channel tensor from a patch buffer, converting the scalar type.
template <typename T, typename U>
[[nodiscard]] Tensor<T> as_tensor(std::span<const U> values, Dims spatial) {
    std::vector<T> data(values.begin(), values.end());
    return Tensor<T>(1, spatial, std::move(data));
}

/// Named parameter tensor.
template <typename T>
struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<T> value;
};

/// Ordered collection of parameters; gradients use a store with the same layout.
template <typename T>
class ParamStore {
public:
    std::size_t add(std::string name, std::vector<int> shape) {
        std::size_t n = 1;
        for (int s : shape) n *= static_cast<std::size_t>(s);
        params_.push_back(Param<T>{std::move(name), std::move(shape), std::vector<T>(n, T(0))});
        return params_.size() - 1;
    }

    [[nodiscard]] std::size_t size() const { return params_.size(); }
    [[nodiscard]] Param<T>& operator[](std::size_t i) { return params_[i]; }
    [[nodiscard]] const Param<T>& operator[](std::size_t i) const { return params_[i]; }
    [[nodiscard]] std::span<T> values(std::size_t i) { return params_[i].value; }
    [[nodiscard]] std::span<const T> values(std::size_t i) const { return params_[i].value; }
    [[nodiscard]] auto begin() { return params_.begin(); }
    [[nodiscard]] auto end() { return params_.end(); }
    [[nodiscard]] auto begin() const { return params_.begin(); }
    [[nodiscard]] auto end() const { return params_.end(); }

    [[nodiscard]] std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

    /// Same names and shapes, zero-filled.
    [[nodiscard]] ParamStore zeros_like() const {
        ParamStore out;
        for (const auto& p : params_) out.add(p.name, p.shape);
        return out;
    }

    void fill_zero() {
        for (auto& p : params_) std::fill(p.value.begin(), p.value.end(), T(0));
    }

    template <typename U>
    [[nodiscard]] ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& p : params_) {
            const auto idx = out.add(p.name, p.shape);
            std::copy(p.value.begin(), p.value.end(), out[idx].value.begin());
        }
        return out;
    }

private:
    std::vector<Param<T>> params_;
};

}  // namespace mapdiff
