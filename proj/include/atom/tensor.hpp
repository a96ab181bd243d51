#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace atom {

// Dense row-major float32 array.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(numel(shape), 0.0f) {}
    Tensor(std::vector<int> s, std::vector<float> data) : shape(std::move(s)), v(std::move(data)) {}

    static std::size_t numel(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) n *= static_cast<std::size_t>(d);
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, float value) {
        Tensor t(std::move(s));
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }
    static Tensor scalar(float value) { return Tensor({1}, {value}); }

    std::size_t size() const { return v.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    // 2-D accessors
    int rows() const { return shape[0]; }
    int cols() const { return rank() == 1 ? shape[0] : shape[1]; }
    float& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols() + j]; }
    float at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols() + j]; }

    std::string shape_str() const;
};

bool same_shape(const Tensor& a, const Tensor& b);

}  // namespace atom
