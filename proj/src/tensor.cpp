#include "atom/tensor.hpp"

#include <algorithm>

namespace atom {

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

}  // namespace atom
