#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "consingan/errors.hpp"

namespace consingan {

// Dense row-major float tensor. Images and feature maps are {C,H,W},
// conv weights {Cout,Cin,Kh,Kw}, per-channel vectors {C,1,1}, scalars {1}.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(numel_of(shape_), 0.0f);
    }

    Tensor(std::vector<int> shape, float fill) : shape_(std::move(shape)) {
        data_.assign(numel_of(shape_), fill);
    }

    static Tensor scalar(float v) { return Tensor({1}, v); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](size_t i) { return data_[i]; }
    float operator[](size_t i) const { return data_[i]; }

    // {C,H,W} accessor
    float& at(int c, int h, int w) {
        return data_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }
    float at(int c, int h, int w) const {
        return data_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    float item() const {
        if (data_.size() != 1) throw InternalError("item() on non-scalar tensor");
        return data_[0];
    }

    static size_t numel_of(const std::vector<int>& shape) {
        size_t n = shape.empty() ? 0 : 1;
        for (int d : shape) {
            if (d < 0) throw InvalidArgumentError("negative tensor dimension");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

inline std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) out += ",";
    }
    return out + "]";
}

}  // namespace consingan
