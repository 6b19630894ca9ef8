#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace vbp {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Dense row-major float tensor. Rank 1..3; (C,H,W) for feature-map
/// stacks, (H,W) for single-channel maps, (N) for vectors.
/// Immutable by convention once filled: operations return new tensors.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<float> data);

    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    float operator[](std::size_t i) const { return data_[i]; }
    float& operator[](std::size_t i) { return data_[i]; }

    // (C,H,W) indexing
    float at(int c, int h, int w) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }
    float& at(int c, int h, int w) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }
    // (H,W) indexing
    float at(int h, int w) const {
        return data_[static_cast<std::size_t>(h) * shape_[1] + w];
    }
    float& at(int h, int w) {
        return data_[static_cast<std::size_t>(h) * shape_[1] + w];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

/// Mean over the channel axis of a (C,H,W) tensor; accumulates in double.
Tensor channel_mean(const Tensor& t);

/// Elementwise product of two same-shape tensors.
Tensor pointwise_multiply(const Tensor& a, const Tensor& b);

/// Affine rescale to [0,1]; a constant map becomes all zeros.
Tensor normalize_unit_interval(const Tensor& t);

}  // namespace vbp
