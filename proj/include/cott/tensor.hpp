#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "cott/errors.hpp"

namespace cott {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense shape-tagged tensor: row-major contiguous storage with Eigen map
/// views over the trailing two dimensions. All math runs through the maps,
/// so Eigen expressions apply directly to slices.
template <typename Scalar>
class Tensor {
public:
    using MatMap = Eigen::Map<RowMatrix<Scalar>>;
    using ConstMatMap = Eigen::Map<const RowMatrix<Scalar>>;
    using VecMap = Eigen::Map<Vector<Scalar>>;
    using ConstVecMap = Eigen::Map<const Vector<Scalar>>;

    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        if (shape_.empty()) throw ShapeError("tensor: shape must have at least one dimension");
        Index n = 1;
        for (Index d : shape_) {
            if (d < 1) throw ShapeError("tensor: every dimension must be >= 1");
            n *= d;
        }
        data_.assign(static_cast<std::size_t>(n), Scalar(0));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    Index dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    Index size() const { return static_cast<Index>(data_.size()); }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }

    Scalar& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
    Scalar operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

    /// Number of matrix slices when viewing the trailing two dims.
    Index outer_count() const {
        require_rank_at_least(2);
        Index n = 1;
        for (int i = 0; i + 2 < rank(); ++i) n *= shape_[static_cast<std::size_t>(i)];
        return n;
    }

    /// Matrix view of the trailing two dims at flattened leading index.
    MatMap mat(Index outer = 0) {
        require_rank_at_least(2);
        const Index r = shape_[shape_.size() - 2];
        const Index c = shape_.back();
        return MatMap(data() + outer * r * c, r, c);
    }
    ConstMatMap mat(Index outer = 0) const {
        require_rank_at_least(2);
        const Index r = shape_[shape_.size() - 2];
        const Index c = shape_.back();
        return ConstMatMap(data() + outer * r * c, r, c);
    }

    /// Rank-4 convenience: slice (n, h) of a (N, H, s, d) tensor.
    MatMap mat(Index n, Index h) { return mat(n * dim(1) + h); }
    ConstMatMap mat(Index n, Index h) const { return mat(n * dim(1) + h); }

    VecMap flat() { return VecMap(data(), size()); }
    ConstVecMap flat() const { return ConstVecMap(data(), size()); }

    bool all_finite() const {
        for (const Scalar& v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    void require_rank_at_least(int r) const {
        if (rank() < r) throw ShapeError("tensor: rank too small for this view");
    }

    Shape shape_;
    std::vector<Scalar> data_;
};

template <typename Scalar>
bool same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    return a.shape() == b.shape();
}

template <typename Scalar>
Scalar max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    if (!same_shape(a, b)) throw ShapeError("max_abs_diff: shape mismatch");
    Scalar m = 0;
    for (Index i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Unravels a flat offset into a per-dimension index tuple.
inline Shape unravel_index(Index flat, const Shape& shape) {
    Shape idx(shape.size(), 0);
    for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
        idx[static_cast<std::size_t>(i)] = flat % shape[static_cast<std::size_t>(i)];
        flat /= shape[static_cast<std::size_t>(i)];
    }
    return idx;
}

}  // namespace cott
