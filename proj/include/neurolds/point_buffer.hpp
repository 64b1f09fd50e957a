#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace neurolds {

// N x d row-major matrix of coordinates in the unit cube.
class PointBuffer {
public:
    PointBuffer() = default;
    PointBuffer(std::size_t n_points, std::size_t dim)
        : n_points_(n_points), dim_(dim), coords_(n_points * dim, 0.0) {}
    PointBuffer(std::size_t n_points, std::size_t dim, std::vector<double> coords)
        : n_points_(n_points), dim_(dim), coords_(std::move(coords)) {
        if (coords_.size() != n_points_ * dim_) {
            throw std::invalid_argument("PointBuffer: coords length " + std::to_string(coords_.size()) +
                                        " != n_points * dim = " + std::to_string(n_points_ * dim_));
        }
    }

    std::size_t size() const { return n_points_; }
    std::size_t dim() const { return dim_; }
    bool empty() const { return n_points_ == 0; }

    double& operator()(std::size_t i, std::size_t j) { return coords_[i * dim_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return coords_[i * dim_ + j]; }

    std::span<double> row(std::size_t i) { return {coords_.data() + i * dim_, dim_}; }
    std::span<const double> row(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }

    std::vector<double>& coords() { return coords_; }
    const std::vector<double>& coords() const { return coords_; }
    double* data() { return coords_.data(); }
    const double* data() const { return coords_.data(); }

    // First n rows as a new buffer.
    PointBuffer prefix(std::size_t n) const {
        if (n > n_points_) throw std::out_of_range("PointBuffer::prefix: n exceeds size");
        return {n, dim_, std::vector<double>(coords_.begin(), coords_.begin() + static_cast<std::ptrdiff_t>(n * dim_))};
    }

    // True when every coordinate lies in [0,1].
    bool in_unit_cube() const {
        for (double x : coords_) {
            if (!(x >= 0.0 && x <= 1.0)) return false;
        }
        return true;
    }

    friend bool operator==(const PointBuffer&, const PointBuffer&) = default;

private:
    std::size_t n_points_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> coords_;
};

}  // namespace neurolds
