#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "slowfast/error.hpp"

namespace slowfast {

enum class GridKind { TruncatedLine, Torus };

/// One-dimensional grid, uniform in a computational coordinate z. A truncated
/// line includes both end nodes; a torus of period P has `count` nodes at
/// origin + i*P/count (the node at origin + P is identified with the first one).
/// A squared line places physical nodes at y = z^2 with z uniform, which keeps
/// functions of sqrt(y) smooth near a natural boundary at 0. `node` and
/// `lo`/`hi` are physical; `spacing` and `coord` are computational.
class Grid1D {
public:
    Grid1D() = default;

    static Grid1D line(double lo, double hi, std::size_t count) {
        require(count >= 2, ErrorCode::InvalidArgument, "grid needs at least 2 nodes");
        require(hi > lo, ErrorCode::InvalidArgument, "grid interval is empty");
        Grid1D g;
        g.kind_ = GridKind::TruncatedLine;
        g.lo_ = lo;
        g.count_ = count;
        g.spacing_ = (hi - lo) / static_cast<double>(count - 1);
        return g;
    }

    /// Nodes y_i = z_i^2 with z uniform on [sqrt(lo), sqrt(hi)].
    static Grid1D squared(double lo, double hi, std::size_t count) {
        require(lo >= 0.0, ErrorCode::InvalidArgument, "squared grid needs lo >= 0");
        Grid1D g = line(std::sqrt(lo), std::sqrt(hi), count);
        g.squared_ = true;
        return g;
    }

    static Grid1D symmetric(double half_width, std::size_t count) {
        return line(-half_width, half_width, count);
    }

    static Grid1D torus(double period, std::size_t count, double origin = 0.0) {
        require(count >= 2, ErrorCode::InvalidArgument, "grid needs at least 2 nodes");
        require(period > 0.0, ErrorCode::InvalidArgument, "torus period must be positive");
        Grid1D g;
        g.kind_ = GridKind::Torus;
        g.lo_ = origin;
        g.count_ = count;
        g.spacing_ = period / static_cast<double>(count);
        return g;
    }

    [[nodiscard]] GridKind kind() const noexcept { return kind_; }
    [[nodiscard]] bool periodic() const noexcept { return kind_ == GridKind::Torus; }
    [[nodiscard]] std::size_t size() const noexcept { return count_; }
    [[nodiscard]] double spacing() const noexcept { return spacing_; }
    [[nodiscard]] bool squared() const noexcept { return squared_; }
    [[nodiscard]] double lo() const noexcept { return to_physical(lo_); }
    [[nodiscard]] double hi() const noexcept { return to_physical(coord_hi()); }
    [[nodiscard]] double coord_lo() const noexcept { return lo_; }
    [[nodiscard]] double coord_hi() const noexcept {
        return periodic() ? lo_ + spacing_ * static_cast<double>(count_)
                          : lo_ + spacing_ * static_cast<double>(count_ - 1);
    }
    [[nodiscard]] double period() const noexcept { return spacing_ * static_cast<double>(count_); }
    [[nodiscard]] double coord(std::size_t i) const noexcept { return lo_ + spacing_ * static_cast<double>(i); }
    [[nodiscard]] double node(std::size_t i) const noexcept { return to_physical(coord(i)); }

    /// dy/dz and d2y/dz2 at node i.
    [[nodiscard]] double jacobian(std::size_t i) const noexcept { return squared_ ? 2.0 * coord(i) : 1.0; }
    [[nodiscard]] double jacobian2() const noexcept { return squared_ ? 2.0 : 0.0; }

    [[nodiscard]] double to_physical(double z) const noexcept { return squared_ ? z * z : z; }
    [[nodiscard]] double to_coord(double y) const noexcept { return squared_ ? std::sqrt(std::max(y, 0.0)) : y; }

    [[nodiscard]] std::vector<double> nodes() const {
        std::vector<double> out(count_);
        for (std::size_t i = 0; i < count_; ++i) out[i] = node(i);
        return out;
    }

    /// Maps y into the fundamental cell on a torus; identity on a line.
    [[nodiscard]] double wrap(double y) const noexcept {
        if (!periodic()) return y;
        const double p = period();
        double r = std::fmod(y - lo_, p);
        if (r < 0.0) r += p;
        return lo_ + r;
    }

    /// Linear interpolation of nodal values; clamps outside a truncated line.
    [[nodiscard]] double interpolate(const std::vector<double>& values, double y) const {
        return interpolate_strided(values.data(), 1, y);
    }

    [[nodiscard]] double interpolate_strided(const double* values, std::size_t stride, double y_phys) const {
        const double y = to_coord(y_phys);
        if (periodic()) {
            const double s = (wrap(y) - lo_) / spacing_;
            std::size_t i = static_cast<std::size_t>(s);
            if (i >= count_) i = count_ - 1;
            const double w = s - static_cast<double>(i);
            const std::size_t j = (i + 1) % count_;
            return (1.0 - w) * values[i * stride] + w * values[j * stride];
        }
        if (y <= lo_) return values[0];
        if (y >= coord_hi()) return values[(count_ - 1) * stride];
        const double s = (y - lo_) / spacing_;
        std::size_t i = static_cast<std::size_t>(s);
        if (i >= count_ - 1) i = count_ - 2;
        const double w = s - static_cast<double>(i);
        return (1.0 - w) * values[i * stride] + w * values[(i + 1) * stride];
    }

    [[nodiscard]] bool same_as(const Grid1D& other) const noexcept {
        return kind_ == other.kind_ && squared_ == other.squared_ && count_ == other.count_ &&
               std::abs(lo_ - other.lo_) <= 1e-12 * (1.0 + std::abs(lo_)) &&
               std::abs(spacing_ - other.spacing_) <= 1e-12 * spacing_;
    }

private:
    GridKind kind_ = GridKind::TruncatedLine;
    double lo_ = 0.0;
    double spacing_ = 1.0;
    std::size_t count_ = 0;
    bool squared_ = false;
};

inline void require_same_grid(const Grid1D& a, const Grid1D& b, const std::string& what) {
    require(a.same_as(b), ErrorCode::GridMismatch, what + ": grids differ");
}

}  // namespace slowfast
