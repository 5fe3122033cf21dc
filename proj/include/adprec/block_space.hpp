#pragma once

// Cartesian product space X = (X_1, ..., X_L) of vector and matrix blocks.
// Vector blocks are stored as n×1 matrices so every block is a matrix.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adprec/linalg.hpp"

namespace adprec {

enum class GeometryTag { AdaNorm, FullAdaGrad, DiagAdaGrad, Shampoo, Muon };

[[nodiscard]] std::string_view to_string(GeometryTag tag);
[[nodiscard]] GeometryTag parse_geometry(std::string_view name);

/// Euclidean/Frobenius primal and dual norms. Only Muon uses spectral/nuclear.
[[nodiscard]] constexpr bool is_euclidean(GeometryTag tag) { return tag != GeometryTag::Muon; }

struct BlockShape {
    Eigen::Index rows = 1;
    Eigen::Index cols = 1;
    GeometryTag geometry = GeometryTag::AdaNorm;

    [[nodiscard]] Eigen::Index size() const { return rows * cols; }
    /// Throws InvalidConfig for empty blocks or vector-only geometries on matrices.
    void validate() const;

    friend bool operator==(const BlockShape&, const BlockShape&) = default;
};

/// N = Σ d_ℓ.
[[nodiscard]] Eigen::Index total_dimension(std::span<const BlockShape> shapes);

class ProductPoint {
public:
    ProductPoint() = default;
    explicit ProductPoint(std::vector<Matrix> blocks) : blocks_(std::move(blocks)) {}

    static ProductPoint zeros(std::span<const BlockShape> shapes);

    [[nodiscard]] std::size_t num_blocks() const { return blocks_.size(); }
    [[nodiscard]] const Matrix& operator[](std::size_t i) const { return blocks_[i]; }
    [[nodiscard]] Matrix& operator[](std::size_t i) { return blocks_[i]; }
    [[nodiscard]] const std::vector<Matrix>& blocks() const { return blocks_; }

    [[nodiscard]] bool all_finite() const;
    /// Throws ShapeMismatch unless block ℓ is rows_ℓ × cols_ℓ for every ℓ.
    void check_shapes(std::span<const BlockShape> shapes) const;
    [[nodiscard]] bool same_shape(const ProductPoint& other) const;

    /// Column-major concatenation of all blocks, length N.
    [[nodiscard]] Vector flatten() const;
    static ProductPoint unflatten(const Vector& flat, std::span<const BlockShape> shapes);

private:
    std::vector<Matrix> blocks_;
};

/// ‖V‖_{*,ℓ}: Frobenius for Euclidean geometries, nuclear for Muon.
[[nodiscard]] double block_dual_norm(GeometryTag tag, const Matrix& v);
/// ‖V‖_ℓ: Frobenius for Euclidean geometries, spectral for Muon.
[[nodiscard]] double block_primal_norm(GeometryTag tag, const Matrix& v);

[[nodiscard]] double product_dual_norm_sq(const ProductPoint& v, std::span<const GeometryTag> geoms);
[[nodiscard]] double product_dual_norm_sq(const ProductPoint& v, std::span<const BlockShape> shapes);
[[nodiscard]] double primal_product_norm(const ProductPoint& v, std::span<const GeometryTag> geoms);
[[nodiscard]] double product_inner(const ProductPoint& u, const ProductPoint& v);
/// point + coeff·direction, blockwise.
[[nodiscard]] ProductPoint axpy(const ProductPoint& point, double coeff, const ProductPoint& direction);

[[nodiscard]] std::vector<GeometryTag> geometry_tags(std::span<const BlockShape> shapes);

} // namespace adprec
