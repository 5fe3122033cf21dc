#include "adprec/block_space.hpp"

#include <cmath>
#include <string>

namespace adprec {

std::string_view to_string(GeometryTag tag) {
    switch (tag) {
    case GeometryTag::AdaNorm: return "AdaNorm";
    case GeometryTag::FullAdaGrad: return "FullAdaGrad";
    case GeometryTag::DiagAdaGrad: return "DiagAdaGrad";
    case GeometryTag::Shampoo: return "Shampoo";
    case GeometryTag::Muon: return "Muon";
    }
    return "?";
}

GeometryTag parse_geometry(std::string_view name) {
    for (auto tag : {GeometryTag::AdaNorm, GeometryTag::FullAdaGrad, GeometryTag::DiagAdaGrad,
                     GeometryTag::Shampoo, GeometryTag::Muon}) {
        if (to_string(tag) == name) {
            return tag;
        }
    }
    throw InvalidConfig("unknown geometry '" + std::string(name) + "'");
}

void BlockShape::validate() const {
    if (rows < 1 || cols < 1) {
        throw InvalidConfig("block dimensions must be positive");
    }
    const bool vector_only = geometry == GeometryTag::AdaNorm || geometry == GeometryTag::FullAdaGrad ||
                             geometry == GeometryTag::DiagAdaGrad;
    if (vector_only && cols != 1) {
        throw InvalidConfig(std::string(to_string(geometry)) + " requires a vector block (cols = 1)");
    }
}

Eigen::Index total_dimension(std::span<const BlockShape> shapes) {
    Eigen::Index n = 0;
    for (const auto& s : shapes) {
        n += s.size();
    }
    return n;
}

ProductPoint ProductPoint::zeros(std::span<const BlockShape> shapes) {
    std::vector<Matrix> blocks;
    blocks.reserve(shapes.size());
    for (const auto& s : shapes) {
        blocks.push_back(Matrix::Zero(s.rows, s.cols));
    }
    return ProductPoint(std::move(blocks));
}

bool ProductPoint::all_finite() const {
    for (const auto& b : blocks_) {
        if (!b.allFinite()) {
            return false;
        }
    }
    return true;
}

void ProductPoint::check_shapes(std::span<const BlockShape> shapes) const {
    if (shapes.size() != blocks_.size()) {
        throw ShapeMismatch("block count " + std::to_string(blocks_.size()) + " != " +
                            std::to_string(shapes.size()));
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (blocks_[i].rows() != shapes[i].rows || blocks_[i].cols() != shapes[i].cols) {
            throw ShapeMismatch("block " + std::to_string(i) + " has the wrong shape");
        }
    }
}

bool ProductPoint::same_shape(const ProductPoint& other) const {
    if (other.blocks_.size() != blocks_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (blocks_[i].rows() != other.blocks_[i].rows() || blocks_[i].cols() != other.blocks_[i].cols()) {
            return false;
        }
    }
    return true;
}

Vector ProductPoint::flatten() const {
    Eigen::Index n = 0;
    for (const auto& b : blocks_) {
        n += b.size();
    }
    Vector out(n);
    Eigen::Index off = 0;
    for (const auto& b : blocks_) {
        out.segment(off, b.size()) = b.reshaped();
        off += b.size();
    }
    return out;
}

ProductPoint ProductPoint::unflatten(const Vector& flat, std::span<const BlockShape> shapes) {
    if (flat.size() != total_dimension(shapes)) {
        throw ShapeMismatch("unflatten: vector length does not match the block shapes");
    }
    std::vector<Matrix> blocks;
    blocks.reserve(shapes.size());
    Eigen::Index off = 0;
    for (const auto& s : shapes) {
        blocks.push_back(flat.segment(off, s.size()).reshaped(s.rows, s.cols));
        off += s.size();
    }
    return ProductPoint(std::move(blocks));
}

double block_dual_norm(GeometryTag tag, const Matrix& v) {
    return is_euclidean(tag) ? v.norm() : linalg::nuclear_norm(v);
}

double block_primal_norm(GeometryTag tag, const Matrix& v) {
    return is_euclidean(tag) ? v.norm() : linalg::spectral_norm(v);
}

double product_dual_norm_sq(const ProductPoint& v, std::span<const GeometryTag> geoms) {
    if (geoms.size() != v.num_blocks()) {
        throw ShapeMismatch("product_dual_norm_sq: one geometry per block required");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < geoms.size(); ++i) {
        const double n = block_dual_norm(geoms[i], v[i]);
        total += n * n;
    }
    return total;
}

double product_dual_norm_sq(const ProductPoint& v, std::span<const BlockShape> shapes) {
    v.check_shapes(shapes);
    return product_dual_norm_sq(v, geometry_tags(shapes));
}

double primal_product_norm(const ProductPoint& v, std::span<const GeometryTag> geoms) {
    if (geoms.size() != v.num_blocks()) {
        throw ShapeMismatch("primal_product_norm: one geometry per block required");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < geoms.size(); ++i) {
        const double n = block_primal_norm(geoms[i], v[i]);
        total += n * n;
    }
    return std::sqrt(total);
}

double product_inner(const ProductPoint& u, const ProductPoint& v) {
    if (!u.same_shape(v)) {
        throw ShapeMismatch("product_inner: shape lists differ");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < u.num_blocks(); ++i) {
        total += u[i].cwiseProduct(v[i]).sum();
    }
    return total;
}

ProductPoint axpy(const ProductPoint& point, double coeff, const ProductPoint& direction) {
    if (!point.same_shape(direction)) {
        throw ShapeMismatch("axpy: shape lists differ");
    }
    std::vector<Matrix> out;
    out.reserve(point.num_blocks());
    for (std::size_t i = 0; i < point.num_blocks(); ++i) {
        out.push_back(point[i] + coeff * direction[i]);
    }
    return ProductPoint(std::move(out));
}

std::vector<GeometryTag> geometry_tags(std::span<const BlockShape> shapes) {
    std::vector<GeometryTag> tags;
    tags.reserve(shapes.size());
    for (const auto& s : shapes) {
        tags.push_back(s.geometry);
    }
    return tags;
}

} // namespace adprec
