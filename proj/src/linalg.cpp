#include "adprec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace adprec::linalg {

namespace {

// Tolerance below zero accepted for PSD-tagged inputs: 1e-10·trace/dim.
double psd_tolerance(const Vector& eig) {
    const double scale = eig.cwiseAbs().sum() / static_cast<double>(std::max<Eigen::Index>(eig.size(), 1));
    return 1e-10 * scale;
}

Vector spectral_map(const Vector& eig, double p, std::optional<double> floor) {
    Vector lam = eig;
    if (floor) {
        const double lo = *floor * (1.0 - kFloorSlack);
        lam = lam.cwiseMax(lo);
    }
    const double tol = psd_tolerance(eig);
    Vector out(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        double l = lam(i);
        if (p < 0.0) {
            if (!(l > 0.0)) {
                throw NonPositiveDefinite("negative power of a matrix with eigenvalue " + std::to_string(l));
            }
        } else if (l < 0.0) {
            if (l < -tol) {
                throw NonPositiveDefinite("fractional power of an indefinite matrix (eigenvalue " +
                                          std::to_string(l) + ")");
            }
            l = 0.0;
        }
        out(i) = (p == 1.0) ? l : std::pow(l, p);
    }
    return out;
}

} // namespace

SymMatrix::SymMatrix(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw ShapeMismatch("SymMatrix requires a square matrix");
    }
    m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index dim, double scale) {
    return SymMatrix(scale * Matrix::Identity(dim, dim));
}

SymMatrix SymMatrix::diagonal(const Vector& diag) {
    return SymMatrix(Matrix(diag.asDiagonal()));
}

SymMatrix& SymMatrix::add_gram(const Matrix& v) {
    if (v.rows() != m_.rows()) {
        throw ShapeMismatch("add_gram: row count does not match matrix dimension");
    }
    m_.noalias() += v * v.transpose();
    m_ = 0.5 * (m_ + m_.transpose()).eval();
    return *this;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
    if (other.dim() != dim()) {
        throw ShapeMismatch("SymMatrix addition with different dimensions");
    }
    m_ += other.m_;
    return *this;
}

EigenPair eigh(const SymMatrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix());
    if (solver.info() != Eigen::Success) {
        throw NonFiniteIterate("symmetric eigensolver did not converge");
    }
    return {solver.eigenvalues(), solver.eigenvectors()};
}

SvdTriple svd(const Matrix& g) {
    Eigen::JacobiSVD<Matrix> solver(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

SymMatrix psd_power(const SymMatrix& m, double p, std::optional<double> floor) {
    const auto [eig, q] = eigh(m);
    const Vector lam = spectral_map(eig, p, floor);
    return SymMatrix(q * lam.asDiagonal() * q.transpose());
}

double trace_log_psd(const SymMatrix& m, std::optional<double> floor) {
    Vector eig = eigh(m).values;
    if (floor) {
        eig = eig.cwiseMax(*floor * (1.0 - kFloorSlack));
    }
    double total = 0.0;
    for (double l : eig) {
        if (!(l > 0.0)) {
            throw NonPositiveDefinite("log of a matrix with eigenvalue " + std::to_string(l));
        }
        total += std::log(l);
    }
    return total;
}

double trace_power(const SymMatrix& m, double p, std::optional<double> floor) {
    return spectral_map(eigh(m).values, p, floor).sum();
}

double min_eigenvalue(const SymMatrix& m) {
    if (m.dim() == 0) {
        return 0.0;
    }
    return eigh(m).values(0);
}

Matrix msign(const Matrix& g) {
    if (g.size() == 0) {
        return g;
    }
    const SvdTriple s = svd(g);
    const double smax = s.sigma.size() > 0 ? s.sigma(0) : 0.0;
    Matrix out = Matrix::Zero(g.rows(), g.cols());
    if (!(smax > 0.0)) {
        return out;
    }
    const double tau = kSvdRankTol * smax;
    for (Eigen::Index i = 0; i < s.sigma.size(); ++i) {
        if (s.sigma(i) > tau) {
            out.noalias() += s.U.col(i) * s.V.col(i).transpose();
        }
    }
    return out;
}

double nuclear_norm(const Matrix& g) {
    if (g.size() == 0) {
        return 0.0;
    }
    return Eigen::JacobiSVD<Matrix>(g).singularValues().sum();
}

double spectral_norm(const Matrix& g) {
    if (g.size() == 0) {
        return 0.0;
    }
    return Eigen::JacobiSVD<Matrix>(g).singularValues()(0);
}

Matrix kron_apply(const SymMatrix& left, const SymMatrix& right, const Matrix& g, double p,
                  std::optional<double> floor) {
    if (left.dim() != g.rows() || right.dim() != g.cols()) {
        throw ShapeMismatch("kron_apply: factor dimensions do not match the block");
    }
    return psd_power(left, p, floor).matrix() * g * psd_power(right, p, floor).matrix();
}

Matrix kron_precondition(const SymMatrix& left, const SymMatrix& right, const Matrix& g,
                         std::optional<double> floor) {
    return kron_apply(left, right, g, -0.25, floor);
}

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out(rows, cols);
    // column-major fill keeps the draw order fixed
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            out(i, j) = normal(rng);
        }
    }
    return out;
}

Matrix random_orthogonal(Eigen::Index dim, std::mt19937_64& rng) {
    const Matrix a = gaussian_matrix(dim, dim, rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (r(i, i) < 0.0) {
            q.col(i) = -q.col(i);
        }
    }
    return q;
}

SymMatrix random_psd(Eigen::Index dim, double condition_target, std::mt19937_64& rng) {
    if (dim < 1 || !(condition_target >= 1.0)) {
        throw InvalidConfig("random_psd: need dim >= 1 and condition_target >= 1");
    }
    const Matrix q = random_orthogonal(dim, rng);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double log_lo = -std::log(condition_target);
    Vector lam(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        lam(i) = std::exp(log_lo * unif(rng));
    }
    return SymMatrix(q * lam.asDiagonal() * q.transpose());
}

SymMatrix random_psd(Eigen::Index dim, double condition_target, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return random_psd(dim, condition_target, rng);
}

} // namespace adprec::linalg
