#pragma once

// Dense tensors, CP models and the matrix products that tie them together.
//
// Vectorization convention: vec(X) lists entries with the LAST mode index
// varying fastest (row-major over (i_1, ..., i_N)). With this ordering
//   vec(sum_f a1_f o a2_f o ... o aN_f) = (A1 kr A2 kr ... kr AN) * 1
// where kr is the Khatri-Rao product whose second operand varies fastest.

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "cprip/error.hpp"

namespace cprip {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using FactorMatrix = Matrix;

inline bool all_finite(std::span<const double> values) {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool all_finite(const Matrix& m) {
    return all_finite(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
}

/// Mode sizes (I_1, ..., I_N) of an order-N tensor, N >= 2.
class Shape {
public:
    Shape() = default;

    explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
        require(dims_.size() >= 2, ErrorKind::invalid_argument,
                "tensor order must be at least 2, got " + std::to_string(dims_.size()));
        std::size_t count = 1;
        for (std::size_t d : dims_) {
            require(d >= 1, ErrorKind::invalid_argument, "every mode size must be >= 1");
            require(count <= std::numeric_limits<std::size_t>::max() / d,
                    ErrorKind::budget_exceeded, "element count overflows size_t");
            count *= d;
        }
        count_ = count;
    }

    [[nodiscard]] std::size_t order() const noexcept { return dims_.size(); }
    [[nodiscard]] std::size_t dim(std::size_t n) const { return dims_.at(n); }
    [[nodiscard]] const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t element_count() const noexcept { return count_; }

    /// Flat offset of a multi-index in the canonical vectorization.
    [[nodiscard]] std::size_t offset(std::span<const std::size_t> index) const {
        require(index.size() == dims_.size(), ErrorKind::dimension_mismatch,
                "multi-index length differs from tensor order");
        std::size_t flat = 0;
        for (std::size_t n = 0; n < dims_.size(); ++n) {
            require(index[n] < dims_[n], ErrorKind::invalid_argument, "index out of range");
            flat = flat * dims_[n] + index[n];
        }
        return flat;
    }

    friend bool operator==(const Shape& a, const Shape& b) { return a.dims_ == b.dims_; }

private:
    std::vector<std::size_t> dims_;
    std::size_t count_ = 0;
};

inline std::string to_string(const Shape& shape) {
    std::string s;
    for (std::size_t n = 0; n < shape.order(); ++n) {
        if (n) s += 'x';
        s += std::to_string(shape.dim(n));
    }
    return s;
}

/// Order-N real array stored as vec(X).
class DenseTensor {
public:
    DenseTensor() = default;

    explicit DenseTensor(Shape shape)
        : shape_(std::move(shape)), values_(shape_.element_count(), 0.0) {}

    DenseTensor(Shape shape, std::vector<double> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        require(values_.size() == shape_.element_count(), ErrorKind::dimension_mismatch,
                "value count " + std::to_string(values_.size()) + " does not match shape " +
                    to_string(shape_));
        require(all_finite(values_), ErrorKind::non_finite, "tensor entries must be finite");
    }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] double operator[](std::size_t flat) const { return values_[flat]; }

    [[nodiscard]] double at(std::span<const std::size_t> index) const {
        return values_[shape_.offset(index)];
    }
    [[nodiscard]] double at(std::initializer_list<std::size_t> index) const {
        return at(std::span<const std::size_t>(index.begin(), index.size()));
    }

    [[nodiscard]] Eigen::Map<const Vector> vec() const {
        return {values_.data(), static_cast<Eigen::Index>(values_.size())};
    }

private:
    Shape shape_;
    std::vector<double> values_;
};

/// X = sum_f A1(:,f) o ... o AN(:,f). Component weights live inside the factors.
class CpModel {
public:
    CpModel() = default;

    explicit CpModel(std::vector<FactorMatrix> factors) : factors_(std::move(factors)) {
        require(factors_.size() >= 2, ErrorKind::invalid_argument,
                "a CP model needs at least 2 factors");
        const auto rank = factors_.front().cols();
        require(rank >= 1, ErrorKind::invalid_argument, "CP rank must be >= 1");
        std::vector<std::size_t> dims;
        for (std::size_t n = 0; n < factors_.size(); ++n) {
            const auto& a = factors_[n];
            require(a.cols() == rank, ErrorKind::dimension_mismatch,
                    "factor " + std::to_string(n) + " has " + std::to_string(a.cols()) +
                        " columns, expected " + std::to_string(rank));
            require(a.rows() >= 1, ErrorKind::invalid_argument, "factor with zero rows");
            require(all_finite(a), ErrorKind::non_finite, "factor entries must be finite");
            dims.push_back(static_cast<std::size_t>(a.rows()));
        }
        shape_ = Shape(std::move(dims));
    }

    [[nodiscard]] std::size_t order() const noexcept { return factors_.size(); }
    [[nodiscard]] std::size_t rank() const noexcept {
        return factors_.empty() ? 0 : static_cast<std::size_t>(factors_.front().cols());
    }
    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] const std::vector<FactorMatrix>& factors() const noexcept { return factors_; }
    [[nodiscard]] const FactorMatrix& factor(std::size_t n) const { return factors_.at(n); }

    /// Total number of factor entries, sum_n I_n F.
    [[nodiscard]] std::size_t parameter_count() const noexcept {
        std::size_t p = 0;
        for (const auto& a : factors_) p += static_cast<std::size_t>(a.size());
        return p;
    }

private:
    std::vector<FactorMatrix> factors_;
    Shape shape_;
};

inline std::size_t parameter_count(const Shape& shape, std::size_t rank) {
    std::size_t p = 0;
    for (std::size_t d : shape.dims()) p += d * rank;
    return p;
}

/// Column-wise Kronecker product; row index is i_a * rows(B) + i_b.
inline Matrix khatri_rao(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), ErrorKind::dimension_mismatch,
            "Khatri-Rao operands need equal column counts (" + std::to_string(a.cols()) +
                " vs " + std::to_string(b.cols()) + ")");
    Matrix out(a.rows() * b.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        out.middleRows(i * b.rows(), b.rows()) = b.array().rowwise() * a.row(i).array();
    return out;
}

/// Left fold A1 kr A2 kr ... kr AN.
inline Matrix khatri_rao_chain(std::span<const Matrix> factors) {
    require(!factors.empty(), ErrorKind::invalid_argument, "Khatri-Rao chain of zero matrices");
    Matrix acc = factors.front();
    for (std::size_t n = 1; n < factors.size(); ++n) acc = khatri_rao(acc, factors[n]);
    return acc;
}

inline Matrix kronecker(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline DenseTensor reconstruct(const CpModel& model) {
    require(model.order() >= 2, ErrorKind::invalid_argument, "empty CP model");
    const Vector v = khatri_rao_chain(model.factors()).rowwise().sum();
    return DenseTensor(model.shape(), std::vector<double>(v.data(), v.data() + v.size()));
}

inline double frobenius_norm(const DenseTensor& x) { return x.vec().norm(); }

/// Singular values in decreasing order (two-sided Jacobi SVD).
inline Vector singular_values(const Matrix& a) {
    require(a.rows() >= 1 && a.cols() >= 1, ErrorKind::invalid_argument,
            "singular values of an empty matrix");
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues();
}

inline double spectral_norm(const Matrix& a) { return singular_values(a)(0); }

/// Smallest of the min(rows, cols) singular values.
inline double sigma_min(const Matrix& a) {
    const Vector s = singular_values(a);
    return s(s.size() - 1);
}

/// Tolerance below which a singular value is treated as numerically zero.
inline double rank_tolerance(const Matrix& a, double sigma_max) {
    return static_cast<double>(std::max(a.rows(), a.cols())) *
           std::numeric_limits<double>::epsilon() * sigma_max;
}

}  // namespace cprip
