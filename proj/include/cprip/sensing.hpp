#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "cprip/error.hpp"
#include "cprip/random.hpp"
#include "cprip/tensor.hpp"

namespace cprip {

using MeasurementVector = Vector;

enum class Distribution { gaussian, rademacher };

inline const char* to_string(Distribution d) {
    return d == Distribution::gaussian ? "gaussian" : "rademacher";
}

inline Distribution parse_distribution(std::string_view s) {
    if (s == "gaussian") return Distribution::gaussian;
    if (s == "rademacher") return Distribution::rademacher;
    throw Error(ErrorKind::invalid_argument, "unknown distribution '" + std::string(s) + "'");
}

struct SensingParams {
    std::size_t m = 0;
    Shape shape;
    Distribution distribution = Distribution::gaussian;
    double alpha = 1.0;
    std::uint64_t seed = 0;
};

/// Largest matrix (in entries) an operator may materialize: 2^27 doubles, 1 GiB.
inline constexpr std::size_t default_entry_budget = std::size_t{1} << 27;

/// Stream tag mixed into the operator seed before drawing entries.
inline constexpr std::uint64_t operator_stream_tag = 0x0B5E55ED;

/// Dense M x prod(I_n) map with i.i.d. zero-mean entries of variance alpha/M.
/// Entries are drawn row by row from one stream seeded by
/// mix_seed(seed, operator_stream_tag); gaussian entries use normal_quantile,
/// rademacher entries take the top bit of each draw.
class SensingOperator {
public:
    explicit SensingOperator(SensingParams params, std::size_t entry_budget = default_entry_budget)
        : params_(std::move(params)) {
        require(params_.m >= 1, ErrorKind::invalid_argument, "measurement count must be >= 1");
        require(std::isfinite(params_.alpha) && params_.alpha > 0.0, ErrorKind::invalid_argument,
                "alpha must be > 0");
        require(params_.shape.order() >= 2, ErrorKind::invalid_argument, "operator shape not set");
        const std::size_t cols = params_.shape.element_count();
        require(cols <= entry_budget / params_.m, ErrorKind::budget_exceeded,
                "sensing matrix " + std::to_string(params_.m) + " x " + std::to_string(cols) +
                    " exceeds the entry budget of " + std::to_string(entry_budget) +
                    "; use fewer measurements or a smaller tensor");

        matrix_.resize(static_cast<Eigen::Index>(params_.m), static_cast<Eigen::Index>(cols));
        const double scale = std::sqrt(params_.alpha / static_cast<double>(params_.m));
        Rng rng(mix_seed(params_.seed, operator_stream_tag));
        double* p = matrix_.data();
        const auto total = static_cast<std::size_t>(matrix_.size());
        if (params_.distribution == Distribution::gaussian) {
            for (std::size_t k = 0; k < total; ++k) p[k] = scale * rng.normal();
        } else {
            for (std::size_t k = 0; k < total; ++k) p[k] = scale * rng.sign();
        }
    }

    [[nodiscard]] const SensingParams& params() const noexcept { return params_; }
    [[nodiscard]] std::size_t m() const noexcept { return params_.m; }
    [[nodiscard]] const Shape& shape() const noexcept { return params_.shape; }
    [[nodiscard]] const Matrix& matrix() const noexcept { return matrix_; }

    /// y = Phi vec(X).
    [[nodiscard]] Vector apply(const DenseTensor& x) const {
        require(x.shape() == params_.shape, ErrorKind::dimension_mismatch,
                "tensor shape " + to_string(x.shape()) + " differs from operator shape " +
                    to_string(params_.shape));
        return matrix_ * x.vec();
    }

    /// The tensor whose vectorization is Phi^T y.
    [[nodiscard]] DenseTensor adjoint_apply(const Vector& y) const {
        require(static_cast<std::size_t>(y.size()) == params_.m, ErrorKind::dimension_mismatch,
                "measurement vector has length " + std::to_string(y.size()) + ", expected " +
                    std::to_string(params_.m));
        const Vector v = matrix_.transpose() * y;
        return DenseTensor(params_.shape, std::vector<double>(v.data(), v.data() + v.size()));
    }

private:
    SensingParams params_;
    Matrix matrix_;
};

inline MeasurementVector apply(const SensingOperator& op, const DenseTensor& x) {
    return op.apply(x);
}

inline DenseTensor adjoint_apply(const SensingOperator& op, const MeasurementVector& y) {
    return op.adjoint_apply(y);
}

}  // namespace cprip
