#pragma once

// Tensor condition number, unit-Frobenius normalization, and latent factors
// with a prescribed matrix condition number.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/SVD>

#include "cprip/error.hpp"
#include "cprip/random.hpp"
#include "cprip/tensor.hpp"

namespace cprip {

enum class KappaStatus {
    finite,
    /// The Khatri-Rao chain is (numerically) column-rank deficient.
    infinite,
};

struct KappaReport {
    KappaStatus status = KappaStatus::finite;
    /// prod_n sigma_max(A_n) / sigma_min(A_1 kr ... kr A_N); meaningful only when finite.
    double kappa = 1.0;
    double sigma_max_product = 0.0;
    double sigma_min_kr = 0.0;
    /// prod_n cond(A_n), present only when every factor has full column rank.
    std::optional<double> cond_product_bound;

    [[nodiscard]] bool is_finite() const noexcept { return status == KappaStatus::finite; }
};

/// Matrix condition number sigma_max / sigma_min over the column space.
/// Empty when the matrix is wider than tall or numerically rank deficient.
inline std::optional<double> column_condition_number(const Matrix& a) {
    if (a.rows() < a.cols()) return std::nullopt;
    const Vector s = singular_values(a);
    const double smin = s(s.size() - 1);
    if (smin <= rank_tolerance(a, s(0))) return std::nullopt;
    return s(0) / smin;
}

inline KappaReport kappa(const CpModel& model) {
    KappaReport report;
    double smax_product = 1.0;
    double cond_product = 1.0;
    bool all_full_rank = true;
    for (const auto& a : model.factors()) {
        const Vector s = singular_values(a);
        smax_product *= s(0);
        if (auto c = column_condition_number(a))
            cond_product *= *c;
        else
            all_full_rank = false;
    }
    report.sigma_max_product = smax_product;
    if (all_full_rank) report.cond_product_bound = cond_product;

    const Matrix kr = khatri_rao_chain(model.factors());
    if (kr.rows() < kr.cols()) {
        report.sigma_min_kr = 0.0;
        report.status = KappaStatus::infinite;
        return report;
    }
    const Vector s = singular_values(kr);
    report.sigma_min_kr = s(s.size() - 1);
    if (report.sigma_min_kr <= rank_tolerance(kr, s(0))) {
        report.status = KappaStatus::infinite;
        return report;
    }
    report.kappa = smax_product / report.sigma_min_kr;
    return report;
}

/// X / ||X||_F written as lambda_tilde * [[A~_1, ..., A~_N]] with ||A~_n||_2 = 1.
struct NormalizedCpForm {
    double lambda_tilde = 0.0;
    std::vector<FactorMatrix> factors;

    [[nodiscard]] std::size_t rank() const noexcept {
        return factors.empty() ? 0 : static_cast<std::size_t>(factors.front().cols());
    }

    /// Folds lambda_tilde into the first factor; reconstructs to X / ||X||_F.
    [[nodiscard]] CpModel to_model() const {
        auto f = factors;
        f.front() *= lambda_tilde;
        return CpModel(std::move(f));
    }
};

inline NormalizedCpForm normalize(const CpModel& model) {
    NormalizedCpForm form;
    double smax_product = 1.0;
    for (const auto& a : model.factors()) {
        const double s = spectral_norm(a);
        require(s > 0.0, ErrorKind::invalid_argument, "cannot normalize a zero factor");
        smax_product *= s;
        form.factors.push_back(a / s);
    }
    const double fro = frobenius_norm(reconstruct(model));
    require(fro > 0.0, ErrorKind::invalid_argument, "cannot normalize a zero tensor");
    form.lambda_tilde = smax_product / fro;
    return form;
}

enum class Spacing { linear, log };

/// Singular value profile running from 1 down to 1/kappa_target.
inline std::vector<double> singular_value_profile(std::size_t count, double kappa_target,
                                                  Spacing spacing) {
    std::vector<double> s(count, 1.0);
    if (count < 2) return s;
    const double last = 1.0 / kappa_target;
    for (std::size_t k = 0; k < count; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(count - 1);
        s[k] = spacing == Spacing::linear ? 1.0 + t * (last - 1.0) : std::pow(last, t);
    }
    s.back() = last;
    return s;
}

/// Uniform [0,1) entries whose singular values are then replaced by a profile
/// from 1 to 1/kappa_target with the singular vectors kept. A single-column
/// factor always has condition number 1 and comes back with unit norm.
inline FactorMatrix generate_conditioned_factor(std::size_t rows, std::size_t cols,
                                                double kappa_target, std::uint64_t seed,
                                                Spacing spacing = Spacing::linear) {
    require(cols >= 1, ErrorKind::invalid_argument, "factor needs at least one column");
    require(rows >= cols, ErrorKind::invalid_argument,
            "conditioned factor needs rows >= cols (got " + std::to_string(rows) + "x" +
                std::to_string(cols) + ")");
    require(std::isfinite(kappa_target) && kappa_target >= 1.0, ErrorKind::invalid_argument,
            "kappa_target must be >= 1");

    Rng rng(seed);
    Matrix raw(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
        for (Eigen::Index j = 0; j < raw.cols(); ++j) raw(i, j) = rng.uniform();

    Eigen::JacobiSVD<Matrix> svd(raw, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto profile = singular_value_profile(cols, kappa_target, spacing);
    const Vector s = Eigen::Map<const Vector>(profile.data(), static_cast<Eigen::Index>(cols));
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

/// Independent conditioned factors, factor n seeded with mix_seed(seed, n).
inline CpModel generate_conditioned_model(const Shape& shape, std::size_t rank,
                                          double kappa_tilde, std::uint64_t seed,
                                          Spacing spacing = Spacing::linear) {
    require(rank >= 1, ErrorKind::invalid_argument, "rank must be >= 1");
    std::vector<FactorMatrix> factors;
    for (std::size_t n = 0; n < shape.order(); ++n) {
        require(shape.dim(n) >= rank, ErrorKind::invalid_argument,
                "mode " + std::to_string(n) + " size " + std::to_string(shape.dim(n)) +
                    " is smaller than rank " + std::to_string(rank));
        factors.push_back(
            generate_conditioned_factor(shape.dim(n), rank, kappa_tilde, mix_seed(seed, n), spacing));
    }
    return CpModel(std::move(factors));
}

}  // namespace cprip
