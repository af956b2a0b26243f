#pragma once

// Fast invariant checks runnable from the command line.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cprip/conditioning.hpp"
#include "cprip/io.hpp"
#include "cprip/random.hpp"
#include "cprip/recovery.hpp"
#include "cprip/sensing.hpp"
#include "cprip/tensor.hpp"

namespace cprip {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SelftestOptions {
    std::uint64_t seed = 2019;
    /// Fault injection: the adjoint under test drops the sign of row 0 of Phi.
    bool corrupt_adjoint = false;
};

inline Matrix random_gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = rng.normal();
    return a;
}

inline CpModel random_gaussian_model(Rng& rng, const std::vector<std::size_t>& dims,
                                     std::size_t rank) {
    std::vector<FactorMatrix> f;
    for (std::size_t d : dims)
        f.push_back(random_gaussian_matrix(rng, static_cast<Eigen::Index>(d),
                                           static_cast<Eigen::Index>(rank)));
    return CpModel(std::move(f));
}

inline DenseTensor random_gaussian_tensor(Rng& rng, const Shape& shape) {
    std::vector<double> v(shape.element_count());
    for (auto& e : v) e = rng.normal();
    return DenseTensor(shape, std::move(v));
}

using AdjointFn = std::function<DenseTensor(const SensingOperator&, const MeasurementVector&)>;

/// <Phi x, y> against <x, Phi^T y> over `pairs` random draws; returns the worst relative gap.
inline double adjoint_gap(const AdjointFn& adjoint, std::uint64_t seed, std::size_t pairs) {
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t k = 0; k < pairs; ++k) {
        const Shape shape({3, 4, 2});
        const SensingOperator op(SensingParams{7, shape, Distribution::gaussian, 1.0, rng.bits()});
        const DenseTensor x = random_gaussian_tensor(rng, shape);
        Vector y(7);
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.normal();
        const double lhs = op.apply(x).dot(y);
        const double rhs = x.vec().dot(adjoint(op, y).vec());
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300));
    }
    return worst;
}

/// Worst violation of the central-difference agreement rule
/// |J - J_fd| <= max(1e-5 |J_fd|, 1e-8); non-positive means all entries agree.
inline double jacobian_fd_violation(const CpModel& model, const SensingOperator& op,
                                    const MeasurementVector& y, double step = 1e-6) {
    const auto rj = residual_jacobian(model, op, y);
    const Vector theta = detail::pack(model);
    double worst = -1.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        Vector plus = theta, minus = theta;
        plus(k) += step;
        minus(k) -= step;
        const Vector rp = y - op.apply(reconstruct(detail::unpack(plus, model.shape(), model.rank())));
        const Vector rm = y - op.apply(reconstruct(detail::unpack(minus, model.shape(), model.rank())));
        const Vector fd = (rp - rm) / (2.0 * step);
        for (Eigen::Index i = 0; i < fd.size(); ++i) {
            const double err = std::abs(rj.jacobian(i, k) - fd(i));
            const double allowed = std::max(1e-5 * std::abs(fd(i)), 1e-8);
            worst = std::max(worst, err - allowed);
        }
    }
    return worst;
}

/// ||A_k1 kr ... kr U kr ... kr A_kL||_2 - ||U||_2 for unit-spectral-norm A's,
/// maximized over insertion positions; the spectral bound says this is <= 0.
inline double lemma3_excess(Rng& rng, std::size_t count, Eigen::Index rank) {
    std::vector<Matrix> as;
    for (std::size_t k = 0; k < count; ++k) {
        Matrix a = random_gaussian_matrix(rng, 2 + static_cast<Eigen::Index>(rng.bits() % 4), rank);
        as.push_back(a / spectral_norm(a));
    }
    const Matrix u = random_gaussian_matrix(rng, 2 + static_cast<Eigen::Index>(rng.bits() % 4), rank) *
                     (0.1 + 3.0 * rng.uniform());
    const double unorm = spectral_norm(u);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t pos = 0; pos <= count; ++pos) {
        std::vector<Matrix> chain(as.begin(), as.end());
        chain.insert(chain.begin() + static_cast<std::ptrdiff_t>(pos), u);
        worst = std::max(worst, spectral_norm(khatri_rao_chain(chain)) - unorm);
    }
    return worst;
}

/// kappa through the library against Gram-matrix eigenvalues of a loop-built Khatri-Rao product.
inline double kappa_oracle_gap(const CpModel& model) {
    double smax = 1.0;
    for (const auto& a : model.factors()) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.transpose() * a);
        smax *= std::sqrt(eig.eigenvalues().maxCoeff());
    }
    Matrix kr = model.factor(0);
    for (std::size_t n = 1; n < model.order(); ++n) {
        const Matrix& b = model.factor(n);
        Matrix next(kr.rows() * b.rows(), kr.cols());
        for (Eigen::Index i = 0; i < kr.rows(); ++i)
            for (Eigen::Index j = 0; j < b.rows(); ++j)
                for (Eigen::Index f = 0; f < kr.cols(); ++f)
                    next(i * b.rows() + j, f) = kr(i, f) * b(j, f);
        kr = std::move(next);
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kr.transpose() * kr);
    const double oracle = smax / std::sqrt(eig.eigenvalues().minCoeff());
    const auto report = kappa(model);
    return std::abs(report.kappa - oracle) / oracle;
}

inline std::vector<CheckResult> selftest(const SelftestOptions& opt = {}) {
    std::vector<CheckResult> out;
    const auto fmt = [](double v) { return format_double(v); };

    {
        AdjointFn adjoint = [](const SensingOperator& op, const MeasurementVector& y) {
            return op.adjoint_apply(y);
        };
        if (opt.corrupt_adjoint) {
            adjoint = [](const SensingOperator& op, const MeasurementVector& y) {
                Vector v = op.matrix().transpose() * y;
                v -= 2.0 * y(0) * op.matrix().row(0).transpose();
                return DenseTensor(op.shape(), std::vector<double>(v.data(), v.data() + v.size()));
            };
        }
        const double gap = adjoint_gap(adjoint, mix_seed(opt.seed, 1), 50);
        out.push_back({"adjoint", gap <= 1e-10, "max relative gap " + fmt(gap)});
    }
    {
        Rng rng(mix_seed(opt.seed, 2));
        const auto model = random_gaussian_model(rng, {3, 3, 3}, 2);
        const SensingOperator op(SensingParams{12, model.shape(), Distribution::gaussian, 1.0, rng.bits()});
        const auto other = random_gaussian_model(rng, {3, 3, 3}, 2);
        const MeasurementVector y = op.apply(reconstruct(other));
        const double v = jacobian_fd_violation(model, op, y);
        out.push_back({"jacobian_fd", v <= 0.0, "worst excess over tolerance " + fmt(v)});
    }
    {
        Rng rng(mix_seed(opt.seed, 3));
        double worst = -std::numeric_limits<double>::infinity();
        for (int draw = 0; draw < 20; ++draw)
            worst = std::max(worst, lemma3_excess(rng, 1 + static_cast<std::size_t>(draw % 3), 3));
        out.push_back({"lemma3_spectral", worst <= 1e-10, "max ||W|| - ||U|| " + fmt(worst)});
    }
    {
        double worst = 0.0;
        for (std::uint64_t k = 0; k < 5; ++k) {
            const auto model = generate_conditioned_model(Shape({5, 4, 6}), 3, 4.0,
                                                          mix_seed(opt.seed, 100 + k));
            worst = std::max(worst, kappa_oracle_gap(model));
        }
        out.push_back({"kappa_oracle", worst <= 1e-8, "max relative gap " + fmt(worst)});
    }
    return out;
}

}  // namespace cprip
