#pragma once

// Rank-constrained recovery: minimize ||y - A(X)||^2 over CP models of a fixed
// rank with Levenberg-Marquardt on the stacked factor entries.
//
// Restart r starts from one of two families of points:
//   random          i.i.d. normal factors, rescaled so ||X_0||_F = ||y||.
//   back_projection CP-ALS fit of Phi^T y from that random point, then
//                   r == 0: alternate projection onto {X : Phi vec(X) = y} with
//                           short warm CP-ALS refits;
//                   r >= 1: add noise of relative size perturbation_step * (r - 1)
//                           and run exact per-mode least squares on the measurements.
//
// Parameter order: mode-major, then column-major inside each factor, i.e.
// entry A_n(i, f) sits at offset_n + f * I_n + i with offset_n = sum_{k<n} I_k F.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include "cprip/error.hpp"
#include "cprip/random.hpp"
#include "cprip/sensing.hpp"
#include "cprip/tensor.hpp"

namespace cprip {

enum class Initialization { random, back_projection };

inline const char* to_string(Initialization i) {
    return i == Initialization::random ? "random" : "back_projection";
}

inline Initialization parse_initialization(const std::string& s) {
    if (s == "random") return Initialization::random;
    if (s == "back_projection") return Initialization::back_projection;
    throw Error(ErrorKind::parse_error, "unknown initialization '" + s + "'");
}

struct RecoveryConfig {
    std::size_t rank = 1;
    std::size_t max_iters = 500;
    /// Stop once (f_old - f_new) / f_old falls below this ("machine accuracy").
    double rel_obj_tol = 2.2e-16;
    std::size_t restarts = 5;
    double damping_init_scale = 1e-3;
    double damping_factor = 2.0;
    std::size_t max_damping_retries = 50;
    std::uint64_t seed = 0;
    Initialization init = Initialization::back_projection;
    std::size_t init_als_sweeps = 50;
    std::size_t projection_rounds = 100;
    std::size_t projection_als_sweeps = 3;
    std::size_t measurement_sweeps = 50;
    double perturbation_step = 0.3;

    void validate() const {
        require(rank >= 1, ErrorKind::invalid_argument, "rank must be >= 1");
        require(max_iters >= 1, ErrorKind::invalid_argument, "max_iters must be >= 1");
        require(rel_obj_tol > 0.0, ErrorKind::invalid_argument, "rel_obj_tol must be > 0");
        require(restarts >= 1, ErrorKind::invalid_argument, "restarts must be >= 1");
        require(damping_init_scale > 0.0, ErrorKind::invalid_argument,
                "damping_init_scale must be > 0");
        require(damping_factor > 1.0, ErrorKind::invalid_argument, "damping_factor must be > 1");
        require(max_damping_retries >= 1, ErrorKind::invalid_argument,
                "max_damping_retries must be >= 1");
        require(std::isfinite(perturbation_step) && perturbation_step >= 0.0,
                ErrorKind::invalid_argument, "perturbation_step must be >= 0");
    }
};

enum class RecoveryStatus {
    /// Relative objective decrease dropped below rel_obj_tol.
    tolerance,
    /// The objective reached exactly zero.
    zero_objective,
    /// Every damped step failed to lower the objective: no further progress in floating point.
    stalled,
    max_iterations,
    /// The damped normal equations could not be solved within the retry budget.
    solve_failed,
};

inline const char* to_string(RecoveryStatus s) {
    switch (s) {
        case RecoveryStatus::tolerance: return "tolerance";
        case RecoveryStatus::zero_objective: return "zero_objective";
        case RecoveryStatus::stalled: return "stalled";
        case RecoveryStatus::max_iterations: return "max_iterations";
        case RecoveryStatus::solve_failed: return "solve_failed";
    }
    return "unknown";
}

struct RecoveryReport {
    CpModel model;
    double objective = 0.0;
    /// Initial objective followed by the objective after every accepted step.
    std::vector<double> objective_trace;
    std::size_t iterations = 0;
    bool converged = false;
    RecoveryStatus status = RecoveryStatus::max_iterations;
    std::size_t restart_index = 0;
    std::optional<double> mse;
};

inline double mse(const DenseTensor& truth, const DenseTensor& recovered) {
    require(truth.shape() == recovered.shape(), ErrorKind::dimension_mismatch,
            "MSE operands differ in shape");
    return (truth.vec() - recovered.vec()).squaredNorm() /
           static_cast<double>(truth.shape().element_count());
}

namespace detail {

inline void check_problem(const CpModel& model, const SensingOperator& op,
                          const MeasurementVector& y) {
    require(model.shape() == op.shape(), ErrorKind::dimension_mismatch,
            "model shape " + to_string(model.shape()) + " differs from operator shape " +
                to_string(op.shape()));
    require(static_cast<std::size_t>(y.size()) == op.m(), ErrorKind::dimension_mismatch,
            "measurement length differs from operator M");
}

inline Vector pack(const CpModel& model) {
    Vector theta(static_cast<Eigen::Index>(model.parameter_count()));
    Eigen::Index k = 0;
    for (const auto& a : model.factors())
        for (Eigen::Index f = 0; f < a.cols(); ++f)
            for (Eigen::Index i = 0; i < a.rows(); ++i) theta(k++) = a(i, f);
    return theta;
}

inline CpModel unpack(const Vector& theta, const Shape& shape, std::size_t rank) {
    std::vector<FactorMatrix> factors;
    Eigen::Index k = 0;
    for (std::size_t d : shape.dims()) {
        FactorMatrix a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rank));
        for (Eigen::Index f = 0; f < a.cols(); ++f)
            for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, f) = theta(k++);
        factors.push_back(std::move(a));
    }
    return CpModel(std::move(factors));
}

inline Matrix khatri_rao_range(const std::vector<FactorMatrix>& factors, std::size_t first,
                               std::size_t last) {
    if (first >= last) return Matrix::Ones(1, factors.front().cols());
    Matrix acc = factors[first];
    for (std::size_t n = first + 1; n < last; ++n) acc = khatri_rao(acc, factors[n]);
    return acc;
}

}  // namespace detail

inline double objective(const CpModel& model, const SensingOperator& op,
                        const MeasurementVector& y) {
    detail::check_problem(model, op, y);
    return (y - op.apply(reconstruct(model))).squaredNorm();
}

struct ResidualJacobian {
    /// r = y - Phi vec(X).
    Vector residual;
    /// d r / d theta, M x sum_n I_n F in the documented parameter order.
    Matrix jacobian;
};

/// Jacobian column for A_n(i, f) is -Phi vec(A_1(:,f) o ... o e_i o ... o A_N(:,f)).
/// Each mode is evaluated as one contraction of Phi, viewed as an
/// M x lead x I_n x trail array, against the Khatri-Rao products of the
/// factors before (lead) and after (trail) mode n.
inline ResidualJacobian residual_jacobian(const CpModel& model, const SensingOperator& op,
                                          const MeasurementVector& y) {
    detail::check_problem(model, op, y);
    const auto& factors = model.factors();
    const auto& shape = model.shape();
    const auto m = static_cast<Eigen::Index>(op.m());
    const auto rank = static_cast<Eigen::Index>(model.rank());
    const Matrix& phi = op.matrix();

    ResidualJacobian out;
    out.residual = y - phi * reconstruct(model).vec();
    out.jacobian.resize(m, static_cast<Eigen::Index>(model.parameter_count()));

    Eigen::Index offset = 0;
    for (std::size_t n = 0; n < shape.order(); ++n) {
        const auto dim = static_cast<Eigen::Index>(shape.dim(n));
        const Matrix lead = detail::khatri_rao_range(factors, 0, n);
        const Matrix trail = detail::khatri_rao_range(factors, n + 1, shape.order());
        const Eigen::Index lead_size = lead.rows();
        const Eigen::Index trail_size = trail.rows();

        const Eigen::Map<const Matrix> phi_view(phi.data(), m * lead_size * dim, trail_size);
        const Matrix partial = phi_view * trail;  // row (row_m * lead + a) * dim + i

        for (Eigen::Index row = 0; row < m; ++row) {
            for (Eigen::Index f = 0; f < rank; ++f) {
                for (Eigen::Index i = 0; i < dim; ++i) {
                    double g = 0.0;
                    for (Eigen::Index a = 0; a < lead_size; ++a)
                        g += lead(a, f) * partial((row * lead_size + a) * dim + i, f);
                    out.jacobian(row, offset + f * dim + i) = -g;
                }
            }
        }
        offset += dim * rank;
    }
    return out;
}

namespace detail {

struct LmOutcome {
    Vector theta;
    double objective = 0.0;
    std::vector<double> trace;
    std::size_t iterations = 0;
    RecoveryStatus status = RecoveryStatus::max_iterations;
};

inline LmOutcome levenberg_marquardt(Vector theta, const Shape& shape, const SensingOperator& op,
                                     const MeasurementVector& y, const RecoveryConfig& cfg) {
    LmOutcome out;
    auto model = unpack(theta, shape, cfg.rank);
    auto rj = residual_jacobian(model, op, y);
    double f = rj.residual.squaredNorm();
    double mu = cfg.damping_init_scale;
    out.trace.push_back(f);

    while (true) {
        if (f == 0.0) {
            out.status = RecoveryStatus::zero_objective;
            break;
        }
        if (out.iterations >= cfg.max_iters) {
            out.status = RecoveryStatus::max_iterations;
            break;
        }
        const Matrix& jac = rj.jacobian;
        const Matrix normal = jac.transpose() * jac;
        const Vector gradient = jac.transpose() * rj.residual;
        Vector diag = normal.diagonal();
        const double diag_max = diag.maxCoeff();
        if (diag_max > 0.0)
            diag = diag.cwiseMax(1e-12 * diag_max);
        else
            diag.setOnes();

        bool accepted = false;
        bool any_solved = false;
        double f_new = f;
        Vector theta_new;
        for (std::size_t retry = 0; retry < cfg.max_damping_retries; ++retry) {
            Matrix damped = normal;
            damped.diagonal() += mu * diag;
            Eigen::LDLT<Matrix> ldlt(damped);
            Vector step;
            bool solved = ldlt.info() == Eigen::Success;
            if (solved) {
                step = -ldlt.solve(gradient);
                solved = step.allFinite();
            }
            if (!solved) {
                mu *= cfg.damping_factor;
                continue;
            }
            any_solved = true;
            theta_new = theta + step;
            f_new = (y - op.apply(reconstruct(unpack(theta_new, shape, cfg.rank)))).squaredNorm();
            if (std::isfinite(f_new) && f_new < f) {
                accepted = true;
                mu = std::max(mu / cfg.damping_factor, std::numeric_limits<double>::min());
                break;
            }
            mu *= cfg.damping_factor;
        }
        if (!accepted) {
            out.status = any_solved ? RecoveryStatus::stalled : RecoveryStatus::solve_failed;
            break;
        }

        ++out.iterations;
        const double rel_change = (f - f_new) / f;
        theta = std::move(theta_new);
        f = f_new;
        out.trace.push_back(f);
        if (rel_change < cfg.rel_obj_tol) {
            out.status = RecoveryStatus::tolerance;
            break;
        }
        rj = residual_jacobian(unpack(theta, shape, cfg.rank), op, y);
    }
    out.theta = std::move(theta);
    out.objective = f;
    return out;
}

/// i.i.d. standard normal factors rescaled so that ||X_0||_F = ||y||_2.
inline Vector initial_point(const Shape& shape, std::size_t rank, double target_norm,
                            std::uint64_t seed) {
    Rng rng(seed);
    Vector theta(static_cast<Eigen::Index>(parameter_count(shape, rank)));
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) = rng.normal();
    const double norm = frobenius_norm(reconstruct(unpack(theta, shape, rank)));
    const double scale =
        norm > 0.0 ? std::pow(target_norm / norm, 1.0 / static_cast<double>(shape.order())) : 0.0;
    return theta * scale;
}

/// G(i, f) = sum over all other indices of X(..., i, ...) prod_{k != n} A_k(i_k, f).
inline Matrix mttkrp(const DenseTensor& x, const std::vector<FactorMatrix>& factors,
                     std::size_t n) {
    const auto dim = static_cast<Eigen::Index>(x.shape().dim(n));
    const Matrix lead = khatri_rao_range(factors, 0, n);
    const Matrix trail = khatri_rao_range(factors, n + 1, factors.size());
    const Eigen::Map<const Matrix> view(x.values().data(), lead.rows() * dim, trail.rows());
    const Matrix partial = view * trail;  // row a * dim + i
    Matrix g = Matrix::Zero(dim, trail.cols());
    for (Eigen::Index a = 0; a < lead.rows(); ++a)
        g.array() += partial.middleRows(a * dim, dim).array().rowwise() * lead.row(a).array();
    return g;
}

/// Plain CP-ALS on a dense tensor, updating `factors` in place.
inline void als_sweeps(const DenseTensor& x, std::vector<FactorMatrix>& factors,
                       std::size_t sweeps) {
    const auto rank = factors.front().cols();
    for (std::size_t s = 0; s < sweeps; ++s) {
        for (std::size_t n = 0; n < factors.size(); ++n) {
            Matrix gram = Matrix::Ones(rank, rank);
            for (std::size_t k = 0; k < factors.size(); ++k)
                if (k != n) gram = gram.cwiseProduct(factors[k].transpose() * factors[k]);
            gram.diagonal().array() +=
                1e-12 * std::max(gram.diagonal().maxCoeff(), std::numeric_limits<double>::min());
            const Matrix g = mttkrp(x, factors, n);
            factors[n] = gram.ldlt().solve(g.transpose()).transpose();
        }
    }
}

/// Orthogonal projection onto the affine set {v : Phi v = y}. When Phi has at
/// least as many rows as columns the set is (generically) the single
/// least-squares point.
class AffineProjector {
public:
    AffineProjector(const SensingOperator& op, const MeasurementVector& y) : op_(&op), y_(&y) {
        const Matrix& phi = op.matrix();
        if (phi.rows() < phi.cols())
            gram_.compute(phi * phi.transpose());
        else
            fixed_ = phi.colPivHouseholderQr().solve(y);
    }

    [[nodiscard]] DenseTensor project(const DenseTensor& x) const {
        Vector v;
        if (fixed_.size() > 0) {
            v = fixed_;
        } else {
            const Matrix& phi = op_->matrix();
            v = x.vec() + phi.transpose() * gram_.solve(*y_ - phi * x.vec());
        }
        return DenseTensor(x.shape(), std::vector<double>(v.data(), v.data() + v.size()));
    }

private:
    const SensingOperator* op_;
    const MeasurementVector* y_;
    Eigen::LDLT<Matrix> gram_;
    Vector fixed_;
};

/// Block coordinate descent: each mode in turn gets the exact least-squares
/// solution of y = Phi vec(X) with the other factors held fixed.
inline Vector measurement_sweeps(Vector theta, const Shape& shape, const SensingOperator& op,
                                 const MeasurementVector& y, std::size_t rank,
                                 std::size_t sweeps) {
    const auto r = static_cast<Eigen::Index>(rank);
    for (std::size_t s = 0; s < sweeps; ++s) {
        Eigen::Index offset = 0;
        for (std::size_t n = 0; n < shape.order(); ++n) {
            const Eigen::Index width = static_cast<Eigen::Index>(shape.dim(n)) * r;
            const auto rj = residual_jacobian(unpack(theta, shape, rank), op, y);
            const Matrix block = -rj.jacobian.middleCols(offset, width);
            theta.segment(offset, width) = block.colPivHouseholderQr().solve(y);
            offset += width;
        }
    }
    return theta;
}

inline constexpr std::uint64_t perturbation_stream_tag = 0x9E;

inline Vector back_projection_point(const Shape& shape, const SensingOperator& op,
                                    const MeasurementVector& y, const RecoveryConfig& cfg,
                                    std::size_t restart) {
    const std::uint64_t seed = mix_seed(cfg.seed, restart);
    const DenseTensor back = op.adjoint_apply(y);
    const double back_norm = frobenius_norm(back);
    Vector start = initial_point(shape, cfg.rank, back_norm, seed);
    if (back_norm == 0.0) return start;

    const auto finite = [](const std::vector<FactorMatrix>& fs) {
        return std::all_of(fs.begin(), fs.end(), [](const Matrix& a) { return a.allFinite(); });
    };
    auto factors = unpack(start, shape, cfg.rank).factors();
    als_sweeps(back, factors, cfg.init_als_sweeps);
    if (!finite(factors)) return start;
    Vector theta;
    if (restart == 0) {
        const AffineProjector projector(op, y);
        for (std::size_t k = 0; k < cfg.projection_rounds; ++k) {
            const DenseTensor target = projector.project(reconstruct(CpModel(factors)));
            als_sweeps(target, factors, cfg.projection_als_sweeps);
            if (!finite(factors)) return start;
        }
        theta = pack(CpModel(factors));
    } else {
        theta = pack(CpModel(factors));
        if (restart >= 2) {
            const Vector z = initial_point(shape, cfg.rank, 1.0, mix_seed(seed, perturbation_stream_tag));
            const double znorm = z.norm();
            if (znorm > 0.0)
                theta += (cfg.perturbation_step * static_cast<double>(restart - 1)) *
                         (theta.norm() / znorm) * z;
        }
        theta = measurement_sweeps(std::move(theta), shape, op, y, cfg.rank, cfg.measurement_sweeps);
    }
    return theta.allFinite() ? theta : start;
}

inline Vector starting_point(const Shape& shape, const SensingOperator& op,
                             const MeasurementVector& y, const RecoveryConfig& cfg,
                             std::size_t restart) {
    if (cfg.init == Initialization::random)
        return initial_point(shape, cfg.rank, y.norm(), mix_seed(cfg.seed, restart));
    return back_projection_point(shape, op, y, cfg, restart);
}

}  // namespace detail

inline bool is_converged(RecoveryStatus s) {
    return s == RecoveryStatus::tolerance || s == RecoveryStatus::zero_objective ||
           s == RecoveryStatus::stalled;
}

/// Runs config.restarts independent Levenberg-Marquardt solves (restart r is
/// seeded with mix_seed(config.seed, r)) and keeps the lowest final
/// objective, ties going to the lower restart index.
inline RecoveryReport recover(const SensingOperator& op, const MeasurementVector& y,
                              const RecoveryConfig& config,
                              const std::optional<DenseTensor>& ground_truth = std::nullopt) {
    config.validate();
    require(static_cast<std::size_t>(y.size()) == op.m(), ErrorKind::dimension_mismatch,
            "measurement length differs from operator M");
    require(all_finite(std::span<const double>(y.data(), static_cast<std::size_t>(y.size()))),
            ErrorKind::non_finite, "measurements must be finite");
    if (ground_truth)
        require(ground_truth->shape() == op.shape(), ErrorKind::dimension_mismatch,
                "ground truth shape differs from operator shape");

    const Shape& shape = op.shape();
    std::optional<detail::LmOutcome> best;
    std::size_t best_index = 0;
    for (std::size_t r = 0; r < config.restarts; ++r) {
        auto theta0 = detail::starting_point(shape, op, y, config, r);
        auto outcome = detail::levenberg_marquardt(std::move(theta0), shape, op, y, config);
        if (!best || outcome.objective < best->objective) {
            best = std::move(outcome);
            best_index = r;
        }
    }

    RecoveryReport report;
    report.model = detail::unpack(best->theta, shape, config.rank);
    report.objective = best->objective;
    report.objective_trace = std::move(best->trace);
    report.iterations = best->iterations;
    report.status = best->status;
    report.converged = is_converged(best->status);
    report.restart_index = best_index;
    if (ground_truth) report.mse = mse(*ground_truth, reconstruct(report.model));
    return report;
}

}  // namespace cprip
