#pragma once

// Sample-complexity calculators and an empirical restricted-isometry probe.
// Logarithms are natural; the unspecified constant C absorbs the base.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "cprip/conditioning.hpp"
#include "cprip/error.hpp"
#include "cprip/random.hpp"
#include "cprip/sensing.hpp"
#include "cprip/tensor.hpp"

namespace cprip {

struct BoundInputs {
    std::vector<std::size_t> dims;
    std::size_t rank = 1;
    double tau = 1.0;
    double alpha = 1.0;
    double eta = 0.01;
    double constant = 1.0;
    /// Only used by the restricted-isometry variant.
    std::optional<double> delta;

    [[nodiscard]] std::size_t order() const noexcept { return dims.size(); }

    /// sum_n I_n F
    [[nodiscard]] double factor_entries() const {
        double s = 0.0;
        for (std::size_t d : dims) s += static_cast<double>(d) * static_cast<double>(rank);
        return s;
    }

    void validate() const {
        require(dims.size() >= 2, ErrorKind::invalid_argument, "need at least 2 modes");
        for (std::size_t d : dims) require(d >= 1, ErrorKind::invalid_argument, "mode size must be >= 1");
        require(rank >= 1, ErrorKind::invalid_argument, "rank must be >= 1");
        require(std::isfinite(tau) && tau >= 1.0, ErrorKind::invalid_argument, "tau must be >= 1");
        require(std::isfinite(alpha) && alpha > 0.0, ErrorKind::invalid_argument, "alpha must be > 0");
        require(eta > 0.0 && eta < 1.0, ErrorKind::invalid_argument, "eta must lie in (0, 1)");
        require(std::isfinite(constant) && constant > 0.0, ErrorKind::invalid_argument,
                "constant C must be > 0");
    }
};

/// C alpha^2 max{ (1 + 2 sum_n I_n F) ln(3 (N+1) tau), ln(1/eta) }
inline double theorem1_measurement_bound(const BoundInputs& in) {
    in.validate();
    const double n1 = static_cast<double>(in.order() + 1);
    const double covering = (1.0 + 2.0 * in.factor_entries()) * std::log(3.0 * n1 * in.tau);
    return in.constant * in.alpha * in.alpha * std::max(covering, std::log(1.0 / in.eta));
}

/// C alpha^2 delta^-2 max{ (1 + sum_n I_n F) ln(3 (N+1) tau), ln(1/eta) }
inline double prop2_measurement_bound(const BoundInputs& in) {
    in.validate();
    require(in.delta.has_value(), ErrorKind::invalid_argument, "delta is required");
    const double delta = *in.delta;
    require(delta > 0.0 && delta < 1.0, ErrorKind::invalid_argument, "delta must lie in (0, 1)");
    const double n1 = static_cast<double>(in.order() + 1);
    const double covering = (1.0 + in.factor_entries()) * std::log(3.0 * n1 * in.tau);
    return in.constant * in.alpha * in.alpha / (delta * delta) *
           std::max(covering, std::log(1.0 / in.eta));
}

/// Natural log of the net cardinality bound (3 (N+1) tau / eps)^(1 + sum_n I_n F).
inline double covering_log_cardinality(const std::vector<std::size_t>& dims, std::size_t rank,
                                       double tau, double epsilon) {
    require(dims.size() >= 2, ErrorKind::invalid_argument, "need at least 2 modes");
    require(rank >= 1, ErrorKind::invalid_argument, "rank must be >= 1");
    require(std::isfinite(tau) && tau >= 1.0, ErrorKind::invalid_argument, "tau must be >= 1");
    require(std::isfinite(epsilon) && epsilon > 0.0, ErrorKind::invalid_argument,
            "epsilon must be > 0");
    double entries = 0.0;
    for (std::size_t d : dims) entries += static_cast<double>(d) * static_cast<double>(rank);
    const double n1 = static_cast<double>(dims.size() + 1);
    return (1.0 + entries) * std::log(3.0 * n1 * tau / epsilon);
}

struct RipProbeResult {
    std::size_t samples = 0;
    double mean_ratio = 0.0;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    /// max(1 - min_ratio, max_ratio - 1): a sampled lower estimate of delta_F.
    double delta_hat = 0.0;
};

struct RipProbeParams {
    std::size_t rank = 1;
    double kappa_tilde = 1.0;
    std::size_t samples = 1;
    std::uint64_t seed = 0;
    Spacing spacing = Spacing::linear;
    /// Multiplies every sampled tensor before normalization; the result must not depend on it.
    double prescale = 1.0;
};

namespace detail {

inline DenseTensor probe_sample(const Shape& shape, const RipProbeParams& p, std::size_t s) {
    const auto model = generate_conditioned_model(shape, p.rank, p.kappa_tilde, mix_seed(p.seed, s),
                                                  p.spacing);
    const DenseTensor x = reconstruct(model);
    std::vector<double> v(x.values().begin(), x.values().end());
    double norm = 0.0;
    for (auto& e : v) {
        e *= p.prescale;
        norm += e * e;
    }
    norm = std::sqrt(norm);
    require(norm > 0.0, ErrorKind::invalid_argument, "sampled a zero tensor");
    for (auto& e : v) e /= norm;
    return DenseTensor(shape, std::move(v));
}

template <typename RatioFn>
RipProbeResult accumulate_probe(std::size_t samples, RatioFn ratio_of) {
    RipProbeResult r;
    r.samples = samples;
    r.min_ratio = std::numeric_limits<double>::infinity();
    r.max_ratio = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const double ratio = ratio_of(s);
        sum += ratio;
        r.min_ratio = std::min(r.min_ratio, ratio);
        r.max_ratio = std::max(r.max_ratio, ratio);
    }
    r.mean_ratio = std::clamp(sum / static_cast<double>(samples), r.min_ratio, r.max_ratio);
    r.delta_hat = std::max({0.0, 1.0 - r.min_ratio, r.max_ratio - 1.0});
    return r;
}

}  // namespace detail

inline constexpr std::uint64_t resample_stream_tag = 0x5E;

/// Ratios ||A(X~)||^2 for unit-Frobenius conditioned CP tensors X~ against one
/// fixed operator. Sample s draws its model from mix_seed(seed, s).
inline RipProbeResult rip_probe(const SensingOperator& op, const RipProbeParams& p) {
    require(p.samples >= 1, ErrorKind::invalid_argument, "samples must be >= 1");
    return detail::accumulate_probe(p.samples, [&](std::size_t s) {
        return op.apply(detail::probe_sample(op.shape(), p, s)).squaredNorm();
    });
}

/// Same ratios, but each sample is measured by a fresh operator built from
/// `base` with seed mix_seed(mix_seed(base.seed, resample_stream_tag), s). The mean estimates E||A(X~)||^2,
/// which is alpha for every unit-norm X~.
inline RipProbeResult rip_probe_resampled(const SensingParams& base, const RipProbeParams& p) {
    require(p.samples >= 1, ErrorKind::invalid_argument, "samples must be >= 1");
    return detail::accumulate_probe(p.samples, [&](std::size_t s) {
        SensingParams params = base;
        params.seed = mix_seed(mix_seed(base.seed, resample_stream_tag), s);
        const SensingOperator op(params);
        return op.apply(detail::probe_sample(base.shape, p, s)).squaredNorm();
    });
}

}  // namespace cprip
