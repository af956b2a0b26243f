#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cprip/bounds.hpp"

namespace cprip {
namespace {

BoundInputs inputs(std::vector<std::size_t> dims, std::size_t rank, double tau, double alpha,
                   double eta, double c) {
    BoundInputs in;
    in.dims = std::move(dims);
    in.rank = rank;
    in.tau = tau;
    in.alpha = alpha;
    in.eta = eta;
    in.constant = c;
    return in;
}

void expect_rel(double got, double want, double tol = 1e-12) {
    EXPECT_NEAR(got, want, tol * std::abs(want));
}

// Literals below were evaluated by hand in double precision, independently of this library.

TEST(Theorem1Bound, HandValues) {
    expect_rel(theorem1_measurement_bound(inputs({10, 10, 10}, 3, 8, 1, 0.01, 1)), 826.1470226556784);
    expect_rel(theorem1_measurement_bound(inputs({4, 5}, 2, 2, 1.5, 0.05, 0.5)), 120.31172442242784);
    // The ln(1/eta) branch wins.
    expect_rel(theorem1_measurement_bound(inputs({1, 1}, 1, 1, 1, 1e-300, 1)), 690.7755278982137);
}

TEST(Prop2Bound, HandValues) {
    auto a = inputs({10, 10, 10}, 3, 8, 1, 0.01, 1);
    a.delta = 0.5;
    expect_rel(prop2_measurement_bound(a), 1661.4227416942924);
    auto b = inputs({6, 7, 8, 9}, 2, 3.5, 2, 0.1, 0.25);
    b.delta = 0.3;
    expect_rel(prop2_measurement_bound(b), 2684.551148282803);
    auto c = inputs({2, 2}, 1, 1, 1, 1e-200, 1);
    c.delta = 0.9;
    expect_rel(prop2_measurement_bound(c), 568.5395291343323);
}

TEST(CoveringLogCardinality, HandValues) {
    expect_rel(covering_log_cardinality({4, 5}, 2, 2, 0.1), 98.666180166914);
    expect_rel(covering_log_cardinality({8, 8, 8}, 3, 1000, 0.5), 736.264064981096);
    expect_rel(covering_log_cardinality({3, 3, 3, 3}, 1, 1, 1e-3), 125.00547124109652);
}

TEST(CoveringLogCardinality, UnitRatioAndLinearPrefactor) {
    EXPECT_EQ(covering_log_cardinality({3, 4, 5}, 2, 2.0, 3.0 * 4.0 * 2.0), 0.0);
    const double eps = 0.2;
    const double ln = std::log(3.0 * 4.0 * 1.5 / eps);
    const double base = covering_log_cardinality({3, 4, 5}, 2, 1.5, eps) / ln - 1.0;
    const double doubled = covering_log_cardinality({6, 8, 10}, 2, 1.5, eps) / ln - 1.0;
    EXPECT_NEAR(doubled, 2.0 * base, 1e-9);
}

TEST(CoveringLogCardinality, RejectsBadInputs) {
    EXPECT_THROW(covering_log_cardinality({3, 3}, 1, 0.5, 0.1), Error);
    EXPECT_THROW(covering_log_cardinality({3, 3}, 1, 1.0, 0.0), Error);
}

TEST(Theorem1Bound, EtaBranchInactiveLeavesValue) {
    const auto a = inputs({10, 10, 10}, 3, 8, 1, 0.01, 1);
    auto b = a;
    b.eta = 0.001;
    EXPECT_EQ(theorem1_measurement_bound(a), theorem1_measurement_bound(b));
}

TEST(Theorem1Bound, MonotoneGrid) {
    const std::vector<double> taus{1, 2, 8, 64};
    const std::vector<std::size_t> ranks{1, 2, 3, 5};
    const std::vector<std::size_t> sizes{2, 4, 8, 16};
    const std::vector<double> etas{0.5, 1e-3, 1e-30, 1e-300};
    const std::vector<double> alphas{0.5, 1, 2, 4};
    const std::vector<double> cs{0.1, 1, 10};
    auto eval = [](double tau, std::size_t f, std::size_t i, double eta, double alpha, double c) {
        return theorem1_measurement_bound(inputs({i, 5, 6}, f, tau, alpha, eta, c));
    };
    for (double eta : etas)
        for (double alpha : alphas) {
            for (std::size_t k = 1; k < taus.size(); ++k)
                EXPECT_LE(eval(taus[k - 1], 2, 4, eta, alpha, 1), eval(taus[k], 2, 4, eta, alpha, 1));
            for (std::size_t k = 1; k < ranks.size(); ++k)
                EXPECT_LE(eval(4, ranks[k - 1], 4, eta, alpha, 1), eval(4, ranks[k], 4, eta, alpha, 1));
            for (std::size_t k = 1; k < sizes.size(); ++k)
                EXPECT_LE(eval(4, 2, sizes[k - 1], eta, alpha, 1), eval(4, 2, sizes[k], eta, alpha, 1));
            for (std::size_t k = 1; k < cs.size(); ++k)
                EXPECT_LE(eval(4, 2, 4, eta, alpha, cs[k - 1]), eval(4, 2, 4, eta, alpha, cs[k]));
        }
    for (double tau : taus) {
        for (std::size_t k = 1; k < etas.size(); ++k)
            EXPECT_LE(eval(tau, 2, 4, etas[k - 1], 1, 1), eval(tau, 2, 4, etas[k], 1, 1));
        for (std::size_t k = 1; k < alphas.size(); ++k)
            EXPECT_LE(eval(tau, 2, 4, 0.01, alphas[k - 1], 1), eval(tau, 2, 4, 0.01, alphas[k], 1));
    }
}

TEST(Theorem1Bound, DoublingTauIncreasesFirstBranch) {
    const auto a = inputs({3, 3, 3}, 2, 4, 1, 0.5, 1);
    auto b = a;
    b.tau = 8;
    EXPECT_GT(theorem1_measurement_bound(b), theorem1_measurement_bound(a));
}

TEST(Theorem1Bound, RejectsBadInputs) {
    EXPECT_THROW(theorem1_measurement_bound(inputs({3, 3}, 1, 0.99, 1, 0.1, 1)), Error);
    EXPECT_THROW(theorem1_measurement_bound(inputs({3, 3}, 1, 1, 0, 0.1, 1)), Error);
    EXPECT_THROW(theorem1_measurement_bound(inputs({3, 3}, 1, 1, 1, 1.0, 1)), Error);
    EXPECT_THROW(theorem1_measurement_bound(inputs({3}, 1, 1, 1, 0.1, 1)), Error);
}

TEST(Prop2Bound, DeltaOpenIntervalAndScaling) {
    auto a = inputs({4, 4, 4}, 2, 2, 1, 0.1, 1);
    a.delta = 1.0;
    EXPECT_THROW(prop2_measurement_bound(a), Error);
    a.delta = 0.0;
    EXPECT_THROW(prop2_measurement_bound(a), Error);
    a.delta.reset();
    EXPECT_THROW(prop2_measurement_bound(a), Error);
    a.delta = 0.6;
    const double v = prop2_measurement_bound(a);
    a.delta = 0.3;
    expect_rel(prop2_measurement_bound(a), 4.0 * v);
}

TEST(Prop2Bound, ExponentBookkeepingAgainstTheorem1) {
    // With delta -> 1 and the covering branch active, theorem 1 at rank F equals
    // prop 2 on 2 sum I_n F parameters, i.e. prop 2 at rank 2F.
    auto t = inputs({4, 5, 6}, 2, 3, 1, 0.5, 1);
    auto p = inputs({4, 5, 6}, 4, 3, 1, 0.5, 1);
    p.delta = 1.0 - 1e-12;
    expect_rel(prop2_measurement_bound(p), theorem1_measurement_bound(t), 1e-10);
}

TEST(RipProbe, SingleSampleCollapses) {
    const SensingOperator op(SensingParams{40, Shape({4, 4, 4}), Distribution::gaussian, 1.0, 3});
    RipProbeParams p;
    p.rank = 2;
    p.kappa_tilde = 2.0;
    p.samples = 1;
    const auto r = rip_probe(op, p);
    EXPECT_EQ(r.min_ratio, r.max_ratio);
    EXPECT_EQ(r.mean_ratio, r.min_ratio);
    EXPECT_GE(r.delta_hat, 0.0);
}

TEST(RipProbe, InvariantToPrescale) {
    const SensingOperator op(SensingParams{60, Shape({4, 4, 4}), Distribution::gaussian, 1.0, 4});
    RipProbeParams p;
    p.rank = 2;
    p.kappa_tilde = 3.0;
    p.samples = 50;
    p.seed = 9;
    const auto a = rip_probe(op, p);
    p.prescale = 1e6;
    const auto b = rip_probe(op, p);
    EXPECT_NEAR(a.delta_hat, b.delta_hat, 1e-12);
    EXPECT_NEAR(a.mean_ratio, b.mean_ratio, 1e-12);
}

TEST(RipProbe, OrderedStatistics) {
    const SensingOperator op(SensingParams{50, Shape({5, 4, 3}), Distribution::rademacher, 1.0, 5});
    RipProbeParams p;
    p.rank = 3;
    p.kappa_tilde = 10.0;
    p.samples = 100;
    const auto r = rip_probe(op, p);
    EXPECT_LE(r.min_ratio, r.mean_ratio);
    EXPECT_LE(r.mean_ratio, r.max_ratio);
    EXPECT_NEAR(r.delta_hat, std::max(1.0 - r.min_ratio, r.max_ratio - 1.0), 1e-15);
}

TEST(RipProbe, ResampledMeanNearAlpha) {
    RipProbeParams p;
    p.rank = 2;
    p.kappa_tilde = 2.0;
    p.samples = 1000;
    p.seed = 21;
    const SensingParams base{512, Shape({6, 6, 6}), Distribution::gaussian, 1.0, 22};
    const auto r = rip_probe_resampled(base, p);
    EXPECT_GE(r.mean_ratio, 0.98);
    EXPECT_LE(r.mean_ratio, 1.02);
    EXPECT_LT(r.delta_hat, 1.0);
}

TEST(RipProbe, DeltaHatShrinksWithMoreMeasurements) {
    auto median_delta = [](std::size_t m) {
        std::vector<double> d;
        for (std::uint64_t rep = 0; rep < 20; ++rep) {
            const SensingOperator op(
                SensingParams{m, Shape({4, 4, 4}), Distribution::gaussian, 1.0, mix_seed(31, rep)});
            RipProbeParams p;
            p.rank = 2;
            p.kappa_tilde = 2.0;
            p.samples = 50;
            p.seed = mix_seed(32, rep);
            d.push_back(rip_probe(op, p).delta_hat);
        }
        std::sort(d.begin(), d.end());
        return 0.5 * (d[9] + d[10]);
    };
    EXPECT_GT(median_delta(32), median_delta(512));
}

}  // namespace
}  // namespace cprip
