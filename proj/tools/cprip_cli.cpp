// Command-line front end: gen, kappa, sense, recover, bound, cover, rip-probe,
// experiment, plot, selftest. Exit status 0 on success, 1 on error, 2 when a
// selftest check fails.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cprip/cprip.hpp"

namespace {

using namespace cprip;

std::vector<std::size_t> parse_dims(const std::string& s) {
    auto dims = parse_size_list("dims", s);
    require(!dims.empty(), ErrorKind::invalid_argument, "empty --dims");
    return dims;
}

void print_kv(std::ostream& out, const std::string& key, double v) {
    out << key << '=' << format_double(v) << '\n';
}

template <typename T>
void print_kv(std::ostream& out, const std::string& key, const T& v) {
    out << key << '=' << v << '\n';
}

void write_report(std::ostream& out, const RecoveryReport& r) {
    print_kv(out, "objective", r.objective);
    print_kv(out, "iterations", r.iterations);
    print_kv(out, "converged", r.converged ? "true" : "false");
    print_kv(out, "status", to_string(r.status));
    print_kv(out, "restart_index", r.restart_index);
    if (r.mse) print_kv(out, "mse", *r.mse);
    out << "trace=";
    for (std::size_t k = 0; k < r.objective_trace.size(); ++k) {
        if (k) out << ',';
        out << format_double(r.objective_trace[k]);
    }
    out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compressed sensing and recovery of low-CP-rank tensors"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a CP model with conditioned factors");
    std::string gen_dims, gen_out, gen_tensor_out, gen_spacing = "linear";
    std::size_t gen_rank = 3;
    double gen_kappa = 1.0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--dims", gen_dims, "Mode sizes, comma-separated")->required();
    gen->add_option("--rank", gen_rank, "CP rank F")->required();
    gen->add_option("--kappa", gen_kappa, "Condition number of every factor");
    gen->add_option("--seed", gen_seed, "Seed");
    gen->add_option("--spacing", gen_spacing, "Singular value spacing (linear|log)");
    gen->add_option("--out", gen_out, "CP model file")->required();
    gen->add_option("--tensor-out", gen_tensor_out, "Also write the dense tensor");

    // kappa
    auto* kap = app.add_subcommand("kappa", "Report the tensor condition number of a CP model");
    std::string kap_model;
    kap->add_option("--model", kap_model, "CP model file")->required();

    // sense
    auto* sense = app.add_subcommand("sense", "Measure a CP model with a seeded operator");
    std::string sense_model, sense_out, sense_dist = "gaussian";
    std::size_t sense_m = 0;
    std::uint64_t sense_seed = 0;
    double sense_alpha = 1.0;
    sense->add_option("--model", sense_model, "CP model file")->required();
    sense->add_option("--m", sense_m, "Number of measurements")->required();
    sense->add_option("--seed", sense_seed, "Operator seed");
    sense->add_option("--alpha", sense_alpha, "Subgaussian scale (entry variance alpha/M)");
    sense->add_option("--dist", sense_dist, "gaussian|rademacher");
    sense->add_option("--out", sense_out, "Measurement file")->required();

    // recover
    auto* rec = app.add_subcommand("recover", "Recover a CP model from measurements");
    std::string rec_y, rec_shape, rec_out, rec_report, rec_dist = "gaussian", rec_truth;
    std::uint64_t rec_op_seed = 0, rec_seed = 0;
    std::size_t rec_m = 0;
    double rec_alpha = 1.0;
    RecoveryConfig rc;
    rec->add_option("--y", rec_y, "Measurement file")->required();
    rec->add_option("--op-seed", rec_op_seed, "Seed the measurements were taken with")->required();
    rec->add_option("--m", rec_m, "Number of measurements")->required();
    rec->add_option("--shape", rec_shape, "Mode sizes, comma-separated")->required();
    rec->add_option("--rank", rc.rank, "CP rank F")->required();
    rec->add_option("--alpha", rec_alpha, "Subgaussian scale");
    rec->add_option("--dist", rec_dist, "gaussian|rademacher");
    rec->add_option("--restarts", rc.restarts, "Random restarts");
    rec->add_option("--max-iters", rc.max_iters, "Iteration cap per restart");
    rec->add_option("--seed", rec_seed, "Solver seed");
    std::string rec_init = "back_projection";
    rec->add_option("--init", rec_init, "Starting points (back_projection|random)");
    rec->add_option("--truth", rec_truth, "Ground-truth CP model, enables mse");
    rec->add_option("--out", rec_out, "Recovered CP model file")->required();
    rec->add_option("--report", rec_report, "Report file (stdout when omitted)");

    // bound
    auto* bnd = app.add_subcommand("bound", "Measurement-count bounds");
    std::string bnd_dims;
    BoundInputs bi;
    std::optional<double> bnd_delta;
    bnd->add_option("--dims", bnd_dims, "Mode sizes")->required();
    bnd->add_option("--rank", bi.rank, "CP rank F")->required();
    bnd->add_option("--tau", bi.tau, "Upper bound on kappa (>= 1)")->required();
    bnd->add_option("--eta", bi.eta, "Failure probability");
    bnd->add_option("--alpha", bi.alpha, "Subgaussian scale");
    bnd->add_option("--C", bi.constant, "Universal constant");
    bnd->add_option("--delta", bnd_delta, "Isometry constant, selects the RIP variant");

    // cover
    auto* cov = app.add_subcommand("cover", "Log-cardinality of the covering net");
    std::string cov_dims;
    std::size_t cov_rank = 1;
    double cov_tau = 1.0, cov_eps = 0.1;
    cov->add_option("--dims", cov_dims, "Mode sizes")->required();
    cov->add_option("--rank", cov_rank, "CP rank F")->required();
    cov->add_option("--tau", cov_tau, "Upper bound on kappa");
    cov->add_option("--eps", cov_eps, "Net radius")->required();

    // rip-probe
    auto* rip = app.add_subcommand("rip-probe", "Sample restricted-isometry ratios");
    std::string rip_dims, rip_dist = "gaussian", rip_spacing = "linear";
    std::size_t rip_m = 0;
    double rip_alpha = 1.0;
    bool rip_resample = false;
    RipProbeParams rp;
    rp.samples = 1000;
    rip->add_option("--dims", rip_dims, "Mode sizes")->required();
    rip->add_option("--rank", rp.rank, "CP rank F");
    rip->add_option("--m", rip_m, "Number of measurements")->required();
    rip->add_option("--samples", rp.samples, "Number of sampled tensors");
    rip->add_option("--kappa", rp.kappa_tilde, "Factor condition number");
    rip->add_option("--seed", rp.seed, "Seed for operator and samples");
    rip->add_option("--alpha", rip_alpha, "Subgaussian scale");
    rip->add_option("--dist", rip_dist, "gaussian|rademacher");
    rip->add_option("--spacing", rip_spacing, "linear|log");
    rip->add_flag("--resample-operator", rip_resample, "Fresh operator for every sample");

    // experiment
    auto* exp = app.add_subcommand("experiment", "Monte-Carlo recovery sweep");
    std::string exp_config, exp_out, exp_label;
    bool exp_plot = false, exp_quiet = false;
    exp->add_option("--config", exp_config, "Config file (key = value)")->required();
    exp->add_option("--out", exp_out, "Output prefix for CSV files")->required();
    exp->add_flag("--plot", exp_plot, "Also emit <prefix>_plot.gp");
    exp->add_option("--label", exp_label, "Curve label for the plot");
    exp->add_flag("--quiet", exp_quiet, "No per-trial progress on stderr");

    // plot
    auto* plt = app.add_subcommand("plot", "Emit a gnuplot script for summary CSVs");
    std::vector<std::string> plt_inputs;
    std::string plt_out, plt_image;
    plt->add_option("--summary", plt_inputs, "Summary CSV, optionally LABEL=PATH")->required();
    plt->add_option("--out", plt_out, "Script path")->required();
    plt->add_option("--image", plt_image, "SVG image path");

    // selftest
    auto* st = app.add_subcommand("selftest", "Run the fast invariant checks");
    SelftestOptions sto;
    st->add_option("--seed", sto.seed, "Seed");
    st->add_flag("--inject-adjoint-fault", sto.corrupt_adjoint, "Corrupt the adjoint under test");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            const auto model = generate_conditioned_model(Shape(parse_dims(gen_dims)), gen_rank,
                                                          gen_kappa, gen_seed,
                                                          parse_spacing(gen_spacing));
            write_file(gen_out, [&](std::ostream& o) { write_model(o, model); });
            if (!gen_tensor_out.empty())
                write_file(gen_tensor_out, [&](std::ostream& o) { write_tensor(o, reconstruct(model)); });
        } else if (*kap) {
            const auto model = read_file(kap_model, [](std::istream& in) { return read_model(in); });
            const auto r = kappa(model);
            print_kv(std::cout, "status", r.is_finite() ? "finite" : "infinite");
            if (r.is_finite())
                print_kv(std::cout, "kappa", r.kappa);
            else
                print_kv(std::cout, "kappa", "inf");
            print_kv(std::cout, "sigma_max_product", r.sigma_max_product);
            print_kv(std::cout, "sigma_min_kr", r.sigma_min_kr);
            if (r.cond_product_bound)
                print_kv(std::cout, "cond_product_bound", *r.cond_product_bound);
            else
                print_kv(std::cout, "cond_product_bound", "unavailable");
        } else if (*sense) {
            const auto model = read_file(sense_model, [](std::istream& in) { return read_model(in); });
            const SensingOperator op(SensingParams{sense_m, model.shape(),
                                                   parse_distribution(sense_dist), sense_alpha,
                                                   sense_seed});
            const auto y = op.apply(reconstruct(model));
            write_file(sense_out, [&](std::ostream& o) { write_measurements(o, y); });
        } else if (*rec) {
            const auto y = read_file(rec_y, [](std::istream& in) { return read_measurements(in); });
            const SensingOperator op(SensingParams{rec_m, Shape(parse_dims(rec_shape)),
                                                   parse_distribution(rec_dist), rec_alpha,
                                                   rec_op_seed});
            rc.seed = rec_seed;
            std::optional<DenseTensor> truth;
            if (!rec_truth.empty())
                truth = reconstruct(read_file(rec_truth, [](std::istream& in) { return read_model(in); }));
            rc.init = parse_initialization(rec_init);
            const auto report = recover(op, y, rc, truth);
            write_file(rec_out, [&](std::ostream& o) { write_model(o, report.model); });
            if (rec_report.empty())
                write_report(std::cout, report);
            else
                write_file(rec_report, [&](std::ostream& o) { write_report(o, report); });
        } else if (*bnd) {
            bi.dims = parse_dims(bnd_dims);
            if (bnd_delta) {
                bi.delta = bnd_delta;
                const double v = prop2_measurement_bound(bi);
                print_kv(std::cout, "kind", "isometry");
                print_kv(std::cout, "value", v);
                print_kv(std::cout, "suggested_m", static_cast<std::uint64_t>(std::ceil(v)));
            } else {
                const double v = theorem1_measurement_bound(bi);
                print_kv(std::cout, "kind", "recovery");
                print_kv(std::cout, "value", v);
                print_kv(std::cout, "suggested_m", static_cast<std::uint64_t>(std::ceil(v)));
            }
        } else if (*cov) {
            const double v = covering_log_cardinality(parse_dims(cov_dims), cov_rank, cov_tau, cov_eps);
            print_kv(std::cout, "log_cardinality", v);
        } else if (*rip) {
            rp.spacing = parse_spacing(rip_spacing);
            SensingParams sp{rip_m, Shape(parse_dims(rip_dims)), parse_distribution(rip_dist),
                             rip_alpha, rp.seed};
            const auto r = rip_resample ? rip_probe_resampled(sp, rp)
                                        : rip_probe(SensingOperator(sp), rp);
            print_kv(std::cout, "operator", rip_resample ? "resampled" : "fixed");
            print_kv(std::cout, "samples", r.samples);
            print_kv(std::cout, "mean_ratio", r.mean_ratio);
            print_kv(std::cout, "min_ratio", r.min_ratio);
            print_kv(std::cout, "max_ratio", r.max_ratio);
            print_kv(std::cout, "delta_hat", r.delta_hat);
        } else if (*exp) {
            const auto cfg = read_file(exp_config, [](std::istream& in) { return parse_experiment_config(in); });
            ProgressCallback progress;
            if (!exp_quiet) {
                progress = [](const ExperimentRow& r) {
                    std::cerr << "kappa~=" << format_double(r.kappa_tilde) << " m=" << r.m
                              << " trial=" << r.trial_index << " mse=" << format_double(r.mse)
                              << (r.success ? " ok" : " fail") << '\n';
                };
            }
            const auto result = run_experiment(cfg, progress);
            const auto paths = write_csv(result.rows, result.summary, exp_out);
            if (exp_plot) {
                std::string label = exp_label;
                if (label.empty()) label = to_string(cfg.shape()) + ", F = " + std::to_string(cfg.rank);
                emit_plot_script({{paths.summary, label}}, exp_out + "_plot.gp", exp_out + "_plot.svg");
            }
            for (const auto& s : result.summary) {
                std::cout << "kappa_tilde=" << format_double(s.kappa_tilde) << " m=" << s.m
                          << " successes=" << s.successes << '/' << s.trials
                          << " median_mse=" << format_double(s.median_mse) << '\n';
            }
        } else if (*plt) {
            std::vector<PlotSeries> series;
            for (const auto& item : plt_inputs) {
                const auto eq = item.find('=');
                if (eq == std::string::npos)
                    series.push_back({item, ""});
                else
                    series.push_back({item.substr(eq + 1), item.substr(0, eq)});
            }
            emit_plot_script(series, plt_out, plt_image);
        } else if (*st) {
            bool all = true;
            for (const auto& c : selftest(sto)) {
                std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << '\n';
                all = all && c.passed;
            }
            return all ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
