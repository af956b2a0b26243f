#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cprip/experiment.hpp"
#include "cprip/selftest.hpp"

namespace cprip {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("cprip_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_experiment_config(in);
}

ExperimentConfig small_config() {
    return parse(
        "dims = 4,4,4\n"
        "rank = 2\n"
        "kappa_grid = 1, 10\n"
        "trials = 2\n"
        "m = 40\n"
        "base_seed = 17\n"
        "restarts = 2\n");
}

TEST(Preset, ReferenceProtocolFields) {
    const auto c = paper_fig1_preset();
    EXPECT_EQ(c.preset, "paper-fig1");
    EXPECT_EQ(c.trials, 100u);
    EXPECT_EQ(c.rank, 3u);
    EXPECT_EQ(c.success_mse_threshold, 1e-10);
    EXPECT_EQ(c.distribution, Distribution::gaussian);
    EXPECT_EQ(c.alpha, 1.0);
    // Mode sizes, grid and measurement rule stay user inputs.
    EXPECT_TRUE(c.dims.empty());
    EXPECT_TRUE(c.kappa_grid.empty());
    EXPECT_TRUE(c.m_values.empty());
    EXPECT_FALSE(c.m_factor.has_value());
    EXPECT_THROW(c.validate(), Error);
}

TEST(Preset, OperatorVarianceIsOneOverM) {
    const auto c = paper_fig1_preset();
    const SensingOperator op(SensingParams{200, Shape({10, 10, 10}), c.distribution, c.alpha, 1});
    const auto& phi = op.matrix();
    const double var = phi.squaredNorm() / static_cast<double>(phi.size());
    EXPECT_NEAR(var, 1.0 / 200.0, 0.02 / 200.0);
}

TEST(Preset, SuccessUsesMseOverElementCount) {
    ExperimentConfig c = paper_fig1_preset();
    c.dims = {3, 3, 3};
    c.kappa_grid = {1};
    c.trials = 1;
    c.m_values = {27 * 2};
    c.restarts = 1;
    c.validate();
    const auto row = run_trial(c, 0, {1.0, 54}, 0);
    EXPECT_EQ(row.success, row.mse < 1e-10);
}

TEST(Config, PresetThenOverrides) {
    const auto c = parse(
        "# comment\n"
        "preset = paper-fig1\n"
        "dims = 8, 8, 8\n"
        "kappa_grid = 1,10,100,1000\n"
        "m = 108\n"
        "trials = 20\n");
    EXPECT_EQ(c.preset, "paper-fig1");
    EXPECT_EQ(c.rank, 3u);
    EXPECT_EQ(c.trials, 20u);
    EXPECT_EQ(c.dims, (std::vector<std::size_t>{8, 8, 8}));
    EXPECT_EQ(c.kappa_grid, (std::vector<double>{1, 10, 100, 1000}));
    EXPECT_EQ(c.resolved_m(), (std::vector<std::size_t>{108}));
    c.validate();
}

TEST(Config, MeasurementFactorRule) {
    const auto c = parse("dims = 8,8,8\nrank = 3\nkappa_grid = 1\nm_factor = 1.5\n");
    EXPECT_EQ(c.resolved_m(), (std::vector<std::size_t>{108}));
}

TEST(Config, Errors) {
    EXPECT_THROW(parse("dims = 4,4\nbogus = 1\n"), Error);
    EXPECT_THROW(parse("dims = 4,4\ndims = 5,5\n"), Error);
    EXPECT_THROW(parse("preset = other\n"), Error);
    EXPECT_THROW(parse("trials = x\n"), Error);
    EXPECT_THROW(parse("dims 4,4\n"), Error);
    EXPECT_THROW(parse("dims = 4,4\nkappa_grid = 0.5\nm = 3\n").validate(), Error);
    EXPECT_THROW(parse("dims = 4,4\nkappa_grid = 1\nm = 3\ntrials = 0\n").validate(), Error);
    EXPECT_THROW(parse("dims = 4,4\nkappa_grid = 1\nm = 3\nthreshold = 0\n").validate(), Error);
    EXPECT_THROW(parse("dims = 4,4\nkappa_grid =\nm = 3\n").validate(), Error);
}

TEST(Grid, KappaMajorMeasurementMinor) {
    const auto c = parse("dims = 4,4\nrank = 1\nkappa_grid = 1,2\nm = 5,6,7\n");
    const auto g = experiment_grid(c);
    ASSERT_EQ(g.size(), 6u);
    EXPECT_EQ(g[0].kappa_tilde, 1.0);
    EXPECT_EQ(g[2].m, 7u);
    EXPECT_EQ(g[3].kappa_tilde, 2.0);
    EXPECT_EQ(g[3].m, 5u);
}

TEST(RunExperiment, SingleTrialSingleRowDeterministic) {
    auto c = small_config();
    c.kappa_grid = {1};
    c.trials = 1;
    const auto a = run_experiment(c);
    const auto b = run_experiment(c);
    ASSERT_EQ(a.rows.size(), 1u);
    EXPECT_EQ(a.rows[0].mse, b.rows[0].mse);
    EXPECT_EQ(a.rows[0].seed_used, trial_seed(17, 0, 0));
    std::ostringstream ra, rb;
    write_rows_csv(ra, a.rows);
    write_rows_csv(rb, b.rows);
    EXPECT_EQ(ra.str(), rb.str());
}

TEST(RunExperiment, ThreadCountDoesNotChangeRows) {
    auto c = small_config();
    const auto serial = run_experiment(c);
    c.threads = 3;
    const auto pooled = run_experiment(c);
    std::ostringstream a, b;
    write_rows_csv(a, serial.rows);
    write_rows_csv(b, pooled.rows);
    EXPECT_EQ(a.str(), b.str());
}

TEST(RunExperiment, SummaryConservesSuccesses) {
    const auto c = small_config();
    const auto r = run_experiment(c);
    ASSERT_EQ(r.rows.size(), 4u);
    ASSERT_EQ(r.summary.size(), 2u);
    std::size_t from_rows = 0, from_summary = 0;
    for (const auto& row : r.rows) {
        from_rows += row.success;
        EXPECT_EQ(row.success, row.mse < c.success_mse_threshold);
        EXPECT_EQ(row.wall_time_seconds, 0.0);
    }
    for (const auto& s : r.summary) {
        from_summary += s.successes;
        EXPECT_LE(s.successes, s.trials);
        EXPECT_EQ(s.trials, 2u);
    }
    EXPECT_EQ(from_rows, from_summary);
}

TEST(RunExperiment, FailedTrialIsRecordedNotThrown) {
    auto c = small_config();
    c.trials = 1;
    c.kappa_grid = {1};
    c.m_values = {100000000};  // exceeds the operator entry budget
    const auto r = run_experiment(c);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_FALSE(r.rows[0].success);
    EXPECT_TRUE(std::isinf(r.rows[0].mse));
}

TEST(Summarize, MedianAndMeanIterations) {
    const std::vector<GridPoint> grid{{1.0, 10}};
    std::vector<ExperimentRow> rows(4);
    const double mses[] = {4.0, 1.0, 3.0, 1e-12};
    for (std::size_t k = 0; k < 4; ++k) {
        rows[k].mse = mses[k];
        rows[k].iterations = k + 1;
        rows[k].success = mses[k] < 1e-10;
    }
    const auto s = summarize(grid, rows);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].median_mse, 2.0);
    EXPECT_EQ(s[0].mean_iterations, 2.5);
    EXPECT_EQ(s[0].successes, 1u);
    EXPECT_EQ(s[0].success_rate, 0.25);
}

TEST(Csv, OneRowGivesTwoLinesWithLowercaseBool) {
    ExperimentRow row;
    row.kappa_tilde = 10;
    row.m = 108;
    row.seed_used = 123;
    row.mse = 1e-3;
    row.success = false;
    std::ostringstream out;
    write_rows_csv(out, {row});
    const std::string s = out.str();
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 2);
    EXPECT_EQ(s.rfind("kappa_tilde,m,trial,seed,mse,success,iterations,wall_time_s\r\n", 0), 0u);
    EXPECT_NE(s.find(",false,"), std::string::npos);
    row.success = true;
    std::ostringstream out2;
    write_rows_csv(out2, {row});
    EXPECT_NE(out2.str().find(",true,"), std::string::npos);
}

TEST(Csv, SummaryRoundTripIsExact) {
    std::vector<SummaryRow> s(3);
    s[0] = {1.0, 108, 20, 19, 0.95, 1.2345678901234567e-25, 37.15};
    s[1] = {10.0, 108, 20, 0, 0.0, 0.0123456789, 500.0};
    s[2] = {1000.0, 7, 3, 1, 1.0 / 3.0, std::numeric_limits<double>::infinity(), 1.0 / 7.0};
    std::stringstream io;
    write_summary_csv(io, s);
    EXPECT_EQ(read_summary_csv(io), s);
}

TEST(Csv, RecordSplitterHonorsQuotes) {
    const auto f = split_csv_record("a,\"b,c\",\"d\"\"e\",\r");
    ASSERT_EQ(f.size(), 4u);
    EXPECT_EQ(f[1], "b,c");
    EXPECT_EQ(f[2], "d\"e");
    EXPECT_EQ(f[3], "");
    EXPECT_EQ(csv_field("x,y"), "\"x,y\"");
    EXPECT_EQ(csv_field("q\""), "\"q\"\"\"");
}

TEST(Csv, WriteCsvFilesAndUnwritablePath) {
    const auto dir = scratch_dir("csv");
    const auto r = run_experiment([] {
        auto c = small_config();
        c.kappa_grid = {1};
        c.trials = 1;
        return c;
    }());
    const auto paths = write_csv(r.rows, r.summary, (dir / "run").string());
    EXPECT_TRUE(fs::exists(paths.rows));
    EXPECT_TRUE(fs::exists(paths.summary));
    EXPECT_THROW(write_csv(r.rows, r.summary, (dir / "missing" / "deeper" / "run").string()), Error);
    EXPECT_THROW(write_csv({}, r.summary, (dir / "empty").string()), Error);
}

std::string four_point_summary(const fs::path& dir) {
    std::vector<SummaryRow> s;
    const double ks[] = {1, 10, 100, 1000};
    for (std::size_t k = 0; k < 4; ++k) s.push_back({ks[k], 108, 20, 20 - 4 * k, 0, 0, 0});
    const std::string path = (dir / "sum.csv").string();
    write_file(path, [&](std::ostream& o) { write_summary_csv(o, s); });
    return path;
}

TEST(PlotScript, ReferencesInputAndUsesLogAxis) {
    const auto dir = scratch_dir("plot");
    const std::string csv = four_point_summary(dir);
    const std::string gp = (dir / "fig.gp").string();
    emit_plot_script({{csv, "8x8x8"}}, gp, (dir / "fig.svg").string());
    const std::string text = slurp(gp);
    EXPECT_NE(text.find(csv), std::string::npos);
    EXPECT_NE(text.find("set logscale x"), std::string::npos);
    EXPECT_NE(text.find("8x8x8, M = 108"), std::string::npos);
}

TEST(PlotScript, MissingInputIsError) {
    const auto dir = scratch_dir("plot_missing");
    EXPECT_THROW(emit_plot_script({{(dir / "nope.csv").string(), ""}}, (dir / "x.gp").string()), Error);
}

TEST(PlotScript, RendersWithGnuplot) {
    if (std::system("gnuplot --version > /dev/null 2>&1") != 0) GTEST_SKIP() << "gnuplot not installed";
    const auto dir = scratch_dir("plot_render");
    const std::string csv = four_point_summary(dir);
    const auto gp = dir / "fig.gp";
    const auto svg = dir / "fig.svg";
    emit_plot_script({{csv, "8x8x8"}}, gp.string(), svg.string());
    EXPECT_EQ(std::system(("gnuplot " + gp.string()).c_str()), 0);
    EXPECT_TRUE(fs::exists(svg));
}

TEST(Selftest, AllChecksPass) {
    for (const auto& c : selftest()) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

TEST(Selftest, AdjointFaultIsolated) {
    SelftestOptions opt;
    opt.corrupt_adjoint = true;
    for (const auto& c : selftest(opt)) {
        if (c.name == "adjoint")
            EXPECT_FALSE(c.passed);
        else
            EXPECT_TRUE(c.passed) << c.name;
    }
}

}  // namespace
}  // namespace cprip
