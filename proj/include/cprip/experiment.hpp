#pragma once

// Monte-Carlo recovery sweeps over a (kappa~, M) grid.
//
// Seeds for trial t of grid point g:
//   trial    = mix_seed(mix_seed(base_seed, g), t)
//   operator = mix_seed(trial, 0x5E)
//   model    = mix_seed(trial, 0xA7)
//   solver   = mix_seed(trial, 0xC3)

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cprip/conditioning.hpp"
#include "cprip/error.hpp"
#include "cprip/io.hpp"
#include "cprip/random.hpp"
#include "cprip/recovery.hpp"
#include "cprip/sensing.hpp"
#include "cprip/tensor.hpp"

namespace cprip {

inline constexpr std::uint64_t operator_seed_tag = 0x5E;
inline constexpr std::uint64_t model_seed_tag = 0xA7;
inline constexpr std::uint64_t solver_seed_tag = 0xC3;

struct ExperimentConfig {
    std::string preset;
    std::vector<std::size_t> dims;
    std::size_t rank = 3;
    std::vector<double> kappa_grid;
    std::size_t trials = 100;
    /// Explicit measurement counts; when empty, M = ceil(m_factor * sum_n I_n F).
    std::vector<std::size_t> m_values;
    std::optional<double> m_factor = 1.5;
    double alpha = 1.0;
    Distribution distribution = Distribution::gaussian;
    double success_mse_threshold = 1e-10;
    std::uint64_t base_seed = 0;
    std::size_t restarts = 5;
    std::size_t max_iters = 500;
    Spacing spacing = Spacing::linear;
    Initialization init = Initialization::back_projection;
    std::size_t threads = 1;
    /// Wall time is not reproducible; when off the column is written as 0.
    bool record_wall_time = false;

    [[nodiscard]] Shape shape() const { return Shape(dims); }

    [[nodiscard]] std::vector<std::size_t> resolved_m() const {
        if (!m_values.empty()) return m_values;
        require(m_factor.has_value(), ErrorKind::invalid_argument,
                "no measurement rule: set 'm' or 'm_factor'");
        const double p = static_cast<double>(parameter_count(shape(), rank));
        return {static_cast<std::size_t>(std::ceil(*m_factor * p))};
    }

    void validate() const {
        require(dims.size() >= 2, ErrorKind::invalid_argument, "'dims' needs at least 2 entries");
        require(rank >= 1, ErrorKind::invalid_argument, "'rank' must be >= 1");
        for (std::size_t d : dims)
            require(d >= rank, ErrorKind::invalid_argument,
                    "every mode size must be >= rank for conditioned factors");
        require(!kappa_grid.empty(), ErrorKind::invalid_argument, "'kappa_grid' is empty");
        for (double k : kappa_grid)
            require(std::isfinite(k) && k >= 1.0, ErrorKind::invalid_argument,
                    "kappa_grid values must be >= 1");
        require(trials >= 1, ErrorKind::invalid_argument, "'trials' must be >= 1");
        require(m_values.empty() || std::all_of(m_values.begin(), m_values.end(),
                                                [](std::size_t m) { return m >= 1; }),
                ErrorKind::invalid_argument, "'m' values must be >= 1");
        if (m_values.empty())
            require(m_factor.has_value() && *m_factor > 0.0, ErrorKind::invalid_argument,
                    "no measurement rule: set 'm' or a positive 'm_factor'");
        require(alpha > 0.0, ErrorKind::invalid_argument, "'alpha' must be > 0");
        require(success_mse_threshold > 0.0, ErrorKind::invalid_argument,
                "'threshold' must be > 0");
        require(restarts >= 1, ErrorKind::invalid_argument, "'restarts' must be >= 1");
        require(max_iters >= 1, ErrorKind::invalid_argument, "'max_iters' must be >= 1");
        require(threads >= 1, ErrorKind::invalid_argument, "'threads' must be >= 1");
    }
};

/// Numerical protocol of the reference Monte-Carlo study: rank 3, 100 trials,
/// success iff MSE < 1e-10, gaussian entries of variance 1/M. Mode sizes,
/// the kappa~ grid and the measurement rule are left for the user.
inline ExperimentConfig paper_fig1_preset() {
    ExperimentConfig c;
    c.preset = "paper-fig1";
    c.rank = 3;
    c.trials = 100;
    c.success_mse_threshold = 1e-10;
    c.distribution = Distribution::gaussian;
    c.alpha = 1.0;
    c.m_factor.reset();
    return c;
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_real(const std::string& key, const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    require(!s.empty() && end && *end == '\0' && std::isfinite(v), ErrorKind::parse_error,
            "key '" + key + "': bad number '" + s + "'");
    return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& s) {
    char* end = nullptr;
    require(!s.empty() && s.front() != '-', ErrorKind::parse_error,
            "key '" + key + "': bad integer '" + s + "'");
    const unsigned long long v = std::strtoull(s.c_str(), &end, 0);
    require(end && *end == '\0', ErrorKind::parse_error,
            "key '" + key + "': bad integer '" + s + "'");
    return static_cast<std::uint64_t>(v);
}

inline bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "on" || s == "1") return true;
    if (s == "false" || s == "off" || s == "0") return false;
    throw Error(ErrorKind::parse_error, "key '" + key + "': bad boolean '" + s + "'");
}

}  // namespace detail

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& item : detail::split_list(s))
        out.push_back(static_cast<std::size_t>(detail::parse_uint(key, item)));
    return out;
}

inline std::vector<double> parse_real_list(const std::string& key, const std::string& s) {
    std::vector<double> out;
    for (const auto& item : detail::split_list(s)) out.push_back(detail::parse_real(key, item));
    return out;
}

inline Spacing parse_spacing(std::string_view s) {
    if (s == "linear") return Spacing::linear;
    if (s == "log") return Spacing::log;
    throw Error(ErrorKind::invalid_argument, "unknown spacing '" + std::string(s) + "'");
}

/// Flat `key = value` lines; '#' starts a comment; lists are comma-separated.
/// A `preset` line is applied first wherever it appears, other keys override it.
inline ExperimentConfig parse_experiment_config(std::istream& in) {
    std::map<std::string, std::string> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, ErrorKind::parse_error,
                "line " + std::to_string(lineno) + ": expected 'key = value'");
        auto key = detail::trim(std::string_view(line).substr(0, eq));
        auto value = detail::trim(std::string_view(line).substr(eq + 1));
        require(!key.empty(), ErrorKind::parse_error, "line " + std::to_string(lineno) + ": empty key");
        require(entries.emplace(key, value).second, ErrorKind::parse_error,
                "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }

    ExperimentConfig c;
    if (auto it = entries.find("preset"); it != entries.end()) {
        require(it->second == "paper-fig1", ErrorKind::parse_error,
                "unknown preset '" + it->second + "'");
        c = paper_fig1_preset();
        entries.erase(it);
    }
    for (const auto& [key, value] : entries) {
        if (key == "dims") c.dims = parse_size_list(key, value);
        else if (key == "rank") c.rank = detail::parse_uint(key, value);
        else if (key == "kappa_grid") c.kappa_grid = parse_real_list(key, value);
        else if (key == "trials") c.trials = detail::parse_uint(key, value);
        else if (key == "m") c.m_values = parse_size_list(key, value);
        else if (key == "m_factor") c.m_factor = detail::parse_real(key, value);
        else if (key == "alpha") c.alpha = detail::parse_real(key, value);
        else if (key == "distribution") c.distribution = parse_distribution(value);
        else if (key == "threshold") c.success_mse_threshold = detail::parse_real(key, value);
        else if (key == "base_seed") c.base_seed = detail::parse_uint(key, value);
        else if (key == "restarts") c.restarts = detail::parse_uint(key, value);
        else if (key == "max_iters") c.max_iters = detail::parse_uint(key, value);
        else if (key == "spacing") c.spacing = parse_spacing(value);
        else if (key == "init") c.init = parse_initialization(value);
        else if (key == "threads") c.threads = detail::parse_uint(key, value);
        else if (key == "record_wall_time") c.record_wall_time = detail::parse_bool(key, value);
        else throw Error(ErrorKind::parse_error, "unknown key '" + key + "'");
    }
    return c;
}

struct GridPoint {
    double kappa_tilde = 1.0;
    std::size_t m = 0;
};

/// kappa~ major, M minor.
inline std::vector<GridPoint> experiment_grid(const ExperimentConfig& c) {
    std::vector<GridPoint> grid;
    const auto ms = c.resolved_m();
    for (double k : c.kappa_grid)
        for (std::size_t m : ms) grid.push_back({k, m});
    return grid;
}

struct ExperimentRow {
    std::size_t grid_index = 0;
    double kappa_tilde = 1.0;
    std::size_t m = 0;
    std::size_t trial_index = 0;
    std::uint64_t seed_used = 0;
    double mse = 0.0;
    bool success = false;
    std::size_t iterations = 0;
    double wall_time_seconds = 0.0;
};

struct SummaryRow {
    double kappa_tilde = 1.0;
    std::size_t m = 0;
    std::size_t trials = 0;
    std::size_t successes = 0;
    double success_rate = 0.0;
    double median_mse = 0.0;
    double mean_iterations = 0.0;

    friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct ExperimentResult {
    std::vector<ExperimentRow> rows;
    std::vector<SummaryRow> summary;
};

inline std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t grid_index,
                                std::size_t trial_index) {
    return mix_seed(mix_seed(base_seed, grid_index), trial_index);
}

/// One planted trial. Solver failures surface as unsuccessful rows.
inline ExperimentRow run_trial(const ExperimentConfig& c, std::size_t grid_index,
                               const GridPoint& point, std::size_t trial_index) {
    const auto start = std::chrono::steady_clock::now();
    ExperimentRow row;
    row.grid_index = grid_index;
    row.kappa_tilde = point.kappa_tilde;
    row.m = point.m;
    row.trial_index = trial_index;
    row.seed_used = trial_seed(c.base_seed, grid_index, trial_index);

    try {
        const Shape shape = c.shape();
        const auto model = generate_conditioned_model(shape, c.rank, point.kappa_tilde,
                                                      mix_seed(row.seed_used, model_seed_tag),
                                                      c.spacing);
        const DenseTensor truth = reconstruct(model);
        const SensingOperator op(SensingParams{point.m, shape, c.distribution, c.alpha,
                                               mix_seed(row.seed_used, operator_seed_tag)});
        const MeasurementVector y = op.apply(truth);

        RecoveryConfig rc;
        rc.rank = c.rank;
        rc.restarts = c.restarts;
        rc.max_iters = c.max_iters;
        rc.init = c.init;
        rc.seed = mix_seed(row.seed_used, solver_seed_tag);
        const auto report = recover(op, y, rc, truth);
        row.mse = *report.mse;
        row.iterations = report.iterations;
        row.success = std::isfinite(row.mse) && row.mse < c.success_mse_threshold;
    } catch (const Error&) {
        row.mse = std::numeric_limits<double>::infinity();
        row.success = false;
    }

    if (c.record_wall_time)
        row.wall_time_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

inline std::vector<SummaryRow> summarize(const std::vector<GridPoint>& grid,
                                         const std::vector<ExperimentRow>& rows) {
    std::vector<SummaryRow> summary;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        SummaryRow s;
        s.kappa_tilde = grid[g].kappa_tilde;
        s.m = grid[g].m;
        std::vector<double> mses;
        double iters = 0.0;
        for (const auto& r : rows) {
            if (r.grid_index != g) continue;
            ++s.trials;
            if (r.success) ++s.successes;
            mses.push_back(r.mse);
            iters += static_cast<double>(r.iterations);
        }
        if (s.trials > 0) {
            std::sort(mses.begin(), mses.end());
            const std::size_t h = mses.size() / 2;
            s.median_mse = mses.size() % 2 ? mses[h] : 0.5 * (mses[h - 1] + mses[h]);
            s.success_rate = static_cast<double>(s.successes) / static_cast<double>(s.trials);
            s.mean_iterations = iters / static_cast<double>(s.trials);
        }
        summary.push_back(s);
    }
    return summary;
}

using ProgressCallback = std::function<void(const ExperimentRow&)>;

/// Trials run on `threads` workers; rows come back ordered by (grid point, trial).
inline ExperimentResult run_experiment(const ExperimentConfig& c,
                                       const ProgressCallback& progress = {}) {
    c.validate();
    const auto grid = experiment_grid(c);
    const std::size_t total = grid.size() * c.trials;
    std::vector<ExperimentRow> rows(total);

    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t k = next++; k < total; k = next++) {
            const std::size_t g = k / c.trials;
            rows[k] = run_trial(c, g, grid[g], k % c.trials);
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(rows[k]);
            }
        }
    };
    const std::size_t workers = std::min(c.threads, total);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    ExperimentResult result;
    result.summary = summarize(grid, rows);
    result.rows = std::move(rows);
    return result;
}

// ---------------------------------------------------------------------------
// CSV

inline const char* rows_csv_header = "kappa_tilde,m,trial,seed,mse,success,iterations,wall_time_s";
inline const char* summary_csv_header =
    "kappa_tilde,m,trials,successes,success_rate,median_mse,mean_iterations";

/// RFC 4180 field quoting.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + '"';
}

inline void write_rows_csv(std::ostream& out, const std::vector<ExperimentRow>& rows) {
    out << rows_csv_header << "\r\n";
    for (const auto& r : rows) {
        out << csv_field(format_double(r.kappa_tilde)) << ',' << r.m << ',' << r.trial_index << ','
            << r.seed_used << ',' << csv_field(format_double(r.mse)) << ','
            << (r.success ? "true" : "false") << ',' << r.iterations << ','
            << csv_field(format_double(r.wall_time_seconds)) << "\r\n";
    }
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& summary) {
    out << summary_csv_header << "\r\n";
    for (const auto& s : summary) {
        out << csv_field(format_double(s.kappa_tilde)) << ',' << s.m << ',' << s.trials << ','
            << s.successes << ',' << csv_field(format_double(s.success_rate)) << ','
            << csv_field(format_double(s.median_mse)) << ','
            << csv_field(format_double(s.mean_iterations)) << "\r\n";
    }
}

struct CsvPaths {
    std::string rows;
    std::string summary;
};

inline CsvPaths write_csv(const std::vector<ExperimentRow>& rows,
                          const std::vector<SummaryRow>& summary, const std::string& prefix) {
    require(!rows.empty(), ErrorKind::invalid_argument, "no rows to write");
    CsvPaths paths{prefix + "_rows.csv", prefix + "_summary.csv"};
    write_file(paths.rows, [&](std::ostream& o) { write_rows_csv(o, rows); });
    write_file(paths.summary, [&](std::ostream& o) { write_summary_csv(o, summary); });
    return paths;
}

/// Splits one CSV record, honoring RFC 4180 quotes (no embedded newlines).
inline std::vector<std::string> split_csv_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline std::vector<SummaryRow> read_summary_csv(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::parse_error, "empty summary CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    require(line == summary_csv_header, ErrorKind::parse_error, "unexpected summary CSV header");
    std::vector<SummaryRow> out;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv_record(line);
        require(f.size() == 7, ErrorKind::parse_error, "summary CSV record needs 7 fields");
        SummaryRow s;
        s.kappa_tilde = std::strtod(f[0].c_str(), nullptr);
        s.m = static_cast<std::size_t>(detail::parse_uint("m", f[1]));
        s.trials = static_cast<std::size_t>(detail::parse_uint("trials", f[2]));
        s.successes = static_cast<std::size_t>(detail::parse_uint("successes", f[3]));
        s.success_rate = std::strtod(f[4].c_str(), nullptr);
        s.median_mse = std::strtod(f[5].c_str(), nullptr);
        s.mean_iterations = std::strtod(f[6].c_str(), nullptr);
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Plot script

struct PlotSeries {
    std::string summary_csv;
    /// Legend prefix, typically the mode sizes, e.g. "8x8x8".
    std::string label;
};

inline std::string gnuplot_quote(const std::string& s) {
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') q += '\\';
        q += ch;
    }
    return q + '"';
}

/// Writes a gnuplot script drawing successful recoveries against kappa~ on a
/// log x-axis, one curve per (summary file, M) pair.
inline void emit_plot_script(const std::vector<PlotSeries>& series, const std::string& out_path,
                             const std::string& image_path = "") {
    require(!series.empty(), ErrorKind::invalid_argument, "no summary files given");
    std::vector<std::string> plots;
    for (const auto& s : series) {
        require(std::filesystem::exists(s.summary_csv), ErrorKind::io_error,
                "summary file '" + s.summary_csv + "' does not exist");
        const auto summary = read_file(s.summary_csv, [](std::istream& in) { return read_summary_csv(in); });
        std::set<std::size_t> ms;
        for (const auto& r : summary) ms.insert(r.m);
        for (std::size_t m : ms) {
            std::string title = s.label.empty() ? "" : s.label + ", ";
            title += "M = " + std::to_string(m);
            plots.push_back(gnuplot_quote(s.summary_csv) + " every ::1 using 1:($2 == " +
                            std::to_string(m) + " ? $4 : 1/0) with linespoints title " +
                            gnuplot_quote(title));
        }
    }

    const std::string image = image_path.empty() ? out_path + ".svg" : image_path;
    write_file(out_path, [&](std::ostream& o) {
        o << "# Successful recoveries versus latent-factor condition number.\n"
          << "set terminal svg size 800,600\n"
          << "set output " << gnuplot_quote(image) << "\n"
          << "set datafile separator \",\"\n"
          << "set logscale x 10\n"
          << "set xlabel \"condition number of latent factors (kappa~)\"\n"
          << "set ylabel \"number of successful recoveries\"\n"
          << "set yrange [0:*]\n"
          << "set grid\n"
          << "set key top right\n"
          << "plot ";
        for (std::size_t k = 0; k < plots.size(); ++k) {
            if (k) o << ", \\\n     ";
            o << plots[k];
        }
        o << "\n";
    });
}

}  // namespace cprip
