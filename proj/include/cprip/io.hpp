#pragma once

// Plain-text persistence.
//
//   tensor N I1 ... IN        followed by prod(I_n) values in vec order
//   factor ROWS COLS          followed by row-major values
//   cpmodel N F               followed by N factor blocks
//   measurements M            followed by M values
//
// Values are written with 17 significant digits so that reading back
// reproduces every double exactly.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cprip/error.hpp"
#include "cprip/tensor.hpp"

namespace cprip {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    std::string word(const char* what) {
        std::string tok;
        if (!(in_ >> tok))
            throw Error(ErrorKind::parse_error, std::string("unexpected end of input reading ") + what);
        return tok;
    }

    void expect(const std::string& keyword) {
        const auto tok = word(keyword.c_str());
        require(tok == keyword, ErrorKind::parse_error,
                "expected header '" + keyword + "', found '" + tok + "'");
    }

    std::size_t count(const char* what) {
        const auto tok = word(what);
        char* end = nullptr;
        const long long v = std::strtoll(tok.c_str(), &end, 10);
        require(end && *end == '\0' && v >= 0, ErrorKind::parse_error,
                std::string("bad ") + what + " '" + tok + "'");
        return static_cast<std::size_t>(v);
    }

    double real(const char* what) {
        const auto tok = word(what);
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        require(end && *end == '\0', ErrorKind::parse_error,
                std::string("bad ") + what + " '" + tok + "'");
        require(std::isfinite(v), ErrorKind::non_finite, std::string("non-finite ") + what);
        return v;
    }

private:
    std::istream& in_;
};

inline void write_factor_body(std::ostream& out, const Matrix& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (j) out << ' ';
            out << format_double(a(i, j));
        }
        out << '\n';
    }
}

inline Matrix read_factor_block(TokenReader& r) {
    r.expect("factor");
    const auto rows = r.count("row count");
    const auto cols = r.count("column count");
    Matrix a(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = r.real("factor entry");
    return a;
}

}  // namespace detail

inline void write_tensor(std::ostream& out, const DenseTensor& x) {
    out << "tensor " << x.shape().order();
    for (std::size_t d : x.shape().dims()) out << ' ' << d;
    out << '\n';
    for (double v : x.values()) out << format_double(v) << '\n';
}

inline DenseTensor read_tensor(std::istream& in) {
    detail::TokenReader r(in);
    r.expect("tensor");
    const auto order = r.count("tensor order");
    std::vector<std::size_t> dims(order);
    for (auto& d : dims) d = r.count("mode size");
    Shape shape(std::move(dims));
    std::vector<double> values(shape.element_count());
    for (auto& v : values) v = r.real("tensor entry");
    return DenseTensor(std::move(shape), std::move(values));
}

inline void write_factor(std::ostream& out, const Matrix& a) {
    out << "factor " << a.rows() << ' ' << a.cols() << '\n';
    detail::write_factor_body(out, a);
}

inline Matrix read_factor(std::istream& in) {
    detail::TokenReader r(in);
    return detail::read_factor_block(r);
}

inline void write_model(std::ostream& out, const CpModel& model) {
    out << "cpmodel " << model.order() << ' ' << model.rank() << '\n';
    for (const auto& a : model.factors()) write_factor(out, a);
}

inline CpModel read_model(std::istream& in) {
    detail::TokenReader r(in);
    r.expect("cpmodel");
    const auto order = r.count("model order");
    const auto rank = r.count("model rank");
    std::vector<Matrix> factors;
    for (std::size_t n = 0; n < order; ++n) {
        factors.push_back(detail::read_factor_block(r));
        require(static_cast<std::size_t>(factors.back().cols()) == rank,
                ErrorKind::dimension_mismatch, "factor column count disagrees with header rank");
    }
    return CpModel(std::move(factors));
}

inline void write_measurements(std::ostream& out, const Vector& y) {
    out << "measurements " << y.size() << '\n';
    for (Eigen::Index i = 0; i < y.size(); ++i) out << format_double(y(i)) << '\n';
}

inline Vector read_measurements(std::istream& in) {
    detail::TokenReader r(in);
    r.expect("measurements");
    const auto m = r.count("measurement count");
    Vector y(static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = r.real("measurement");
    return y;
}

template <typename Reader>
auto read_file(const std::string& path, Reader reader) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io_error, "cannot open '" + path + "' for reading");
    return reader(in);
}

template <typename Writer>
void write_file(const std::string& path, Writer writer) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::io_error, "cannot open '" + path + "' for writing");
    writer(out);
    out.flush();
    require(static_cast<bool>(out), ErrorKind::io_error, "write to '" + path + "' failed");
}

}  // namespace cprip
