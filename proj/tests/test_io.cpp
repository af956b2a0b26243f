#include <sstream>

#include <gtest/gtest.h>

#include "cprip/io.hpp"
#include "cprip/selftest.hpp"

namespace cprip {
namespace {

TEST(FormatDouble, SeventeenSignificantDigitsRoundTrip) {
    Rng rng(1);
    for (int k = 0; k < 1000; ++k) {
        const double v = std::ldexp(rng.normal(), static_cast<int>(rng.bits() % 600) - 300);
        ASSERT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
    }
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(TextFormats, RandomRoundTripsAreExact) {
    Rng rng(2);
    for (int draw = 0; draw < 30; ++draw) {
        std::vector<std::size_t> dims;
        const std::size_t order = 2 + rng.bits() % 3;
        for (std::size_t n = 0; n < order; ++n) dims.push_back(1 + rng.bits() % 4);
        const auto model = random_gaussian_model(rng, dims, 1 + rng.bits() % 3);

        std::stringstream ms;
        write_model(ms, model);
        const auto back = read_model(ms);
        ASSERT_EQ(back.order(), model.order());
        for (std::size_t n = 0; n < model.order(); ++n) ASSERT_EQ(back.factor(n), model.factor(n));

        const auto x = reconstruct(model);
        std::stringstream ts;
        write_tensor(ts, x);
        const auto xb = read_tensor(ts);
        ASSERT_EQ(xb.shape(), x.shape());
        for (std::size_t k = 0; k < x.size(); ++k) ASSERT_EQ(xb[k], x[k]);

        std::stringstream fs;
        write_factor(fs, model.factor(0));
        ASSERT_EQ(read_factor(fs), model.factor(0));

        Vector y(1 + static_cast<Eigen::Index>(rng.bits() % 9));
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.normal();
        std::stringstream ys;
        write_measurements(ys, y);
        ASSERT_EQ(read_measurements(ys), y);
    }
}

TEST(TextFormats, HeaderLayout) {
    Matrix a(2, 1);
    a << 1.5, -2;
    std::ostringstream out;
    write_model(out, CpModel({a, a}));
    EXPECT_EQ(out.str(), "cpmodel 2 1\nfactor 2 1\n1.5\n-2\nfactor 2 1\n1.5\n-2\n");
    std::ostringstream t;
    write_tensor(t, DenseTensor(Shape({1, 2}), {3, 4}));
    EXPECT_EQ(t.str(), "tensor 2 1 2\n3\n4\n");
}

TEST(TextFormats, MalformedInputRejected) {
    auto model = [](const std::string& s) {
        std::istringstream in(s);
        return read_model(in);
    };
    EXPECT_THROW(model("tensor 2 1 1\n1\n"), Error);
    EXPECT_THROW(model("cpmodel 2 1\nfactor 1 1\n1\n"), Error);
    EXPECT_THROW(model("cpmodel 2 2\nfactor 1 1\n1\nfactor 1 1\n1\n"), Error);
    EXPECT_THROW(model("cpmodel 2 1\nfactor 1 1\nabc\nfactor 1 1\n1\n"), Error);
    EXPECT_THROW(model("cpmodel 2 1\nfactor 1 1\nnan\nfactor 1 1\n1\n"), Error);
    std::istringstream short_tensor("tensor 2 2 2\n1 2 3\n");
    EXPECT_THROW(read_tensor(short_tensor), Error);
    std::istringstream neg("measurements -3\n");
    EXPECT_THROW(read_measurements(neg), Error);
}

TEST(Files, MissingPathIsIoError) {
    try {
        read_file("/nonexistent/dir/file.txt", [](std::istream& in) { return read_measurements(in); });
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::io_error);
    }
}

}  // namespace
}  // namespace cprip
