#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gridcast/admittance.hpp"
#include "gridcast/errors.hpp"
#include "gridcast/feeder.hpp"
#include "test_support.hpp"

using namespace gridcast;
using namespace gridcast::testing;

namespace {

const char* kMinimalDoc = R"(
[buses]
b1 a slack 2.4
b2 a load 2.4

[branches]
b1 b2 50-50j 0+0j 0+0j 0+0j 0+0j 0+0j 0+0j 0+0j 0+0j

[loads]
b2 a 100 50 s1

[source]
bus b1
base_kva 1000
)";

}  // namespace

TEST_CASE("minimal two-bus document parses") {
    Feeder f = parse_feeder(kMinimalDoc);
    CHECK(f.buses.size() == 2);
    CHECK(f.branches.size() == 1);
    CHECK(f.loads.size() == 1);
    CHECK(f.slack_bus == 0);
    CHECK(f.buses[0].id == "b1");
    CHECK(f.buses[0].kind == BusKind::Slack);
    CHECK(f.base_kva == 1000.0);
    CHECK(f.branches[0].series(0, 0) == Complex(50.0, -50.0));
    CHECK(validate_feeder(f).empty());
}

TEST_CASE("dangling branch reference is rejected") {
    std::string doc = R"(
[buses]
b1 a slack 2.4
[branches]
b1 bX 50-50j 0+0j 0+0j 0+0j 0+0j 0+0j 0+0j 0+0j 0+0j
[source]
bus b1
base_kva 1000
)";
    CHECK_THROWS_WITH_AS(parse_feeder(doc), doctest::Contains("unknown bus 'bX'"), Error);
}

TEST_CASE("duplicate bus id is rejected") {
    std::string doc = R"(
[buses]
b1 a slack 2.4
b1 a load 2.4
[source]
bus b1
base_kva 1000
)";
    CHECK_THROWS_WITH_AS(parse_feeder(doc), doctest::Contains("duplicate bus id"), Error);
}

TEST_CASE("zero or negative bases are rejected") {
    std::string doc = R"(
[buses]
b1 a slack 0
[source]
bus b1
base_kva 1000
)";
    CHECK_THROWS_AS(parse_feeder(doc), Error);
}

TEST_CASE("syntax errors carry line and column") {
    std::string doc = "[buses]\nb1 a slack 2.4\nb2 a load nonsense\n[source]\nbus b1\nbase_kva 1000\n";
    try {
        parse_feeder(doc);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(e.column() > 1);
    }
}

TEST_CASE("shipped 36-bus feeder loads with expected shape") {
    Feeder f = load_feeder_file(data_path("feeder36.txt"));
    CHECK(f.buses.size() == 36);
    CHECK(f.branches.size() == 35);
    CHECK(validate_feeder(f).empty());
}

TEST_CASE("two slack buses produce one violation naming both") {
    Feeder f = parse_feeder(kMinimalDoc);
    f.buses[1].kind = BusKind::Slack;
    auto violations = validate_feeder(f);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].code == "multiple_slack");
    CHECK(violations[0].message.find("b1") != std::string::npos);
    CHECK(violations[0].message.find("b2") != std::string::npos);
}

TEST_CASE("disconnected feeder lists unreachable buses") {
    std::string doc = R"(
[buses]
b1 a slack 2.4
b2 a load 2.4
b3 a load 2.4
b4 a load 2.4
[branches]
b1 b2 50-50j 0+0j 0+0j 0+0j 0+0j 0+0j 0+0j 0+0j 0+0j
b3 b4 50-50j 0+0j 0+0j 0+0j 0+0j 0+0j 0+0j 0+0j 0+0j
[source]
bus b1
base_kva 1000
)";
    Feeder f = parse_feeder(doc);
    auto violations = validate_feeder(f);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].code == "disconnected");
    CHECK(violations[0].message.find("b3") != std::string::npos);
    CHECK(violations[0].message.find("b4") != std::string::npos);
}

TEST_CASE("serialize then parse is the identity") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        Feeder f = make_random_radial_feeder(12, seed);
        std::string text = serialize_feeder(f);
        Feeder g = parse_feeder(text);
        CHECK(feeder_equal(f, g));
        CHECK(feeder_hash(f) == feeder_hash(g));
    }
}

TEST_CASE("single-branch admittance block structure") {
    Feeder f = parse_feeder(kMinimalDoc);
    AdmittanceMatrix y = build_admittance(f);
    REQUIRE(y.index.size() == 2);
    Complex yb(50.0, -50.0);
    CHECK(Complex(y.matrix.coeff(0, 0)) == yb);
    CHECK(Complex(y.matrix.coeff(1, 1)) == yb);
    CHECK(Complex(y.matrix.coeff(0, 1)) == -yb);
    CHECK(Complex(y.matrix.coeff(1, 0)) == -yb);
}

TEST_CASE("parallel branches superpose on the off-diagonal") {
    Feeder f = parse_feeder(kMinimalDoc);
    Branch extra = f.branches[0];
    extra.series(0, 0) = Complex(10.0, -20.0);
    f.branches.push_back(extra);
    AdmittanceMatrix y = build_admittance(f);
    CHECK(Complex(y.matrix.coeff(0, 1)) == -(Complex(50.0, -50.0) + Complex(10.0, -20.0)));
}

TEST_CASE("sparse assembly equals the dense oracle entrywise") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        Feeder f = make_random_radial_feeder(10, seed);
        AdmittanceMatrix y = build_admittance(f);
        Eigen::MatrixXcd dense = dense_admittance(f, y.index);
        Eigen::MatrixXcd sparse = Eigen::MatrixXcd(y.matrix);
        REQUIRE(sparse.rows() == dense.rows());
        for (int r = 0; r < dense.rows(); ++r)
            for (int c = 0; c < dense.cols(); ++c) {
                CHECK(sparse(r, c).real() == dense(r, c).real());
                CHECK(sparse(r, c).imag() == dense(r, c).imag());
            }
    }
}

TEST_CASE("branch contribution rows sum to zero without shunts") {
    Feeder f = make_random_radial_feeder(8, 42);
    for (auto& br : f.branches) br.shunt.setZero();
    AdmittanceMatrix y = build_admittance(f);
    Eigen::MatrixXcd dense = dense_admittance(f, y.index);
    for (int r = 0; r < dense.rows(); ++r) {
        Complex sum = dense.row(r).sum();
        CHECK(std::abs(sum) < 1e-9);
    }
}

TEST_CASE("isolated node-phase is reported as singular") {
    std::string doc = R"(
[buses]
b1 abc slack 2.4
b2 ab load 2.4
b3 abc load 2.4
[branches]
b1 b2 50-50j 0+0j 0+0j 0+0j 50-50j 0+0j 0+0j 0+0j 0+0j
b2 b3 50-50j 0+0j 0+0j 0+0j 50-50j 0+0j 0+0j 0+0j 0+0j
[source]
bus b1
base_kva 1000
)";
    // b3 has phase c but no branch ever touches it
    Feeder f = parse_feeder(doc);
    CHECK_THROWS_WITH_AS(build_admittance(f), doctest::Contains("singular"), Error);
}
