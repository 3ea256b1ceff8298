#include <catch_amalgamated.hpp>

#include <random>

#include "loja/poly.hpp"
#include "loja/poly_text.hpp"

using namespace loja;

TEST_CASE("grammar basics") {
    Poly p = parse_poly("x1^2 + x2^2");
    CHECK(p.dim() == 2);
    CHECK(p.taylor_coeff({2, 0}) == 1.0);
    CHECK(p.taylor_coeff({0, 2}) == 1.0);

    p = parse_poly("x1*x2");
    CHECK(p.dim() == 2);
    CHECK(p.term_count() == 1);
    CHECK(p.taylor_coeff({1, 1}) == 1.0);

    p = parse_poly("x1^2*x2 + 3*x2^4 - 0.5*x1");
    CHECK(p.dim() == 2);
    CHECK(p.taylor_coeff({2, 1}) == 1.0);
    CHECK(p.taylor_coeff({0, 4}) == 3.0);
    CHECK(p.taylor_coeff({1, 0}) == -0.5);
}

TEST_CASE("grammar is whitespace-insensitive") {
    CHECK(parse_poly(" x1 ^ 2 * x2+3 * x2^4-0.5* x1 ") ==
          parse_poly("x1^2*x2 + 3*x2^4 - 0.5*x1"));
}

TEST_CASE("constants, repeated factors, leading sign") {
    CHECK(parse_poly("3") == Poly::constant(0, 3.0)); // no variables mentioned
    CHECK(parse_poly("-x1") == Poly::monomial(1, {1}, -1.0));
    CHECK(parse_poly("x1*x1") == parse_poly("x1^2"));
    CHECK(parse_poly("x1^2 + 1").taylor_coeff({0}) == 1.0);
    CHECK(parse_poly("2*x1 - 2*x1").is_zero());
}

TEST_CASE("syntax errors carry the offset") {
    try {
        parse_poly("x1^^2");
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.offset() == 3);
    }
    CHECK_THROWS_AS(parse_poly("x0 + x1"), parse_error);
    CHECK_THROWS_AS(parse_poly("x1^-2"), parse_error);
    CHECK_THROWS_AS(parse_poly(""), parse_error);
    CHECK_THROWS_AS(parse_poly("x1 +"), parse_error);
    CHECK_THROWS_AS(parse_poly("x1 x2"), parse_error);
    CHECK_THROWS_AS(parse_poly("* x1"), parse_error);
}

TEST_CASE("round trip through canonical text") {
    const char* corpus[] = {
        "x1^2 + x2^2",
        "x1^2 - x2^2",
        "x1^2 + 2*x1*x2^2 + x2^4",
        "x1^2 + x2^4",
        "x1^3 - 3*x1*x2^2",
        "x1^2*x2^2",
        "0.125*x1^5 - 7*x2 + 3.5",
        "0",
    };
    for (const char* s : corpus) {
        const Poly p = parse_poly(s);
        CHECK(parse_poly(to_text(p)) == p);
    }

    std::mt19937 rng(99);
    std::uniform_real_distribution<double> coeff(-10.0, 10.0);
    std::uniform_int_distribution<int> exp(0, 5);
    for (int trial = 0; trial < 50; ++trial) {
        const int dim = 1 + trial % 4;
        Poly p(dim);
        for (int t = 0; t < 5; ++t) {
            MultiIndex a(dim);
            for (int i = 0; i < dim; ++i) a[i] = exp(rng);
            if (t == 0) a[dim - 1] = std::max(a[dim - 1], 1); // keep the inferred dim stable
            p += Poly::monomial(dim, a, coeff(rng));
        }
        if (p.is_zero()) continue;
        // Round trip must reproduce the canonical representation bit for bit.
        CHECK(parse_poly(to_text(p)) == p);
    }
}
