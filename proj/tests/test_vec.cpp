#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "fedsim/vec.hpp"
#include "test_support.hpp"

using namespace fedsim;
using fedsim::test::make_vec;

TEST_CASE("axpy with alpha = 0 returns y unchanged") {
    ParamVector x = make_vec({1.0, -2.0, 3.0});
    ParamVector y = make_vec({4.0, 5.0, 6.0});
    ParamVector r = axpy(0.0, x, y);
    CHECK(r.values == y.values);
}

TEST_CASE("axpy with x = y and alpha = -1 gives the zero vector") {
    ParamVector x = make_vec({1.5, -0.25, 8.0});
    ParamVector r = axpy(-1.0, x, x);
    for (double v : r.values) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("sub and scale behave as plain arithmetic") {
    ParamVector a = make_vec({3.0, 1.0});
    ParamVector b = make_vec({1.0, 4.0});
    CHECK(sub(a, b).values == std::vector<double>{2.0, -3.0});
    CHECK(scale(2.0, a).values == std::vector<double>{6.0, 2.0});
    CHECK(add(a, b).values == std::vector<double>{4.0, 5.0});
}

TEST_CASE("length mismatch is rejected") {
    ParamVector a = make_vec({1.0, 2.0});
    ParamVector b = make_vec({1.0});
    CHECK_THROWS_AS(axpy(1.0, a, b), std::invalid_argument);
    CHECK_THROWS_AS(sub(a, b), std::invalid_argument);
}

TEST_CASE("shape tag mismatch is rejected") {
    ParamVector a = make_vec({1.0}, "linear:1x2");
    ParamVector b = make_vec({1.0}, "mlp1:1-2-2:tanh");
    CHECK_THROWS_AS(add(a, b), std::invalid_argument);
}

TEST_CASE("non-finite results are rejected") {
    ParamVector a = make_vec({1e308});
    CHECK_THROWS_AS(scale(1e10, a), std::domain_error);
    CHECK_THROWS_AS(axpy(1e10, a, a), std::domain_error);
}

TEST_CASE("sum_of accumulates left to right deterministically") {
    // Values chosen so that float addition order matters.
    ParamVector a = make_vec({1.0, 1e16});
    ParamVector b = make_vec({2.0, 1.0});
    ParamVector c = make_vec({3.0, -1e16});
    std::vector<const ParamVector*> order = {&a, &b, &c};

    ParamVector s1 = sum_of(order);
    ParamVector s2 = sum_of(order);
    CHECK(s1.values == s2.values);  // bitwise repeatable
    CHECK(s1.values[0] == 6.0);

    // A different grouping gives a different rounding for the second
    // entry, which is exactly why callers canonicalize before summing.
    std::vector<const ParamVector*> permuted = {&a, &c, &b};
    CHECK(sum_of(permuted).values[1] != s1.values[1]);
}

TEST_CASE("sum_of rejects an empty list") {
    std::vector<const ParamVector*> none;
    CHECK_THROWS_AS(sum_of(none), std::invalid_argument);
}

TEST_CASE("inf_norm and fingerprint") {
    ParamVector a = make_vec({-4.0, 2.0, 3.0});
    CHECK(inf_norm(a) == 4.0);
    ParamVector b = a;
    CHECK(fingerprint(a) == fingerprint(b));
    b.values[2] = 3.0000000001;
    CHECK(fingerprint(a) != fingerprint(b));
}
