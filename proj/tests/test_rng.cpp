#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "promet/rng.hpp"

using namespace promet;

TEST_CASE("identical seeds give identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next() == b.next());
    }
}

TEST_CASE("different seeds diverge") {
    Rng a(1), b(2);
    bool differs = false;
    for (int i = 0; i < 16 && !differs; ++i) {
        differs = a.next() != b.next();
    }
    CHECK(differs);
}

TEST_CASE("uniform stays in the half-open unit interval") {
    Rng rng(7);
    for (int i = 0; i < 100000; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("ranged uniform respects bounds") {
    Rng rng(9);
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform(-2.5, 3.5);
        CHECK(u >= -2.5);
        CHECK(u < 3.5);
    }
}

TEST_CASE("index stays below n") {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        CHECK(rng.index(17) < 17);
    }
    for (int i = 0; i < 100; ++i) {
        CHECK(rng.index(1) == 0);
    }
}

TEST_CASE("shuffle permutes and is seed-deterministic") {
    std::vector<int> v(100);
    for (int i = 0; i < 100; ++i) v[i] = i;
    std::vector<int> a = v, b = v;

    Rng r1(5), r2(5);
    r1.shuffle(a);
    r2.shuffle(b);
    CHECK(a == b);

    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == v);
    CHECK(a != v);
}

TEST_CASE("fnv1a64 matches the published vectors") {
    CHECK(fnv1a64("") == 14695981039346656037ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("fnv1a64 separates nearby strings") {
    CHECK(fnv1a64("token") != fnv1a64("tokem"));
    CHECK(fnv1a64("ab") != fnv1a64("ba"));
}
