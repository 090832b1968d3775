#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "semsim/rng.hpp"
#include "semsim/sdsm.hpp"

using namespace semsim;

TEST_CASE("pad fifo is strictly first in first out") {
    PadFifo f;
    f.push(10, 100);
    f.push(11, 50); // younger but ready earlier; order still holds
    f.push(12, 200);
    CHECK(f.size() == 3);
    CHECK(f.consume().seed == 10);
    CHECK(f.consume().seed == 11);
    CHECK(f.front().seed == 12);
    CHECK(f.consume().ready_at == 200);
    CHECK(f.empty());
    CHECK_THROWS_AS(f.consume(), std::logic_error);
}

TEST_CASE("ledger grants are unique and monotone") {
    TcmSeedLedger ledger;
    std::set<Seed> seen;
    Seed prev = 0;
    for (int i = 0; i < 100000; i++) {
        Seed s = ledger.next();
        CHECK(s > prev);
        prev = s;
        seen.insert(s);
    }
    CHECK(seen.size() == 100000);
    CHECK(seen.count(0) == 0); // seed 0 stays reserved for initial state
}

TEST_CASE("pad buffer entries are single use") {
    PadBuffer b(4);
    b.refresh(0x40, 7, 100);
    auto p = b.take(0x40);
    REQUIRE(p);
    CHECK(p->seed == 7);
    CHECK(p->ready_at == 100);
    CHECK_FALSE(b.take(0x40));
}

TEST_CASE("pad buffer evicts the least recently refreshed entry") {
    PadBuffer b(2);
    b.refresh(0x00, 1, 0);
    b.refresh(0x40, 2, 0);
    b.refresh(0x00, 3, 0); // bump 0x00
    b.refresh(0x80, 4, 0); // 0x40 falls out
    CHECK_FALSE(b.take(0x40));
    auto p0 = b.take(0x00);
    REQUIRE(p0);
    CHECK(p0->seed == 3); // refresh replaced the pad
    REQUIRE(b.take(0x80));
}

TEST_CASE("pad buffer drop removes without returning") {
    PadBuffer b(2);
    b.refresh(0x40, 1, 0);
    b.drop(0x40);
    b.drop(0x80); // absent, no-op
    CHECK(b.size() == 0);
    CHECK_FALSE(b.take(0x40));
}

TEST_CASE("heat decays by half lives and touches add one") {
    ProcessHeat h;
    h.touch(0, 1000.0);
    CHECK(h.value(0, 1000.0) == doctest::Approx(1.0));
    CHECK(h.value(1000, 1000.0) == doctest::Approx(0.5));
    CHECK(h.value(2000, 1000.0) == doctest::Approx(0.25));
    h.touch(1000, 1000.0);
    CHECK(h.value(1000, 1000.0) == doctest::Approx(1.5));
}

TEST_CASE("proportional split hits the published examples") {
    CHECK(largest_remainder_split({80.0, 20.0}, 10) == std::vector<size_t>{8, 2});
    CHECK(largest_remainder_split({1.0, 1.0, 1.0}, 10) == std::vector<size_t>{4, 3, 3});
}

TEST_CASE("split ties go to the lower index") {
    CHECK(largest_remainder_split({1.0, 1.0}, 5) == std::vector<size_t>{3, 2});
    CHECK(largest_remainder_split({1.0, 1.0, 1.0, 1.0}, 2) == std::vector<size_t>{1, 1, 0, 0});
}

TEST_CASE("split with zero total weight parks capacity at the first entry") {
    CHECK(largest_remainder_split({0.0, 0.0}, 4) == std::vector<size_t>{4, 0});
}

TEST_CASE("split always distributes exactly the capacity") {
    Rng rng(7);
    for (int trial = 0; trial < 500; trial++) {
        size_t n = 1 + rng.uniform(6);
        std::vector<double> w(n);
        for (auto& x : w) x = rng.uniform(100);
        size_t cap = rng.uniform(40);
        auto out = largest_remainder_split(w, cap);
        size_t sum = 0;
        for (size_t v : out) sum += v;
        CHECK(sum == cap);
        double total = 0;
        for (double x : w) total += x;
        if (total > 0) {
            for (size_t i = 0; i < n; i++) {
                double exact = w[i] / total * static_cast<double>(cap);
                CHECK(static_cast<double>(out[i]) >= exact - 1.0);
                CHECK(static_cast<double>(out[i]) <= exact + 1.0);
            }
        }
    }
}
