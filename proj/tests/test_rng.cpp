#include <doctest.h>

#include <set>

#include "magneto/rng.hpp"

using namespace magneto;

TEST_SUITE("rng") {

TEST_CASE("splitmix64 matches the reference stream") {
    std::uint64_t state = 0;
    CHECK(splitmix64_next(state) == 0xE220A8397B1DCDAFULL);
    CHECK(splitmix64_next(state) == 0x6E789E6AA1B965F4ULL);
}

TEST_CASE("same seed gives the same stream") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differs = differs || x != c.next_u64();
    }
    CHECK(differs);
}

TEST_CASE("uniform and below stay in range") {
    Rng r(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(r.below(13) < 13);
    }
    CHECK(r.below(1) == 0);
}

TEST_CASE("choose returns sorted distinct indices") {
    Rng r(9);
    const auto pick = r.choose(50, 20);
    REQUIRE(pick.size() == 20);
    CHECK(std::is_sorted(pick.begin(), pick.end()));
    CHECK(std::set<std::size_t>(pick.begin(), pick.end()).size() == 20);
    CHECK(pick.back() < 50);
    CHECK(r.choose(5, 5) == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("derived seeds differ by index") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 2, 3) == derive_seed(derive_seed(1, 2), 3));
}

}
