#include <catch2/catch_amalgamated.hpp>

#include "lfsim/lemma.hpp"

using namespace lfsim;

TEST_CASE("k = 1 couples nobody", "[lemma]") {
  for (long long n : {2, 3, 5, 9, 17}) {
    CHECK(coupling_probability(n, 1).p == BigRational(0));
    CHECK(coupling_probability_bruteforce(n, 1) == BigRational(0));
  }
}

TEST_CASE("k = n couples with probability exactly one half", "[lemma]") {
  const BigRational half(1, 2);
  for (long long n : {2, 3, 4, 7, 12, 40, 64})
    CHECK(coupling_probability(n, n).p == half);
  for (long long n : {2, 3, 4, 7, 12})
    CHECK(coupling_probability_bruteforce(n, n) == half);
}

TEST_CASE("n=5, k=2 evaluates to one fifth", "[lemma]") {
  auto cp = coupling_probability(5, 2);
  CHECK(cp.g == 5);
  CHECK(cp.f == 1);
  CHECK(cp.p == BigRational(1, 5));
  CHECK(coupling_probability_bruteforce(5, 2) == BigRational(1, 5));
}

TEST_CASE("closed form equals enumeration for all small cases", "[lemma]") {
  for (long long n = 2; n <= 12; ++n)
    for (long long k = 1; k <= n; ++k)
      CHECK(coupling_probability(n, k).p ==
            coupling_probability_bruteforce(n, k));
}

TEST_CASE("coupling probability rises strictly with attack severity",
          "[lemma]") {
  CHECK(monotonicity_check(3));
  CHECK(monotonicity_check(10));
  CHECK(monotonicity_check(33));

  // n = 3 by hand: p = (0, 1/3, 1/2).
  CHECK(coupling_probability(3, 1).p == BigRational(0));
  CHECK(coupling_probability(3, 2).p == BigRational(1, 3));
  CHECK(coupling_probability(3, 3).p == BigRational(1, 2));
}

TEST_CASE("bounds and argument checks", "[lemma]") {
  REQUIRE_THROWS_AS(coupling_probability(1, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(coupling_probability(5, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(coupling_probability(5, 6), std::invalid_argument);
  REQUIRE_THROWS_AS(monotonicity_check(2), std::invalid_argument);
  REQUIRE_THROWS_AS(coupling_probability_bruteforce(21, 3),
                    std::invalid_argument);

  for (long long n = 2; n <= 16; ++n)
    for (long long k = 1; k <= n; ++k) {
      const auto p = coupling_probability(n, k).p;
      CHECK(p >= BigRational(0));
      CHECK(p <= BigRational(1, 2));
    }
}

TEST_CASE("binomial uses the zero convention below the diagonal", "[lemma]") {
  CHECK(binomial(5, -1) == 0);
  CHECK(binomial(5, 6) == 0);
  CHECK(binomial(5, 0) == 1);
  CHECK(binomial(5, 2) == 10);
  CHECK(binomial(63, 31) == BigInt("916312070471295267"));
}
