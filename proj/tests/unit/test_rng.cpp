#include "maskrl/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

using maskrl::Rng;

TEST_CASE("same seed reproduces the stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("split streams are independent of parent consumption") {
  Rng parent(7);
  Rng child_before = parent.split(3);
  parent.next_u64();
  parent.next_u64();
  Rng child_after = parent.split(3);
  for (int i = 0; i < 10; ++i)
    CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("distinct seeds and tags give distinct streams") {
  Rng a(1), b(2);
  CHECK(a.next_u64() != b.next_u64());
  Rng p(9);
  CHECK(p.split(0).next_u64() != p.split(1).next_u64());
  // split chains do not collide with flat splits on small tags
  CHECK(p.split(0).split(1).next_u64() != p.split(1).next_u64());
}

TEST_CASE("next_double is uniform-ish in [0,1)") {
  Rng rng(123);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("next_below covers the range without bias") {
  Rng rng(55);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 14000; ++i) counts[rng.next_below(7)]++;
  for (int c : counts) CHECK(std::abs(c - 2000) < 300);
}

TEST_CASE("categorical respects the distribution") {
  Rng rng(99);
  const double probs[3] = {0.2, 0.5, 0.3};
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 30000; ++i) counts[rng.categorical(probs, 3)]++;
  CHECK(std::abs(counts[0] / 30000.0 - 0.2) < 0.02);
  CHECK(std::abs(counts[1] / 30000.0 - 0.5) < 0.02);
  CHECK(std::abs(counts[2] / 30000.0 - 0.3) < 0.02);
}
