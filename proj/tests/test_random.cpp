#include <gtest/gtest.h>

#include <set>

#include "chimera/errors.hpp"
#include "chimera/random.hpp"

using chimera::RandomSource;

TEST(RandomSource, SameSeedSameStream) {
    RandomSource a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(RandomSource, SaveRestoreContinuesBitExactly) {
    RandomSource a(7);
    for (int i = 0; i < 37; ++i) a.normal(0.0, 1.0);
    RandomSource b = RandomSource::restore(a.save());
    EXPECT_EQ(a, b);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(a.uniform_int(1, 7), b.uniform_int(1, 7));
        EXPECT_EQ(a.normal(1.0, 2.0), b.normal(1.0, 2.0));
        EXPECT_EQ(a.uniform01(), b.uniform01());
    }
}

TEST(RandomSource, RestoreRejectsGarbage) {
    EXPECT_THROW(RandomSource::restore("not a state"), chimera::CorruptSnapshot);
}

TEST(RandomSource, UniformIntIsInclusive) {
    RandomSource rng(3);
    std::set<int> seen;
    for (int i = 0; i < 2000; ++i) {
        const int v = rng.uniform_int(1, 7);
        ASSERT_GE(v, 1);
        ASSERT_LE(v, 7);
        seen.insert(v);
    }
    EXPECT_EQ(seen.size(), 7u);
}

TEST(RandomSource, SplitSeedsDiffer) {
    RandomSource rng(1);
    std::set<std::uint64_t> seeds;
    for (int i = 0; i < 1000; ++i) seeds.insert(rng.split());
    EXPECT_EQ(seeds.size(), 1000u);
}
