#include <doctest.h>

#include <cmath>
#include <random>

#include "pecap/channel.hpp"

using namespace pecap;
using doctest::Approx;

TEST_CASE("independent constructor") {
    auto a = make_spatially_independent({0.5, 0.5});
    for (mask_t S = 0; S < 4; ++S) CHECK(a.prob(S) == Approx(0.25));
    auto b = make_spatially_independent({0.3});
    CHECK(b.prob(1) == Approx(0.3));
    CHECK(b.prob(0) == Approx(0.7));
    auto c = make_spatially_independent({0.7, 0.5, 0.3});
    CHECK(c.prob(7) == Approx(0.105));
    CHECK_THROWS(make_spatially_independent({1.2}));
}

TEST_CASE("symmetric constructor") {
    auto s = make_symmetric(2, {0.25, 0.25, 0.25});
    auto i = make_spatially_independent({0.5, 0.5});
    for (mask_t S = 0; S < 4; ++S) CHECK(s.prob(S) == Approx(i.prob(S)));
    auto dead = make_symmetric(3, {1, 0, 0, 0});
    for (int k = 1; k <= 3; ++k) CHECK(dead.marginal(k) == 0);
    CHECK(s.is_symmetric());
    CHECK_FALSE(make_spatially_independent({0.2, 0.6}).is_symmetric());
    CHECK_THROWS(make_symmetric(2, {0.5, 0.5, 0.5}));
}

TEST_CASE("p_union and f_p") {
    auto a = make_spatially_independent({0.5, 0.5});
    CHECK(a.p_union(3) == Approx(0.75));
    CHECK(a.p_union(0) == 0);
    auto c = make_spatially_independent({0.7, 0.5, 0.3});
    CHECK(c.p_union(7) == Approx(0.895));
    CHECK(c.f_p(0, 0) == Approx(1.0));
    CHECK(c.f_p(bit(2), bit(3)) == Approx(0.35));
    CHECK_THROWS(c.f_p(bit(1), bit(1)));
}

TEST_CASE("channel properties on random tables") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        const int K = 1 + rng() % 5;
        std::vector<double> probs(1u << K);
        for (auto& x : probs) x = U(rng);
        auto spec = ChannelSpec::from_table(K, probs, true);
        const mask_t full = full_mask(K);
        for (int k = 1; k <= K; ++k) CHECK(spec.marginal(k) == Approx(spec.p_union(bit(k))));
        for (mask_t S = 0; S <= full; ++S) {
            CHECK(spec.f_p(S, full & ~S) == Approx(spec.prob(S)));
            for (mask_t S2 = S;; S2 = (S2 + 1) | S) {
                CHECK(spec.p_union(S) <= spec.p_union(S2) + 1e-12);
                if (S2 == full) break;
            }
            mask_t rest = full & ~S;
            for (mask_t T = rest;; T = (T - 1) & rest) {
                CHECK(spec.f_p(S, T) >= -1e-15);
                CHECK(spec.f_p(S, 0) >= spec.f_p(S, T) - 1e-12);
                for (int j = 1; j <= K; ++j) {
                    if ((S | T) & bit(j)) continue;
                    CHECK(spec.f_p(S, T) == Approx(spec.f_p(S, T | bit(j)) + spec.f_p(S | bit(j), T)));
                }
                if (T == 0) break;
            }
        }
    }
}

TEST_CASE("independent union is one minus product") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> p(4);
        for (auto& x : p) x = U(rng);
        auto s = make_spatially_independent(p);
        for (mask_t S = 0; S < 16; ++S) {
            double none = 1;
            for (int k = 0; k < 4; ++k)
                if (S >> k & 1) none *= 1 - p[k];
            CHECK(s.p_union(S) == Approx(1 - none));
        }
    }
}

TEST_CASE("sampling") {
    auto always = ChannelSpec::from_table(2, {0, 1, 0, 0});
    std::mt19937_64 r0(1);
    for (int i = 0; i < 100; ++i) CHECK(sample_reception(always, r0) == 1u);

    auto c = make_spatially_independent({0.7, 0.5, 0.3});
    std::mt19937_64 a(9), b(9);
    for (int i = 0; i < 100; ++i) CHECK(sample_reception(c, a) == sample_reception(c, b));

    const long N = 1000000;
    std::vector<long> cnt(8, 0);
    ReceptionSampler smp(c);
    std::mt19937_64 rng(42);
    for (long i = 0; i < N; ++i) ++cnt[smp(rng)];
    for (mask_t S = 0; S < 8; ++S) {
        double p = c.prob(S);
        double sd = std::sqrt(N * p * (1 - p));
        CHECK(std::abs(cnt[S] - N * p) <= 4 * sd);
    }
}

TEST_CASE("spec json round trip") {
    auto c = make_spatially_independent({0.7, 0.5, 0.3});
    auto back = spec_from_json(spec_to_json(c));
    CHECK(back.K() == 3);
    for (mask_t S = 0; S < 8; ++S) CHECK(back.prob(S) == c.prob(S));
    std::mt19937_64 rng(6);
    std::vector<double> t(16);
    for (auto& x : t) x = double(rng() % 1000) + 1;
    auto e = ChannelSpec::from_table(4, t, true);
    auto e2 = spec_from_json(spec_to_json(e));
    for (mask_t S = 0; S < 16; ++S) CHECK(e2.prob(S) == e.prob(S));
    auto s = make_symmetric(3, {0.1, 0.1, 0.1, 0.3});
    CHECK(spec_from_json(spec_to_json(s)).is_symmetric());
}

TEST_CASE("relabeling moves receivers") {
    auto c = make_spatially_independent({0.7, 0.5, 0.3});
    auto r = c.relabeled({3, 1, 2});
    CHECK(r.marginal(1) == Approx(0.3));
    CHECK(r.marginal(2) == Approx(0.7));
    CHECK(r.marginal(3) == Approx(0.5));
}
