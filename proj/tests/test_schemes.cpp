#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "pecap/bounds.hpp"
#include "pecap/schemes.hpp"

using namespace pecap;

namespace {

const mask_t b1 = bit(1), b2 = bit(2), b3 = bit(3);

ChannelSpec fig3() { return make_spatially_independent({0.7, 0.5, 0.3}); }

RateVector scaled(const ChannelSpec& spec, RateVector dir, double frac) {
    double t = outer_bound_max_t(spec, dir).t;
    for (auto& r : dir) r *= t * frac;
    return dir;
}

ChannelSpec random_spec(int K, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 0.95);
    if (rng() % 2) {
        std::vector<double> p(K);
        for (auto& x : p) x = u(rng);
        return make_spatially_independent(p);
    }
    std::vector<double> t(std::size_t(1) << K);
    for (auto& x : t) x = u(rng);
    return ChannelSpec::from_table(K, t, true);
}

std::map<std::string, long> phase_map(const SimulationResult& r) {
    std::map<std::string, long> m;
    for (auto& [name, len] : r.phases) m[name] += len;
    return m;
}

}  // namespace

TEST_CASE("dominance") {
    auto spec = fig3();
    CHECK(dominance_order({0.1, 0.1, 0.1}, spec).perm == std::vector<int>{3, 2, 1});
    auto rev = make_spatially_independent({0.3, 0.5, 0.7});
    CHECK(dominance_order({0.1, 0.1, 0.1}, rev).perm == std::vector<int>{1, 2, 3});
    CHECK(dominates(spec, {0.1, 0.1, 0.1}, 3, 1));
    CHECK_FALSE(dominates(spec, {0.1, 0.1, 0.1}, 1, 3));
    CHECK_THROWS(dominance_order({0.1, 0.1}, spec));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int i = 0; i < 500; ++i) {
        auto s = random_spec(3, rng);
        RateVector r{u(rng), u(rng), u(rng)};
        auto p = dominance_order(r, s).perm;
        CHECK(dominates(s, r, p[0], p[1]));
        CHECK(dominates(s, r, p[1], p[2]));
        CHECK(dominates(s, r, p[0], p[2]));
        // dominance is total
        for (int a = 1; a <= 3; ++a)
            for (int b = 1; b <= 3; ++b) CHECK((dominates(s, r, a, b) || dominates(s, r, b, a)));
    }
}

TEST_CASE("slot accounting") {
    auto spec = fig3();
    auto a = expected_slot_accounting({1, 0.1, 0.1}, spec);
    CHECK(a.A[0][b2 | b3] == doctest::Approx(0.103595).epsilon(1e-5));
    CHECK(a.A[0][0] == doctest::Approx(1 / spec.p_union(full_mask(3))));
    CHECK(a.A[0][b1] == 0.0);
    CHECK(a.total(1) == doctest::Approx(1 / 0.7).epsilon(1e-12));
    for (int k = 2; k <= 3; ++k) CHECK(a.total(k) == doctest::Approx(0.1 / spec.marginal(k)).epsilon(1e-12));

    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        int K = 2 + rng() % 4;
        auto s = random_spec(K, rng);
        RateVector r(K);
        for (auto& x : r) x = std::uniform_real_distribution<double>(0, 1)(rng);
        auto acc = expected_slot_accounting(r, s);
        for (int k = 1; k <= K; ++k) {
            CHECK(acc.total(k) == doctest::Approx(r[k - 1] / s.marginal(k)).epsilon(1e-9));
            for (double x : acc.A[k - 1]) CHECK(x >= 0.0);
        }
    }
}

TEST_CASE("three packing totals stay below one inside the region") {
    std::mt19937_64 rng(13);
    int tested = 0;
    for (int i = 0; i < 2000; ++i) {
        auto s = random_spec(3, rng);
        auto dir = sample_direction(3, rng);
        double frac = std::uniform_real_distribution<double>(0.05, 0.999)(rng);
        RateVector r = scaled(s, dir, frac);
        auto perm = dominance_order(r, s).perm;
        auto rs = s.relabeled(perm);
        RateVector rr{r[perm[0] - 1], r[perm[1] - 1], r[perm[2] - 1]};
        auto acc = expected_slot_accounting(rr, rs);
        auto A = [&](int k, mask_t S) { return acc.A[k - 1][S]; };
        double t1 = A(3, 0) + A(3, b1) + A(3, b2) + A(3, b1 | b2) + A(1, 0) + A(1, b2) + A(2, 0);
        double t2 = A(2, 0) + A(2, b1) + A(2, b3) + A(2, b1 | b3) + A(1, 0) + A(1, b3) + A(3, 0);
        double t3 = A(1, 0) + A(1, b2) + A(1, b3) + A(1, b2 | b3) + A(2, 0) + A(2, b3) + A(3, 0);
        CHECK(t1 < 1.0);
        CHECK(t2 < 1.0);
        CHECK(t3 < 1.0);
        // the dominance inequalities that make phase 3 well defined
        CHECK(A(2, b3) >= A(3, b2) - 1e-12);
        CHECK(A(1, b3) >= A(3, b1) - 1e-12);
        CHECK(A(1, b2) >= A(2, b1) - 1e-12);
        ++tested;
    }
    CHECK(tested == 2000);
}

TEST_CASE("two-phase baseline") {
    auto spec = make_spatially_independent({0.6, 0.4});
    RateVector r = scaled(spec, {0.6, 0.8}, 0.95);
    int ok = 0;
    for (int s = 0; s < 20; ++s) ok += two_phase_baseline(r, spec, 20000, s).success();
    CHECK(ok >= 19);

    auto z = two_phase_baseline({0, 0}, spec, 100, 1);
    CHECK(z.success());
    CHECK(z.slots_used == 0);
    CHECK_THROWS(two_phase_baseline({0.1}, spec, 100, 1));
}

TEST_CASE("two-phase falls short where packet evolution does not") {
    auto spec = make_spatially_independent({0.5, 0.5, 0.5});
    RateVector r = scaled(spec, {1, 1, 1}, 0.95);
    int tp = 0, pe = 0;
    for (int s = 0; s < 5; ++s) {
        tp += two_phase_baseline(r, spec, 20000, s).success();
        pe += four_phase_k3(r, spec, 20000, s).success();
    }
    CHECK(tp == 0);
    CHECK(pe == 5);
}

TEST_CASE("four-phase scheme") {
    auto spec = fig3();
    RateVector r = scaled(spec, {1, 1, 1}, 0.95);
    CHECK(r[0] == doctest::Approx(0.95 * 0.166970).epsilon(1e-5));
    int ok = 0;
    for (int s = 0; s < 10; ++s) {
        auto res = four_phase_k3(r, spec, 20000, s);
        ok += res.success();
        CHECK(res.lemma3_failures == 0);
    }
    CHECK(ok >= 9);

    CHECK_THROWS_AS(four_phase_k3(scaled(spec, {1, 1, 1}, 1.0), spec, 1000, 0), std::domain_error);
    CHECK_THROWS_AS(four_phase_k3({0.5, 0.5, 0.5}, spec, 1000, 0), std::domain_error);
    auto z = four_phase_k3({0, 0, 0}, spec, 1000, 0);
    CHECK(z.success());
}

TEST_CASE("four-phase phase lengths follow the accounting") {
    auto spec = fig3();
    RateVector r = scaled(spec, {1, 1, 1}, 0.9);
    auto perm = dominance_order(r, spec).perm;
    auto rs = spec.relabeled(perm);
    RateVector rr{r[perm[0] - 1], r[perm[1] - 1], r[perm[2] - 1]};
    auto acc = expected_slot_accounting(rr, rs);
    auto A = [&](int k, mask_t S) { return acc.A[k - 1][S]; };
    const long n = 100000;
    auto res = four_phase_k3(r, spec, n, 3);
    REQUIRE(res.success());
    auto ph = phase_map(res);
    std::map<std::string, double> expect{
        {"1.1", A(1, 0)},           {"1.2", A(2, 0)},           {"1.3", A(3, 0)},
        {"2.1", A(3, b2)},          {"2.2", A(3, b1)},          {"2.3", A(2, b1)},
        {"3.1", A(2, b3) - A(3, b2)}, {"3.2", A(1, b3) - A(3, b1)}, {"3.3", A(1, b2) - A(2, b1)},
        {"4", std::max({A(1, b2 | b3), A(2, b1 | b3), A(3, b1 | b2)})}};
    for (auto& [name, a] : expect) {
        INFO("phase " << name);
        CHECK(std::abs(ph[name] - n * a) <= 0.05 * n * a + 300);
    }
}

TEST_CASE("four-phase trace") {
    auto spec = make_spatially_independent({0.3, 0.5, 0.7});
    RateVector r = scaled(spec, {1, 1, 1}, 0.8);
    REQUIRE(dominance_order(r, spec).perm == std::vector<int>{1, 2, 3});
    PeOptions o;
    o.trace = true;
    auto res = four_phase_k3(r, spec, 20000, 4, o);
    REQUIRE(res.success());
    REQUIRE(res.trace.size() == static_cast<std::size_t>(res.slots_used));

    std::vector<std::vector<long>> logical(3, std::vector<long>(8, 0));
    for (auto& rec : res.trace) {
        std::size_t i = 0;
        for (int k = 1; k <= 3; ++k) {
            if (!(rec.T & bit(k))) continue;
            mask_t S = rec.before[i++];
            if (S == ~0u) continue;
            CHECK(((S | bit(k)) & rec.T) == rec.T);
            CHECK((S & bit(k)) == 0);
            ++logical[k - 1][S];
        }
        CHECK(i == rec.before.size());
    }
    CHECK(logical == res.logical);

    // phase 2.1 never runs short of session-2 packets
    long start = 0, dummies = 0, len = 0;
    for (auto& [name, l] : res.phases) {
        if (name == "2.1") {
            len = l;
            for (long t = start; t < start + l; ++t) dummies += res.trace[t].before[0] == ~0u;
            break;
        }
        start += l;
    }
    CHECK(len > 0);
    CHECK(dummies == 0);
}

TEST_CASE("sequential PE") {
    auto spec = make_spatially_independent({0.3, 0.5, 0.7});
    RateVector r = scaled(spec, {1, 1, 1}, 0.95);
    REQUIRE(is_one_sidedly_fair({0.3, 0.5, 0.7}, r));
    auto ord = cardinality_ordering(3);
    auto sched = closed_form_w_schedule(r, spec, ord);
    int ok = 0, ok4 = 0;
    for (int s = 0; s < 10; ++s) {
        ok += sequential_pe(r, spec, sched, 20000, s).success();
        ok4 += four_phase_k3(r, spec, 20000, s).success();
    }
    CHECK(ok >= 9);
    CHECK(ok4 >= 9);

    auto z = sequential_pe({0, 0, 0}, spec, sched, 100, 0);
    CHECK(z.success());
    CHECK_THROWS(sequential_pe({0.1, 0.1}, spec, sched, 100, 0));
}

TEST_CASE("sequential PE with LP schedule, K=4") {
    auto spec = make_spatially_independent({0.8, 0.6, 0.5, 0.4});
    auto ord = cardinality_ordering(4);
    RateVector dir{1, 1, 1, 1};
    RateVector r = scaled(spec, dir, 0.9);
    auto sched = schedule_from_lp(r, spec, ord);
    int ok = 0;
    for (int s = 0; s < 10; ++s) {
        auto res = sequential_pe(r, spec, sched, 50000, s);
        ok += res.success();
        // phases appear in ordering order, each at most once
        std::vector<std::size_t> pos;
        for (auto& [name, len] : res.phases) {
            auto it = std::find_if(ord.seq.begin(), ord.seq.end(),
                                   [&](mask_t T) { return mask_to_string(T, 4) == name; });
            REQUIRE(it != ord.seq.end());
            pos.push_back(it - ord.seq.begin());
        }
        CHECK(std::is_sorted(pos.begin(), pos.end()));
        CHECK(std::adjacent_find(pos.begin(), pos.end()) == pos.end());
    }
    CHECK(ok >= 9);
}

TEST_CASE("four-phase shortfall names the caller's session") {
    auto spec = fig3();
    RateVector r = scaled(spec, {1, 1, 1}, 0.95);
    bool seen = false;
    for (int s = 0; s < 40 && !seen; ++s) {
        auto res = four_phase_k3(r, spec, 2000, s);
        if (res.shortfall.empty()) continue;
        seen = true;
        for (int k = 1; k <= 3; ++k)
            if (res.shortfall.find("session " + std::to_string(k)) != std::string::npos) CHECK_FALSE(res.decoded[k - 1]);
    }
    CHECK(seen);
}
