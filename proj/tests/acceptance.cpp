// one PASS/FAIL line per acceptance criterion; exit status 1 if any fails
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "pecap/bounds.hpp"
#include "pecap/schemes.hpp"

using namespace pecap;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x, int prec = 6) {
    std::ostringstream o;
    o.precision(prec);
    o << x;
    return o.str();
}

double U(std::mt19937_64& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

std::vector<double> marginals(int K, std::mt19937_64& rng) {
    std::vector<double> p(K);
    for (auto& x : p) x = U(rng, 0.05, 0.95);
    return p;
}

// two-user region, written out by hand
double k2_closed_form(const std::vector<double>& p, const std::vector<double>& d) {
    double pu = 1 - (1 - p[0]) * (1 - p[1]);
    return std::min(1 / (d[0] / p[0] + d[1] / pu), 1 / (d[1] / p[1] + d[0] / pu));
}

Outcome c1() {
    std::mt19937_64 rng(101);
    double worst = 0;
    auto ord = cardinality_ordering(2);
    for (int s = 0; s < 200; ++s) {
        auto p = marginals(2, rng);
        auto spec = make_spatially_independent(p);
        for (int d = 0; d < 50; ++d) {
            auto dir = sample_direction(2, rng);
            double cf = k2_closed_form(p, dir);
            auto in = inner_bound_max_t(spec, dir, ord);
            double err = in.status == lp::Status::optimal ? std::abs(in.t - cf) / cf : 1.0;
            worst = std::max(worst, err);
        }
    }
    return {worst <= 1e-6, "max rel err " + fmt(worst)};
}

// independent channels, marginals i.i.d. uniform on (0,1)
Outcome deficiency_sweep(int K, int specs, int dirs, uint64_t seed, double tol, int& fails) {
    std::mt19937_64 rng(seed);
    double worst = 0;
    auto ord = cardinality_ordering(K);
    for (int s = 0; s < specs; ++s) {
        std::vector<double> p(K);
        for (auto& x : p) x = U(rng, 1e-9, 1);
        auto spec = make_spatially_independent(p);
        for (int d = 0; d < dirs; ++d) {
            auto dir = sample_direction(K, rng);
            auto r = deficiency(spec, dir, ord);
            if (r.status != lp::Status::optimal) {
                ++fails;
                continue;
            }
            worst = std::max(worst, r.defi);
        }
    }
    return {worst <= tol && fails == 0, "K=" + std::to_string(K) + " max defi " + fmt(worst)};
}

Outcome c2() {
    int fails = 0;
    auto o = deficiency_sweep(3, 1000, 1, 202, 1e-6, fails);
    o.detail += ", LP failures " + std::to_string(fails);
    return o;
}

Outcome c3() {
    Outcome all{true, ""};
    int fails = 0;
    for (int K = 4; K <= 6; ++K) {
        auto o = deficiency_sweep(K, 100, 10, 300 + K, 1e-3, fails);
        all.pass = all.pass && o.pass;
        all.detail += (all.detail.empty() ? "" : "; ") + o.detail;
    }
    all.detail += "; LP failures " + std::to_string(fails);
    return all;
}

Outcome c4() {
    std::mt19937_64 rng(404);
    double worst_io = 0, worst_cf = 0;
    for (int s = 0; s < 100; ++s) {
        int K = 2 + s % 5;
        // random masses per cardinality, normalised
        std::vector<double> m(K + 1);
        double tot = 0;
        for (int c = 0; c <= K; ++c) {
            m[c] = U(rng, 0, 1);
            tot += std::tgamma(K + 1) / (std::tgamma(c + 1) * std::tgamma(K - c + 1)) * m[c];
        }
        for (auto& x : m) x /= tot;
        auto spec = make_symmetric(K, m);
        auto dir = sample_direction(K, rng);
        double to = outer_bound_max_t(spec, dir).t;
        auto in = inner_bound_max_t(spec, dir, cardinality_ordering(K));
        double cf = 1 / symmetric_load(spec, dir);
        worst_io = std::max(worst_io, in.status == lp::Status::optimal ? std::abs(in.t - to) / to : 1.0);
        worst_cf = std::max(worst_cf, std::abs(cf - to) / to);
    }
    return {worst_io <= 1e-6 && worst_cf <= 1e-12,
            "inner/outer " + fmt(worst_io) + ", outer/closed form " + fmt(worst_cf)};
}

RateVector osf_point(const std::vector<double>& p, std::mt19937_64& rng) {
    int K = static_cast<int>(p.size());
    std::vector<double> c(K);
    for (auto& x : c) x = U(rng, 0.05, 1);
    std::sort(c.begin(), c.end(), std::greater<>());
    RateVector r(K);
    for (int k = 0; k < K; ++k) r[k] = c[k] / (1 - p[k]);
    double load = osf_load(p, r);
    for (auto& x : r) x /= load;
    return r;
}

std::vector<double> ascending(int K, std::mt19937_64& rng) {
    auto p = marginals(K, rng);
    std::sort(p.begin(), p.end());
    return p;
}

Outcome c5() {
    std::mt19937_64 rng(505);
    int bad = 0;
    for (int s = 0; s < 100; ++s) {
        int K = 2 + s % 4;
        auto p = ascending(K, rng);
        auto r = osf_point(p, rng);
        auto spec = make_spatially_independent(p);
        auto ord = cardinality_ordering(K);
        RateVector lo = r, hi = r;
        for (auto& x : lo) x *= 1 - 1e-6;
        for (auto& x : hi) x *= 1 + 1e-3;
        bool acc = inner_bound_feasible(spec, lo, ord).status == InnerStatus::feasible;
        bool rej = inner_bound_feasible(spec, hi, ord).status == InnerStatus::infeasible;
        bad += !(acc && rej);
    }
    return {bad == 0, std::to_string(bad) + " of 100 cases wrong"};
}

Outcome c6() {
    const int K = 6;
    std::vector<double> pv;
    for (int k = 0; k < K; ++k) pv.push_back(k / double(K - 1));
    auto spec = make_spatially_independent(pv);
    double sum = 0;
    for (double x : pv) sum += x;
    double to = outer_bound_max_t(spec, pv).t * sum;
    auto in = inner_bound_max_t(spec, pv, cardinality_ordering(K));
    double ti = in.t * sum;
    double sym = sum_rate_perf_fair(std::vector<double>(K, 0.5));
    bool ok = std::abs(to - 0.56) <= 0.01 && std::abs(ti - to) <= 1e-6 && std::abs(sym - 0.79) <= 0.01;
    return {ok, "proportional fair " + fmt(to, 4) + " (inner " + fmt(ti, 4) + "), symmetric " + fmt(sym, 4)};
}

RateVector fair_point(const ChannelSpec& spec, double frac) {
    double t = outer_bound_max_t(spec, {1, 1, 1}).t;
    return RateVector(3, t * frac);
}

Outcome c7() {
    auto spec = make_spatially_independent({0.7, 0.5, 0.3});
    double t = outer_bound_max_t(spec, {1, 1, 1}).t;
    auto r = fair_point(spec, 0.95);
    int ok = 0;
    for (int s = 0; s < 100; ++s) ok += four_phase_k3(r, spec, 20000, 7000 + s).success();
    return {ok >= 95 && std::abs(t - 0.16697) < 1e-5,
            "boundary " + fmt(t) + ", decoded " + std::to_string(ok) + "/100"};
}

struct LemmaTally {
    long l3 = 0, l4 = 0, runs = 0, slots = 0;
};

LemmaTally micro_runs(int runs, const PeOptions& o, uint64_t seed) {
    std::mt19937_64 rng(seed);
    LemmaTally t;
    for (int i = 0; i < runs; ++i) {
        auto spec = make_spatially_independent(marginals(3, rng));
        auto dir = sample_direction(3, rng);
        double tmax = outer_bound_max_t(spec, dir).t;
        RateVector r(3);
        for (int k = 0; k < 3; ++k) r[k] = dir[k] * tmax * U(rng, 0.5, 0.99);
        long n = 5 + rng() % 16;
        auto c = packet_counts(n, r);
        if (std::find(c.begin(), c.end(), 0) != c.end()) {
            --i;
            continue;
        }
        auto res = four_phase_k3(r, spec, n, rng(), o);
        t.l3 += res.lemma3_failures;
        t.l4 += res.lemma4_failures;
        t.slots += res.slots_used;
        ++t.runs;
    }
    return t;
}

Outcome c8() {
    PeOptions o;
    o.check_lemmas = true;
    auto t = micro_runs(1000, o, 808);
    return {t.l3 == 0 && t.l4 <= 3, "lemma3 failures " + std::to_string(t.l3) + ", lemma4 failures " +
                                         std::to_string(t.l4) + " over " + std::to_string(t.runs) + " runs, " +
                                         std::to_string(t.slots) + " slots"};
}

Outcome c9() {
    const mask_t b1 = bit(1), b2 = bit(2), b3 = bit(3);
    struct Slot {
        mask_t T;
        std::vector<int> tg;
        std::vector<elem> c;
        mask_t rx;
        std::vector<std::pair<CodingVector, mask_t>> table;
    };
    const std::vector<Slot> slots = {
        {b1, {0}, {1}, b2, {{{1, 0, 0}, b2}, {{0, 1, 0}, 0}, {{0, 0, 1}, 0}}},
        {b2, {1}, {1}, b1, {{{1, 0, 0}, b2}, {{0, 1, 0}, b1}, {{0, 0, 1}, 0}}},
        {b3, {2}, {1}, b1 | b2, {{{1, 0, 0}, b2}, {{0, 1, 0}, b1}, {{0, 0, 1}, b1 | b2}}},
        {b1 | b2, {0, 1}, {1, 1}, b3, {{{1, 1, 0}, b2 | b3}, {{1, 1, 0}, b1 | b3}, {{0, 0, 1}, b1 | b2}}},
        {b1 | b2 | b3, {0, 1, 2}, {1, 0, 1}, b1 | b2 | b3,
         {{{1, 1, 1}, b1 | b2 | b3}, {{1, 1, 1}, b1 | b2 | b3}, {{1, 1, 1}, b1 | b2 | b3}}},
    };
    PeRun run(make_spatially_independent({0.7, 0.5, 0.3}), {1, 1, 1}, {}, 0);
    int mism = 0;
    for (const auto& s : slots) {
        run.select(s.T, s.tg, s.c);
        run.step(s.rx);
        for (int i = 0; i < 3; ++i) {
            const auto& pk = run.source().packets[i];
            mism += to_dense(pk.vec, 3) != s.table[i].first || pk.overhearing != s.table[i].second;
        }
    }
    auto r = run.finish(5);
    return {mism == 0 && r.success(), std::to_string(mism) + " table entries differ, decoded " +
                                          (r.all_decoded() ? "all" : "not all")};
}

Outcome c10() {
    std::mt19937_64 rng(1010);
    double worst_z = 0, worst_sum = 0;
    for (int i = 0; i < 50; ++i) {
        int K = 2 + i % 4;
        auto p = marginals(K, rng);
        mask_t S = static_cast<mask_t>(rng() % ((1u << K) - 1));
        auto g = gamma_oracle(p, S, 1000000, rng);
        double L = L_S(p, S);
        worst_z = std::max(worst_z, std::abs(g.mean - L) / std::max(g.std_error, 1e-300));
        double sum = 0;
        for (mask_t s2 = S;; s2 = (s2 - 1) & S) {
            sum += L_S(p, s2);
            if (s2 == 0) break;
        }
        double none = 1;
        for (int k = 0; k < K; ++k)
            if (!(S & bit(k + 1))) none *= 1 - p[k];
        worst_sum = std::max(worst_sum, std::abs(sum - 1 / (1 - none)));
    }
    long monotone_bad = 0, comparisons = 0;
    for (int i = 0; i < 10000; ++i) {
        int K = 2 + i % 5;
        auto p = ascending(K, rng);
        auto r = osf_point(p, rng);
        for (mask_t T = 1; T < (1u << K); ++T)
            for (int k1 = 1; k1 <= K; ++k1)
                for (int k2 = k1 + 1; k2 <= K; ++k2) {
                    if (!(T & bit(k1)) || !(T & bit(k2))) continue;
                    double a = r[k1 - 1] * L_S(p, T & ~bit(k1)), b = r[k2 - 1] * L_S(p, T & ~bit(k2));
                    monotone_bad += a < b - 1e-12 * std::max(1.0, b);
                    ++comparisons;
                }
    }
    bool ok = worst_z <= 4 && worst_sum <= 1e-10 && monotone_bad == 0;
    return {ok, "max |z| " + fmt(worst_z, 3) + ", subset-sum err " + fmt(worst_sum, 3) + ", monotonicity violations " +
                    std::to_string(monotone_bad) + "/" + std::to_string(comparisons)};
}

Outcome c11() {
    auto spec = make_spatially_independent({0.7, 0.5, 0.3});
    auto r = fair_point(spec, 0.9);
    const long n = 100000;
    const int seeds = 100;
    std::vector<std::vector<std::vector<double>>> obs(3, std::vector<std::vector<double>>(8));
    std::vector<int> counts;
    for (int s = 0; s < seeds; ++s) {
        auto res = four_phase_k3(r, spec, n, 110000 + s);
        counts = res.counts;
        for (int k = 0; k < 3; ++k)
            for (mask_t S = 0; S < 8; ++S) obs[k][S].push_back(double(res.logical[k][S]));
    }
    double worst = 0;
    int cells = 0;
    for (int k = 1; k <= 3; ++k)
        for (mask_t S = 0; S < 8; ++S) {
            if (S & bit(k)) continue;
            // expected per packet is L_S; the realised packet count is floor(nR_k)
            double expect = counts[k - 1] * L_S(spec, S);
            const auto& v = obs[k - 1][S];
            double mean = 0, var = 0;
            for (double x : v) mean += x;
            mean /= v.size();
            for (double x : v) var += (x - mean) * (x - mean);
            double se = std::sqrt(var / (v.size() - 1) / v.size());
            worst = std::max(worst, std::abs(mean - expect) / se);
            ++cells;
        }
    return {worst <= 3, std::to_string(cells) + " cells over " + std::to_string(seeds) + " runs, max |z| " +
                            fmt(worst, 3)};
}

Outcome c12() {
    PeOptions o;
    o.check_lemmas = true;
    o.q = 256;
    o.coeffs = CoeffMode::deterministic;
    auto t = micro_runs(100, o, 1212);
    return {t.l4 == 0 && t.l3 == 0, "lemma4 failures " + std::to_string(t.l4) + ", lemma3 failures " +
                                        std::to_string(t.l3) + " over " + std::to_string(t.runs) + " runs, " +
                                        std::to_string(t.slots) + " slots"};
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;   // 0: no runtime bound
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::vector<int> only;
    app.add_option("--only", only, "run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all = {
        {1, "K=2 LP equals closed form", 60, c1},
        {2, "K=3 deficiency", 120, c2},
        {3, "K=4..6 deficiency", 1800, c3},
        {4, "symmetric capacity", 0, c4},
        {5, "one-sided fair capacity", 0, c5},
        {6, "K=6 sum rates", 0, c6},
        {7, "four-phase achievability", 600, c7},
        {8, "span invariants on micro-runs", 0, c8},
        {9, "worked example replay", 0, c9},
        {10, "L_S oracle and identities", 0, c10},
        {11, "slot accounting", 0, c11},
        {12, "deterministic coefficients, q=256", 0, c12},
    };
    int failed = 0;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool in_time = c.limit_s == 0 || secs <= c.limit_s;
        bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("%s %2d %s: %s [%.1fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                    in_time ? "" : ", over time limit");
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
