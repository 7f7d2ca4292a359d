#include "pecap/schemes.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace pecap {

namespace {

double cross_term(const ChannelSpec& spec, int k) {
    const mask_t full = full_mask(3);
    return 1.0 / spec.p_union(full & ~bit(k)) - 1.0 / spec.p_union(full);
}

SimulationResult trivial_result(long n, uint64_t seed, const std::vector<int>& counts) {
    SimulationResult r;
    r.n = n;
    r.seed = seed;
    r.counts = counts;
    r.decoded.assign(counts.size(), true);
    r.delivered = true;
    r.logical.assign(counts.size(), std::vector<long>(std::size_t(1) << counts.size(), 0));
    return r;
}

bool all_zero(const std::vector<int>& c) {
    return std::all_of(c.begin(), c.end(), [](int x) { return x == 0; });
}

void require_positive_marginals(const ChannelSpec& spec) {
    for (int k = 1; k <= spec.K(); ++k)
        if (!(spec.marginal(k) > 0)) throw std::invalid_argument("every marginal must be > 0");
}

// FIFO queues Q[k][S] of packet ids on top of a PeRun
class Queues {
public:
    Queues(PeRun& run, long n) : run_(run), n_(n), K_(run.source().K) {
        q_.assign(K_, std::vector<std::deque<int>>(std::size_t(1) << K_));
        for (int k = 1; k <= K_; ++k)
            for (int j = 0; j < run.source().counts[k - 1]; ++j) q_[k - 1][0].push_back(run.source().id(k, j));
    }

    std::deque<int>& at(int k, mask_t S) { return q_[k - 1][S]; }
    bool empty(int k, mask_t S) const { return q_[k - 1][S].empty(); }
    int head(int k, mask_t S) const { return q_[k - 1][S].empty() ? -1 : q_[k - 1][S].front(); }
    bool out_of_slots() const { return run_.slot() >= n_; }

    // one phase with fixed T; pick(k) returns the target of session k or -1
    void phase(const std::string& name, mask_t T, const std::function<int(int)>& pick,
               const std::function<bool()>& stop) {
        run_.begin_phase(name);
        std::vector<int> ks;
        for (int k = 1; k <= K_; ++k)
            if (T & bit(k)) ks.push_back(k);
        std::vector<int> prev, targets(ks.size());
        std::vector<mask_t> before(ks.size());
        while (!out_of_slots() && !stop()) {
            bool any = false;
            for (std::size_t i = 0; i < ks.size(); ++i) {
                targets[i] = pick(ks[i]);
                any = any || targets[i] >= 0;
            }
            if (!any) break;
            if (targets != prev) run_.select(T, targets);
            for (std::size_t i = 0; i < ks.size(); ++i)
                if (targets[i] >= 0) before[i] = run_.source().packets[targets[i]].overhearing;
            run_.step();
            for (std::size_t i = 0; i < ks.size(); ++i) {
                if (targets[i] < 0) continue;
                mask_t S = run_.source().packets[targets[i]].overhearing;
                if (S == before[i]) continue;
                auto& from = at(ks[i], before[i]);
                if (from.empty() || from.front() != targets[i]) throw std::logic_error("queue head mismatch");
                from.pop_front();
                if (!(S & bit(ks[i]))) at(ks[i], S).push_back(targets[i]);
            }
            prev = targets;
        }
    }

    // first non-empty queue as (k,S), or k=0
    std::pair<int, mask_t> leftover() const {
        for (int k = 1; k <= K_; ++k)
            for (mask_t S = 0; S < q_[k - 1].size(); ++S)
                if (!q_[k - 1][S].empty()) return {k, S};
        return {0, 0};
    }

private:
    PeRun& run_;
    long n_;
    int K_;
    std::vector<std::vector<std::deque<int>>> q_;
};

void sweep(Queues& Q) {
    while (!Q.out_of_slots()) {
        auto [k, S] = Q.leftover();
        if (k == 0) return;
        Q.phase("sweep", S | bit(k), [&Q, k, S](int kk) { return kk == k ? Q.head(k, S) : -1; },
                [&Q, k, S] { return Q.empty(k, S); });
    }
}

mask_t map_mask(mask_t S, const std::vector<int>& perm) {
    mask_t out = 0;
    for (std::size_t i = 0; i < perm.size(); ++i)
        if (S & bit(static_cast<int>(i) + 1)) out |= bit(perm[i]);
    return out;
}

// perm maps internal labels back to the caller's, when they differ
std::string leftover_message(Queues& Q, int K, const std::string& what, const std::vector<int>& perm = {}) {
    auto [k, S] = Q.leftover();
    if (k == 0) return {};
    std::size_t left = Q.at(k, S).size();
    if (!perm.empty()) {
        S = map_mask(S, perm);
        k = perm[k - 1];
    }
    return what + ": session " + std::to_string(k) + " has " + std::to_string(left) +
           " packets left with S=" + mask_to_string(S, K);
}

}  // namespace

// ---------------------------------------------------------------- dominance

bool dominates(const ChannelSpec& spec, const RateVector& rates, int i, int k, double tol) {
    if (spec.K() != 3) throw std::invalid_argument("dominance is defined for K=3");
    return rates[i - 1] * cross_term(spec, k) >= rates[k - 1] * cross_term(spec, i) - tol;
}

DominanceOrder dominance_order(const RateVector& rates, const ChannelSpec& spec) {
    if (spec.K() != 3) throw std::invalid_argument("dominance order: K must be 3");
    if ((int)rates.size() != 3) throw std::invalid_argument("dominance order: need 3 rates");
    require_positive_marginals(spec);
    std::vector<int> p{1, 2, 3};
    do {
        if (dominates(spec, rates, p[0], p[1]) && dominates(spec, rates, p[1], p[2]) &&
            dominates(spec, rates, p[0], p[2]))
            return {p};
    } while (std::next_permutation(p.begin(), p.end()));
    throw std::logic_error("dominance order: no consistent order (transitivity violated)");
}

// ---------------------------------------------------------------- accounting

double SlotAccounting::total(int k) const { return std::accumulate(A[k - 1].begin(), A[k - 1].end(), 0.0); }

SlotAccounting expected_slot_accounting(const RateVector& rates, const ChannelSpec& spec) {
    const int K = spec.K();
    if ((int)rates.size() != K) throw std::invalid_argument("slot accounting: wrong rate length");
    require_positive_marginals(spec);
    SlotAccounting a;
    a.K = K;
    a.A.assign(K, std::vector<double>(std::size_t(1) << K, 0.0));
    const mask_t full = full_mask(K);
    for (int k = 1; k <= K; ++k) {
        mask_t rest = full & ~bit(k);
        for (mask_t S = rest;; S = (S - 1) & rest) {
            a.A[k - 1][S] = rates[k - 1] * L_S(spec, S);
            if (S == 0) break;
        }
    }
    return a;
}

// ---------------------------------------------------------------- 2-phase

SimulationResult two_phase_baseline(const RateVector& rates, const ChannelSpec& spec, long n, uint64_t seed,
                                    uint32_t q) {
    const int K = spec.K();
    if (K < 2) throw std::invalid_argument("two-phase: K must be >= 2");
    if ((int)rates.size() != K) throw std::invalid_argument("two-phase: wrong rate length");
    std::vector<int> counts = packet_counts(n, rates);
    if (all_zero(counts)) return trivial_result(n, seed, counts);

    Field F(q);
    PeInit init = init_state(F, counts);
    SourceState& s = init.source;
    auto& rx = init.receivers;
    ReceptionSampler sampler(spec);
    std::seed_seq a{seed, uint64_t(0x5e55)}, b{seed, uint64_t(0xc0ef)};
    std::mt19937_64 chan(a), coef(b);
    std::uniform_int_distribution<uint32_t> nz(1, q - 1);

    SimulationResult res;
    res.n = n;
    res.seed = seed;
    res.counts = counts;
    res.logical.assign(K, std::vector<long>(std::size_t(1) << K, 0));
    long t = 0;
    auto send = [&](const SparseVec& v) {
        mask_t S_rx = sampler(chan);
        for (auto& r : rx) receiver_observe(r, v, (S_rx & bit(r.k)) != 0);
        ++t;
        return S_rx;
    };

    // pairs[i][j]: packets of session i whose lowest-index overhearer is j
    std::vector<std::vector<std::deque<int>>> pairs(K + 1, std::vector<std::deque<int>>(K + 1));
    for (int k = 1; k <= K; ++k)
        for (int j = 0; j < counts[k - 1] && t < n; ++j) {
            int id = s.id(k, j);
            mask_t S_rx = 0;
            while (S_rx == 0 && t < n) S_rx = send(s.packets[id].vec);
            if (S_rx == 0) break;
            s.packets[id].overhearing = S_rx;
            if (!(S_rx & bit(k))) pairs[k][__builtin_ctz(S_rx) + 1].push_back(id);
        }
    res.phases.emplace_back("1", t);
    long p1 = t;

    for (int i = 1; i <= K && t < n; ++i)
        for (int j = i + 1; j <= K && t < n; ++j) {
            auto& A = pairs[i][j];
            auto& B = pairs[j][i];
            while ((!A.empty() || !B.empty()) && t < n) {
                SparseVec v;
                if (!A.empty() && !B.empty())
                    v = sparse_combine(F, nz(coef), s.packets[A.front()].vec, nz(coef), s.packets[B.front()].vec);
                else
                    v = s.packets[A.empty() ? B.front() : A.front()].vec;
                mask_t S_rx = send(v);
                if (!A.empty() && (S_rx & bit(i))) {
                    s.packets[A.front()].overhearing |= bit(i);
                    A.pop_front();
                }
                if (!B.empty() && (S_rx & bit(j))) {
                    s.packets[B.front()].overhearing |= bit(j);
                    B.pop_front();
                }
            }
        }
    res.phases.emplace_back("2", t - p1);

    res.slots_used = t;
    res.delivered = std::all_of(s.packets.begin(), s.packets.end(),
                                [](const PacketState& p) { return (p.overhearing & bit(p.owner)) != 0; });
    for (auto& r : rx) res.decoded.push_back(decode_all(r));
    if (!res.delivered) res.shortfall = "slot budget of " + std::to_string(n) + " exhausted";
    return res;
}

// ---------------------------------------------------------------- 4-phase, K=3

SimulationResult four_phase_k3(const RateVector& rates, const ChannelSpec& spec, long n, uint64_t seed,
                               const PeOptions& opt) {
    if (spec.K() != 3 || rates.size() != 3) throw std::invalid_argument("four-phase scheme needs K=3");
    require_positive_marginals(spec);
    if (outer_bound_load(spec, rates) >= 1.0)
        throw std::domain_error("four-phase: rates are not strictly inside the capacity region");

    const std::vector<int> perm = dominance_order(rates, spec).perm;
    const ChannelSpec rs = spec.relabeled(perm);
    RateVector rr(3);
    for (int i = 0; i < 3; ++i) rr[i] = rates[perm[i] - 1];
    std::vector<int> counts = packet_counts(n, rr);
    if (all_zero(counts)) return trivial_result(n, seed, packet_counts(n, rates));

    PeRun run(rs, counts, opt, seed);
    Queues Q(run, n);
    const mask_t b1 = bit(1), b2 = bit(2), b3 = bit(3);

    auto head = [&](int k, mask_t S) { return Q.head(k, S); };
    for (int k = 1; k <= 3; ++k)
        Q.phase("1." + std::to_string(k), bit(k), [&](int) { return head(k, 0); }, [&] { return Q.empty(k, 0); });

    Q.phase("2.1", b2 | b3, [&](int k) { return k == 2 ? head(2, b3) : head(3, b2); },
            [&] { return Q.empty(3, b2); });
    Q.phase("2.2", b1 | b3, [&](int k) { return k == 1 ? head(1, b3) : head(3, b1); },
            [&] { return Q.empty(3, b1); });
    Q.phase("2.3", b1 | b2, [&](int k) { return k == 1 ? head(1, b2) : head(2, b1); },
            [&] { return Q.empty(2, b1); });

    Q.phase("3.1", b2 | b3, [&](int k) { return k == 2 ? head(2, b3) : head(3, b1 | b2); },
            [&] { return Q.empty(2, b3); });
    Q.phase("3.2", b1 | b3, [&](int k) { return k == 1 ? head(1, b3) : head(3, b1 | b2); },
            [&] { return Q.empty(1, b3); });
    Q.phase("3.3", b1 | b2, [&](int k) { return k == 1 ? head(1, b2) : head(2, b1 | b3); },
            [&] { return Q.empty(1, b2); });

    Q.phase("4", b1 | b2 | b3,
            [&](int k) { return head(k, full_mask(3) & ~bit(k)); },
            [] { return false; });
    sweep(Q);

    SimulationResult r = run.finish(n, Q.out_of_slots() ? leftover_message(Q, 3, "slot budget exhausted", perm) : "");

    // back to the caller's labels
    SimulationResult out = r;
    for (int i = 0; i < 3; ++i) {
        out.counts[perm[i] - 1] = r.counts[i];
        out.decoded[perm[i] - 1] = r.decoded[i];
        for (mask_t S = 0; S < 8; ++S) out.logical[perm[i] - 1][map_mask(S, perm)] = r.logical[i][S];
    }
    for (auto& rec : out.trace) {
        // before[] follows ascending members of T; reorder for the caller's labels
        std::vector<std::pair<int, mask_t>> tagged;
        std::size_t idx = 0;
        for (int i = 1; i <= 3; ++i) {
            if (!(rec.T & bit(i))) continue;
            mask_t b = rec.before[idx++];
            tagged.emplace_back(perm[i - 1], b == ~0u ? b : map_mask(b, perm));
        }
        std::sort(tagged.begin(), tagged.end());
        rec.before.clear();
        for (auto& tb : tagged) rec.before.push_back(tb.second);
        rec.T = map_mask(rec.T, perm);
        rec.S_rx = map_mask(rec.S_rx, perm);
    }
    return out;
}

// ---------------------------------------------------------------- sequential PE

SimulationResult sequential_pe(const RateVector& rates, const ChannelSpec& spec, const ScheduleW& schedule,
                               long n, uint64_t seed, const PeOptions& opt) {
    const int K = spec.K();
    if ((int)rates.size() != K) throw std::invalid_argument("sequential PE: wrong rate length");
    if (schedule.vars.K != K || schedule.ordering.K != K)
        throw std::invalid_argument("sequential PE: schedule is for a different K");
    std::vector<int> counts = packet_counts(n, rates);
    if (all_zero(counts)) return trivial_result(n, seed, counts);

    const WLayout L(K);
    const SubsetOrdering& ord = schedule.ordering;
    const mask_t full = full_mask(K);
    PeRun run(spec, counts, opt, seed);
    Queues Q(run, n);

    for (mask_t T : ord.seq) {
        if (T == 0 || Q.out_of_slots()) continue;
        // per member: the states it walks, their budgets and how far it got;
        // state T\k has no later phase, so it is drained whatever its budget
        struct Walk {
            std::vector<mask_t> states;
            std::vector<double> budget;
            std::size_t idx = 0;
            long used = 0;
        };
        std::vector<Walk> walk(K + 1);
        bool work = false;
        for (int k = 1; k <= K; ++k) {
            if (!(T & bit(k))) continue;
            mask_t base = T & ~bit(k), freeb = full & ~bit(k) & ~base;
            for (mask_t e = freeb;; e = (e - 1) & freeb) {
                walk[k].states.push_back(base | e);
                if (e == 0) break;
            }
            std::sort(walk[k].states.begin(), walk[k].states.end(),
                      [&](mask_t a, mask_t b) { return ord.before(a, b); });
            for (mask_t S : walk[k].states) {
                double b = n * schedule.vars.w[L.index(k, S, base)];
                walk[k].budget.push_back(b);
                work = work || ((b >= 1 || S == base) && !Q.empty(k, S));
            }
        }
        if (!work) continue;
        // once its own walk is done, a member rides along on leftovers while others still work
        auto walking = [&](int k) { return walk[k].idx < walk[k].states.size(); };
        auto pick = [&](int k) {
            Walk& w = walk[k];
            while (walking(k)) {
                mask_t S = w.states[w.idx];
                bool last_chance = S == (T & ~bit(k));
                if (Q.empty(k, S) || (!last_chance && w.budget[w.idx] - w.used < 1)) {
                    ++w.idx;
                    w.used = 0;
                    continue;
                }
                ++w.used;
                return Q.head(k, S);
            }
            bool others = false;
            for (int j = 1; j <= K; ++j) others = others || (j != k && (T & bit(j)) && walking(j));
            if (!others) return -1;
            for (mask_t S : w.states)
                if (!Q.empty(k, S)) return Q.head(k, S);
            return -1;
        };
        Q.phase(mask_to_string(T, K), T, pick, [] { return false; });
    }

    std::string msg;
    if (Q.out_of_slots() && Q.leftover().first != 0) msg = leftover_message(Q, K, "slot budget exhausted");
    else msg = leftover_message(Q, K, "schedule budget exhausted");
    return run.finish(n, msg);
}

ScheduleW schedule_from_lp(const RateVector& rates, const ChannelSpec& spec, const SubsetOrdering& ord) {
    InnerMax im = inner_bound_max_t(spec, rates, ord);
    if (im.status != lp::Status::optimal)
        throw std::runtime_error(std::string("schedule: inner-bound LP returned ") + lp::to_string(im.status));
    ScheduleW s;
    s.vars = im.vars;
    s.ordering = ord;
    return s;
}

}  // namespace pecap
