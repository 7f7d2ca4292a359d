#include "pecap/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace pecap {

// ---------------------------------------------------------------- outer bound

double outer_bound_load(const ChannelSpec& spec, const RateVector& rates) {
    const int K = spec.K();
    if ((int)rates.size() != K) throw std::invalid_argument("outer bound: rate vector has wrong length");
    // best[S] = max over orderings of S of sum_j R_j / p_union(prefix); DP over the last element
    std::vector<double> best(std::size_t(1) << K, 0.0);
    for (mask_t S = 1; S < best.size(); ++S) {
        double pu = spec.p_union(S);
        double acc = -1.0;
        for (int k = 1; k <= K; ++k) {
            if (!(S & bit(k))) continue;
            double term;
            if (rates[k - 1] == 0.0) term = 0.0;
            else if (pu <= 0.0) term = std::numeric_limits<double>::infinity();
            else term = rates[k - 1] / pu;
            acc = std::max(acc, best[S ^ bit(k)] + term);
        }
        best[S] = acc;
    }
    return best.back();
}

OuterResult outer_bound_max_t(const ChannelSpec& spec, const std::vector<double>& dir) {
    OuterResult r;
    for (double v : dir)
        if (!(v >= 0)) throw std::invalid_argument("outer bound: direction must be nonnegative");
    for (int k = 1; k <= spec.K(); ++k) {
        if (dir[k - 1] > 0 && spec.marginal(k) <= 0) {
            r.diagnostic = "receiver " + std::to_string(k) + " has zero success probability but positive weight";
            return r;
        }
    }
    double load = outer_bound_load(spec, dir);
    if (load <= 0) throw std::invalid_argument("outer bound: zero direction");
    r.t = 1.0 / load;
    return r;
}

// ---------------------------------------------------------------- orderings

uint32_t incidence_value(mask_t S, int K) {
    uint32_t v = 0;
    for (int k = 1; k <= K; ++k) v = (v << 1) | ((S & bit(k)) ? 1u : 0u);
    return v;
}

SubsetOrdering ordering_from_sequence(int K, std::vector<mask_t> seq) {
    SubsetOrdering o;
    o.K = K;
    o.seq = std::move(seq);
    o.pos.assign(std::size_t(1) << K, -1);
    if (o.seq.size() != o.pos.size()) throw std::invalid_argument("ordering: must list all subsets");
    for (std::size_t i = 0; i < o.seq.size(); ++i) {
        if (o.seq[i] >= o.pos.size() || o.pos[o.seq[i]] != -1)
            throw std::invalid_argument("ordering: not a permutation of subsets");
        o.pos[o.seq[i]] = static_cast<int>(i);
    }
    return o;
}

SubsetOrdering cardinality_ordering(int K) {
    std::vector<mask_t> seq(std::size_t(1) << K);
    std::iota(seq.begin(), seq.end(), 0u);
    std::sort(seq.begin(), seq.end(), [K](mask_t a, mask_t b) {
        int ca = popcount(a), cb = popcount(b);
        if (ca != cb) return ca < cb;
        return incidence_value(a, K) < incidence_value(b, K);
    });
    return ordering_from_sequence(K, std::move(seq));
}

bool is_cardinality_compatible(const SubsetOrdering& o) {
    for (std::size_t i = 1; i < o.seq.size(); ++i)
        if (popcount(o.seq[i - 1]) > popcount(o.seq[i])) return false;
    return true;
}

// ---------------------------------------------------------------- inner bound

WLayout::WLayout(int K) : K_(K) {
    if (K < 1 || K > 8) throw std::invalid_argument("inner bound: K must be in [1,8]");
    idx_.assign((std::size_t(K) << K) << K, -1);
    mask_t full = full_mask(K);
    for (int k = 1; k <= K; ++k) {
        mask_t rest = full & ~bit(k);
        for (mask_t S = rest;; S = (S - 1) & rest) {
            for (mask_t T = S;; T = (T - 1) & S) {
                idx_[((std::size_t(k - 1) << K) | S) << K | T] = count_++;
                entries_.push_back({k, S, T});
                if (T == 0) break;
            }
            if (S == 0) break;
        }
    }
}

namespace {

struct RowBuilder {
    std::map<int, double> acc;
    void add(int var, double c) {
        if (c != 0.0) acc[var] += c;
    }
    lp::Row finish(lp::Sense s, double rhs) {
        lp::Row r;
        r.sense = s;
        r.rhs = rhs;
        for (auto [j, c] : acc)
            if (c != 0.0) r.coef.emplace_back(j, c);
        acc.clear();
        return r;
    }
};

std::string set_str(mask_t S, int K) { return mask_to_string(S, K); }

}  // namespace

InnerLp build_inner_lp(const ChannelSpec& spec, const std::vector<double>& rv,
                       const SubsetOrdering& ord, bool max_t) {
    const int K = spec.K();
    if ((int)rv.size() != K) throw std::invalid_argument("inner bound: rate vector has wrong length");
    if (ord.K != K) throw std::invalid_argument("inner bound: ordering has wrong K");
    InnerLp L(K);
    const WLayout& W = L.layout;
    const mask_t full = full_mask(K);
    const int nx = 1 << K;

    lp::Problem& P = L.problem;
    for (int i = 0; i < nx + W.count(); ++i) P.add_var();
    if (max_t) L.t_var = P.add_var(1.0);

    RowBuilder rb;
    auto push = [&](lp::Row r, std::string label) {
        P.add_row(std::move(r));
        L.labels.push_back(std::move(label));
    };

    // total time
    for (int s = 0; s < nx; ++s) rb.add(L.x_var(s), 1.0);
    push(rb.finish(lp::Sense::le, 1.0), "total-time");
    L.rows_total_x = 1;

    // phase lengths
    for (mask_t T = 1; T <= full; ++T) {
        for (int k = 1; k <= K; ++k) {
            if (!(T & bit(k))) continue;
            mask_t base = T & ~bit(k);
            mask_t rest = full & ~bit(k);
            rb.add(L.x_var(T), 1.0);
            mask_t freeb = rest & ~base;
            for (mask_t e = freeb;; e = (e - 1) & freeb) {
                rb.add(L.w_var(k, base | e, base), -1.0);
                if (e == 0) break;
            }
            push(rb.finish(lp::Sense::ge, 0.0), "phase-length T=" + set_str(T, K) + " k=" + std::to_string(k));
            ++L.rows_coding;
        }
    }

    const double pall = spec.p_union(full);
    for (int k = 1; k <= K; ++k) {
        const mask_t rest = full & ~bit(k);
        const std::string ks = " k=" + std::to_string(k);

        // fresh packets
        rb.add(L.w_var(k, 0, 0), pall);
        if (max_t) {
            rb.add(L.t_var, -rv[k - 1]);
            push(rb.finish(lp::Sense::ge, 0.0), "fresh" + ks);
        } else {
            push(rb.finish(lp::Sense::ge, rv[k - 1]), "fresh" + ks);
        }
        ++L.rows_packet;

        // enumerate S subset of rest, nonempty
        for (mask_t S = rest; S != 0; S = (S - 1) & rest) {
            const mask_t outside = full & ~S;
            const double pout = spec.p_union(outside);

            // arrivals into Q_{k;S} from (S1,T1) with T1 in S1, T1 in S, S not in S1
            auto arrivals = [&](auto&& keep, double sign) {
                for (mask_t S1 = rest;; S1 = (S1 - 1) & rest) {
                    if (!subset_of(S, S1)) {
                        mask_t cand = S1 & S;
                        for (mask_t T1 = cand;; T1 = (T1 - 1) & cand) {
                            if (keep(S1, T1)) {
                                double f = spec.f_p(S & ~T1, outside);
                                rb.add(L.w_var(k, S1, T1), sign * f);
                            }
                            if (T1 == 0) break;
                        }
                    }
                    if (S1 == 0) break;
                }
            };

            // cleanup of Q_{k;S}
            for (mask_t T1 = S;; T1 = (T1 - 1) & S) {
                rb.add(L.w_var(k, S, T1), pout);
                if (T1 == 0) break;
            }
            arrivals([](mask_t, mask_t) { return true; }, -1.0);
            push(rb.finish(lp::Sense::ge, 0.0), "cleanup S=" + set_str(S, K) + ks);
            ++L.rows_packet;

            // conservation for each proper subset T of S
            for (mask_t T = (S - 1) & S;; T = (T - 1) & S) {
                const mask_t Tk = T | bit(k);
                rb.add(L.w_var(k, S, T), pout);
                for (mask_t T1 = S;; T1 = (T1 - 1) & S) {
                    if (ord.before(T1 | bit(k), Tk)) rb.add(L.w_var(k, S, T1), pout);
                    if (T1 == 0) break;
                }
                const double fT = spec.f_p(S & ~T, outside);
                mask_t above = rest & ~T;
                for (mask_t e = above;; e = (e - 1) & above) {
                    mask_t S1 = T | e;
                    if (ord.before(S1, S)) rb.add(L.w_var(k, S1, T), -fT);
                    if (e == 0) break;
                }
                arrivals([&](mask_t, mask_t T1) { return ord.before(T1 | bit(k), Tk); }, -1.0);
                push(rb.finish(lp::Sense::le, 0.0), "conservation S=" + set_str(S, K) + " T=" + set_str(T, K) + ks);
                ++L.rows_packet;
                if (T == 0) break;
            }
        }
    }
    return L;
}

const char* to_string(InnerStatus s) {
    switch (s) {
        case InnerStatus::feasible: return "feasible";
        case InnerStatus::infeasible: return "infeasible";
        case InnerStatus::numerical_failure: return "numerical-failure";
    }
    return "?";
}

namespace {

InnerBoundVariables unpack(const InnerLp& L, const std::vector<double>& v) {
    InnerBoundVariables out;
    out.K = L.layout.K();
    const int nx = 1 << out.K;
    out.x.assign(v.begin(), v.begin() + nx);
    out.w.assign(v.begin() + nx, v.begin() + nx + L.layout.count());
    return out;
}

std::vector<double> pack(const InnerLp& L, const InnerBoundVariables& vars) {
    std::vector<double> v(vars.x);
    v.insert(v.end(), vars.w.begin(), vars.w.end());
    if (L.t_var >= 0) v.push_back(0.0);
    return v;
}

}  // namespace

InnerFeasibility inner_bound_feasible(const ChannelSpec& spec, const RateVector& rates,
                                      const SubsetOrdering& ord) {
    InnerLp L = build_inner_lp(spec, rates, ord, false);
    lp::Solution s = lp::solve(L.problem);
    InnerFeasibility out;
    out.message = s.message;
    switch (s.status) {
        case lp::Status::optimal:
            out.status = InnerStatus::feasible;
            out.vars = unpack(L, s.values);
            break;
        case lp::Status::infeasible: out.status = InnerStatus::infeasible; break;
        default: out.status = InnerStatus::numerical_failure; break;
    }
    return out;
}

InnerMax inner_bound_max_t(const ChannelSpec& spec, const std::vector<double>& dir,
                           const SubsetOrdering& ord) {
    InnerLp L = build_inner_lp(spec, dir, ord, true);
    lp::Solution s = lp::solve(L.problem);
    InnerMax out;
    out.status = s.status;
    out.iterations = s.iterations;
    if (s.status == lp::Status::optimal) {
        out.t = s.values[L.t_var];
        out.vars = unpack(L, s.values);
    }
    return out;
}

std::vector<std::string> check_inner_bound(const ChannelSpec& spec, const RateVector& rates,
                                           const SubsetOrdering& ord, const InnerBoundVariables& vars,
                                           double tol) {
    InnerLp L = build_inner_lp(spec, rates, ord, false);
    std::vector<double> v = pack(L, vars);
    std::vector<std::string> bad;
    for (std::size_t i = 0; i < L.problem.rows.size(); ++i) {
        lp::Problem one;
        one.n_vars = L.problem.n_vars;
        one.rows.push_back(L.problem.rows[i]);
        if (lp::max_violation(one, v) > tol) bad.push_back(L.labels[i]);
    }
    for (double x : v)
        if (x < -tol) {
            bad.push_back("negative variable");
            break;
        }
    return bad;
}

DeficiencyResult deficiency(const ChannelSpec& spec, const std::vector<double>& dir,
                            const SubsetOrdering& ord) {
    DeficiencyResult r;
    OuterResult o = outer_bound_max_t(spec, dir);
    if (o.t <= 0) throw std::domain_error("deficiency: t_outer is zero (" + o.diagnostic + ")");
    r.t_outer = o.t;
    InnerMax in = inner_bound_max_t(spec, dir, ord);
    r.status = in.status;
    r.t_inner = in.t;
    r.defi = std::max(0.0, (r.t_outer - r.t_inner) / r.t_outer);
    return r;
}

// ---------------------------------------------------------------- closed forms

double symmetric_load(const ChannelSpec& spec, const RateVector& rates) {
    if (!spec.is_symmetric(1e-12)) throw std::invalid_argument("symmetric check: channel is not symmetric");
    if ((int)rates.size() != spec.K()) throw std::invalid_argument("symmetric check: wrong rate length");
    RateVector r = rates;
    std::sort(r.begin(), r.end(), std::greater<>());
    double s = 0;
    for (int k = 1; k <= spec.K(); ++k)
        if (r[k - 1] > 0) s += r[k - 1] / spec.p_union(full_mask(k));
    return s;
}

bool symmetric_capacity_check(const ChannelSpec& spec, const RateVector& rates) {
    return symmetric_load(spec, rates) <= 1.0 + 1e-12;
}

bool is_one_sidedly_fair(const std::vector<double>& p, const RateVector& rates) {
    if (p.size() != rates.size()) throw std::invalid_argument("one-sided fairness: length mismatch");
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j < p.size(); ++j) {
            double a = rates[i] * (1 - p[i]), b = rates[j] * (1 - p[j]);
            if (a < b - 1e-12 * std::max({1.0, std::abs(a), std::abs(b)})) return false;
        }
    return true;
}

double osf_load(const std::vector<double>& p, const RateVector& rates) {
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] < p[i - 1]) throw std::invalid_argument("one-sided fair capacity: marginals must be ascending");
    double s = 0, none = 1;
    for (std::size_t k = 0; k < p.size(); ++k) {
        none *= 1 - p[k];
        if (rates[k] > 0) s += rates[k] / (1 - none);
    }
    return s;
}

bool osf_capacity_check(const std::vector<double>& p, const RateVector& rates) {
    if (!is_one_sidedly_fair(p, rates))
        throw std::invalid_argument("rates are not one-sidedly fair; use the general inner/outer bounds");
    return osf_load(p, rates) <= 1.0 + 1e-12;
}

double sum_rate_perf_fair(const std::vector<double>& p_in) {
    std::vector<double> p = p_in;
    std::sort(p.begin(), p.end());
    double s = 0, none = 1;
    for (double pk : p) {
        none *= 1 - pk;
        s += 1.0 / (1 - none);
    }
    return static_cast<double>(p.size()) / s;
}

double L_S(const ChannelSpec& spec, mask_t S) {
    const mask_t full = full_mask(spec.K());
    if (S == full) throw std::invalid_argument("L_S: S must be a proper subset of [K]");
    const mask_t comp = full & ~S;
    double acc = 0;
    for (mask_t sub = S;; sub = (sub - 1) & S) {
        double term = 1.0 / spec.p_union(comp | sub);
        acc += (popcount(sub) & 1) ? -term : term;
        if (sub == 0) break;
    }
    return acc;
}

double L_S(const std::vector<double>& p, mask_t S) {
    return L_S(make_spatially_independent(p), S);
}

GammaEstimate gamma_oracle(const std::vector<double>& p, mask_t S, long trials, std::mt19937_64& rng) {
    if (trials < 1) throw std::invalid_argument("gamma oracle: trials must be >= 1");
    const int K = static_cast<int>(p.size());
    if (S == full_mask(K)) throw std::invalid_argument("gamma oracle: S must be a proper subset");
    std::vector<std::geometric_distribution<long>> geo;
    for (double pk : p) {
        if (!(pk > 0 && pk <= 1)) throw std::invalid_argument("gamma oracle: marginals must be in (0,1]");
        geo.emplace_back(pk);
    }
    double sum = 0, sumsq = 0;
    for (long t = 0; t < trials; ++t) {
        long Y = std::numeric_limits<long>::max(), Wm = 0;
        for (int k = 0; k < K; ++k) {
            long x = geo[k](rng) + 1;
            if (S & (1u << k)) Wm = std::max(Wm, x);
            else Y = std::min(Y, x);
        }
        double g = static_cast<double>(Y - std::min(Y, Wm));
        sum += g;
        sumsq += g * g;
    }
    GammaEstimate e;
    e.trials = trials;
    e.mean = sum / trials;
    double var = trials > 1 ? (sumsq - trials * e.mean * e.mean) / (trials - 1) : 0.0;
    e.std_error = std::sqrt(std::max(0.0, var) / trials);
    return e;
}

double ScheduleW::total() const { return std::accumulate(vars.x.begin(), vars.x.end(), 0.0); }

void recompute_phase_lengths(InnerBoundVariables& vars, const WLayout& L) {
    const int K = vars.K;
    const mask_t full = full_mask(K);
    vars.x.assign(std::size_t(1) << K, 0.0);
    for (mask_t T = 1; T <= full; ++T) {
        double best = 0;
        for (int k = 1; k <= K; ++k) {
            if (!(T & bit(k))) continue;
            mask_t base = T & ~bit(k), freeb = full & ~bit(k) & ~base;
            double s = 0;
            for (mask_t e = freeb;; e = (e - 1) & freeb) {
                s += vars.w[L.index(k, base | e, base)];
                if (e == 0) break;
            }
            best = std::max(best, s);
        }
        vars.x[T] = best;
    }
}

ScheduleW closed_form_w_schedule(const RateVector& rates, const ChannelSpec& spec, const SubsetOrdering& ord) {
    const int K = spec.K();
    if ((int)rates.size() != K) throw std::invalid_argument("closed-form schedule: wrong rate length");
    bool sym_ok = spec.is_symmetric(1e-12) && std::is_sorted(rates.begin(), rates.end(), std::greater<>());
    bool osf_ok = false;
    if (!sym_ok && spec.kind() == ChannelSpec::Kind::independent) {
        const auto& p = spec.params();
        osf_ok = std::is_sorted(p.begin(), p.end()) && is_one_sidedly_fair(p, rates);
    }
    if (!sym_ok && !osf_ok)
        throw std::invalid_argument(
            "closed-form schedule: needs a symmetric channel with non-increasing rates, or an independent "
            "channel with ascending marginals and one-sidedly fair rates");
    ScheduleW sch;
    sch.ordering = ord;
    WLayout L(K);
    sch.vars.K = K;
    sch.vars.w.assign(L.count(), 0.0);
    const mask_t full = full_mask(K);
    for (int k = 1; k <= K; ++k) {
        mask_t rest = full & ~bit(k);
        for (mask_t S = rest;; S = (S - 1) & rest) {
            sch.vars.w[L.index(k, S, S)] = rates[k - 1] * L_S(spec, S);
            if (S == 0) break;
        }
    }
    sch.vars.x.assign(std::size_t(1) << K, 0.0);
    for (mask_t T = 1; T <= full; ++T) {
        int kstar = __builtin_ctz(T) + 1;
        mask_t base = T & ~bit(kstar);
        sch.vars.x[T] = sch.vars.w[L.index(kstar, base, base)];
    }
    return sch;
}

std::vector<double> sample_direction(int K, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(K);
    double n2;
    do {
        n2 = 0;
        for (double& x : v) {
            x = std::abs(nd(rng));
            n2 += x * x;
        }
    } while (n2 < 1e-24);
    for (double& x : v) x /= std::sqrt(n2);
    return v;
}

}  // namespace pecap
