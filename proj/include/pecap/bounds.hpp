#pragma once

#include <random>
#include <string>
#include <vector>

#include "pecap/channel.hpp"
#include "pecap/lpsolve.hpp"

namespace pecap {

// ---- outer bound ----

struct OuterResult {
    double t = 0.0;
    std::string diagnostic;   // non-empty when t was forced to 0
};

// largest t with t*dir inside every permutation inequality
OuterResult outer_bound_max_t(const ChannelSpec& spec, const std::vector<double>& dir);
// max over permutations of sum_j R_pi(j) / p_union(S_j); rates are in the region iff <= 1
double outer_bound_load(const ChannelSpec& spec, const RateVector& rates);

// ---- subset orderings ----

uint32_t incidence_value(mask_t S, int K);

struct SubsetOrdering {
    int K = 0;
    std::vector<mask_t> seq;   // all 2^K subsets, first to last
    std::vector<int> pos;      // pos[mask] = index in seq
    bool before(mask_t a, mask_t b) const { return pos[a] < pos[b]; }
};

SubsetOrdering cardinality_ordering(int K);
SubsetOrdering ordering_from_sequence(int K, std::vector<mask_t> seq);
bool is_cardinality_compatible(const SubsetOrdering& ord);

// ---- inner bound LP ----

// index of w_{k;S->T} (k 1-based, T subset S subset [K]\k); -1 if invalid
class WLayout {
public:
    explicit WLayout(int K);
    int K() const { return K_; }
    int count() const { return count_; }
    int index(int k, mask_t S, mask_t T) const {
        return idx_[((std::size_t(k - 1) << K_) | S) << K_ | T];
    }
    struct Entry { int k; mask_t S, T; };
    const std::vector<Entry>& entries() const { return entries_; }

private:
    int K_;
    int count_ = 0;
    std::vector<int> idx_;
    std::vector<Entry> entries_;
};

struct InnerBoundVariables {
    int K = 0;
    std::vector<double> x;   // indexed by mask, size 2^K
    std::vector<double> w;   // indexed by WLayout
    double w_at(const WLayout& L, int k, mask_t S, mask_t T) const { return w[L.index(k, S, T)]; }
};

struct InnerLp {
    lp::Problem problem;
    WLayout layout;
    int t_var = -1;                  // only for the max-t form
    std::vector<std::string> labels; // one per row
    int rows_total_x = 0, rows_coding = 0, rows_packet = 0;
    explicit InnerLp(int K) : layout(K) {}
    int x_var(mask_t S) const { return static_cast<int>(S); }
    int w_var(int k, mask_t S, mask_t T) const { return (1 << layout.K()) + layout.index(k, S, T); }
};

// rates fixed (max_t=false) or rates = t*dir with objective max t (max_t=true)
InnerLp build_inner_lp(const ChannelSpec& spec, const std::vector<double>& rates_or_dir,
                       const SubsetOrdering& ord, bool max_t);

enum class InnerStatus { feasible, infeasible, numerical_failure };
const char* to_string(InnerStatus s);

struct InnerFeasibility {
    InnerStatus status = InnerStatus::numerical_failure;
    InnerBoundVariables vars;
    std::string message;
};

InnerFeasibility inner_bound_feasible(const ChannelSpec& spec, const RateVector& rates,
                                      const SubsetOrdering& ord);

struct InnerMax {
    lp::Status status = lp::Status::numerical_failure;
    double t = 0.0;
    InnerBoundVariables vars;
    long iterations = 0;
};

InnerMax inner_bound_max_t(const ChannelSpec& spec, const std::vector<double>& dir,
                           const SubsetOrdering& ord);

// labels of the inner-bound constraints violated by vars at the given rates
std::vector<std::string> check_inner_bound(const ChannelSpec& spec, const RateVector& rates,
                                           const SubsetOrdering& ord, const InnerBoundVariables& vars,
                                           double tol = 1e-9);

struct DeficiencyResult {
    double t_outer = 0, t_inner = 0, defi = 0;
    lp::Status status = lp::Status::numerical_failure;
};
DeficiencyResult deficiency(const ChannelSpec& spec, const std::vector<double>& dir,
                            const SubsetOrdering& ord);

// ---- closed forms ----

double symmetric_load(const ChannelSpec& spec, const RateVector& rates);
bool symmetric_capacity_check(const ChannelSpec& spec, const RateVector& rates);
bool is_one_sidedly_fair(const std::vector<double>& p, const RateVector& rates);
double osf_load(const std::vector<double>& p, const RateVector& rates);
bool osf_capacity_check(const std::vector<double>& p, const RateVector& rates);
double sum_rate_perf_fair(const std::vector<double>& p);

double L_S(const ChannelSpec& spec, mask_t S);
double L_S(const std::vector<double>& p, mask_t S);

struct GammaEstimate {
    double mean = 0, std_error = 0;
    long trials = 0;
};
GammaEstimate gamma_oracle(const std::vector<double>& p, mask_t S, long trials, std::mt19937_64& rng);

struct ScheduleW {
    InnerBoundVariables vars;
    SubsetOrdering ordering;
    double total() const;   // sum of x_T
};

ScheduleW closed_form_w_schedule(const RateVector& rates, const ChannelSpec& spec,
                                 const SubsetOrdering& ord);

// x_T = max_k sum_S w_{k;S->T\k}
void recompute_phase_lengths(InnerBoundVariables& vars, const WLayout& L);

// uniformly random point on the nonnegative orthant of the unit sphere
std::vector<double> sample_direction(int K, std::mt19937_64& rng);

}  // namespace pecap
