#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pecap/bounds.hpp"
#include "pecap/channel.hpp"
#include "pecap/pe_core.hpp"

namespace pecap {

// ---- dominance (K=3) ----

// d_i dominates d_k (1-based)
bool dominates(const ChannelSpec& spec, const RateVector& rates, int i, int k, double tol = 1e-12);

struct DominanceOrder {
    std::vector<int> perm;   // perm[0] dominates perm[1] dominates perm[2]
};
DominanceOrder dominance_order(const RateVector& rates, const ChannelSpec& spec);

// ---- slot accounting ----

struct SlotAccounting {
    int K = 0;
    std::vector<std::vector<double>> A;   // A[k-1][S0], per unit n; zero where k in S0
    double total(int k) const;
};
SlotAccounting expected_slot_accounting(const RateVector& rates, const ChannelSpec& spec);

// ---- schemes ----

// the classic 2-phase scheme: uncoded until overheard, then pairwise mixing
SimulationResult two_phase_baseline(const RateVector& rates, const ChannelSpec& spec, long n, uint64_t seed,
                                    uint32_t q = 65536);

SimulationResult four_phase_k3(const RateVector& rates, const ChannelSpec& spec, long n, uint64_t seed,
                               const PeOptions& opt = {});

SimulationResult sequential_pe(const RateVector& rates, const ChannelSpec& spec, const ScheduleW& schedule,
                               long n, uint64_t seed, const PeOptions& opt = {});

// w at the inner-bound boundary point along the rate direction
ScheduleW schedule_from_lp(const RateVector& rates, const ChannelSpec& spec, const SubsetOrdering& ord);

}  // namespace pecap
