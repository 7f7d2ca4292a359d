#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

namespace pecap {

using mask_t = uint32_t;

inline mask_t full_mask(int K) { return K >= 32 ? ~0u : ((1u << K) - 1u); }
inline mask_t bit(int k) { return 1u << (k - 1); }  // receiver k is 1-based
inline bool subset_of(mask_t a, mask_t b) { return (a & ~b) == 0; }
inline int popcount(mask_t m) { return __builtin_popcount(m); }

using RateVector = std::vector<double>;

class ChannelSpec {
public:
    enum class Kind { explicit_table, independent, symmetric };

    // probs[mask] = probability that exactly the receivers in mask get the symbol
    static ChannelSpec from_table(int K, std::vector<double> probs, bool renormalize = false);

    int K() const { return K_; }
    Kind kind() const { return kind_; }
    const std::vector<double>& probs() const { return probs_; }
    double prob(mask_t S) const { return probs_.at(S); }

    double p_union(mask_t S) const;
    double marginal(int k) const { return p_union(bit(k)); }
    // P(all of S receive, none of T receive)
    double f_p(mask_t S, mask_t T) const;

    bool is_symmetric(double tol = 1e-12) const;
    const std::vector<double>& params() const { return params_; }  // marginals or mass

    // relabel: receiver perm[i] (1-based) of *this becomes receiver i+1
    ChannelSpec relabeled(const std::vector<int>& perm) const;

    friend ChannelSpec make_spatially_independent(const std::vector<double>& p);
    friend ChannelSpec make_symmetric(int K, const std::vector<double>& mass);

private:
    int K_ = 0;
    Kind kind_ = Kind::explicit_table;
    std::vector<double> probs_;
    std::vector<double> params_;
    std::vector<double> none_of_;   // none_of_[M] = sum of probs over subsets of M
};

ChannelSpec make_spatially_independent(const std::vector<double>& p);
ChannelSpec make_symmetric(int K, const std::vector<double>& mass);

double p_union(const ChannelSpec& spec, mask_t S);
double f_p(const ChannelSpec& spec, mask_t S, mask_t T);

// draws one reception set; identical seeds give identical sequences
mask_t sample_reception(const ChannelSpec& spec, std::mt19937_64& rng);

class ReceptionSampler {
public:
    explicit ReceptionSampler(const ChannelSpec& spec);
    mask_t operator()(std::mt19937_64& rng) const;

private:
    std::vector<double> cdf_;
};

double uniform01(std::mt19937_64& rng);

nlohmann::json spec_to_json(const ChannelSpec& spec);
ChannelSpec spec_from_json(const nlohmann::json& j);
std::string mask_to_string(mask_t S, int K);

}  // namespace pecap
