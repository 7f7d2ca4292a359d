#include "pecap/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pecap {

namespace {

constexpr double kNormTol = 1e-12;

void fill_subset_sums(int K, const std::vector<double>& probs, std::vector<double>& none_of) {
    none_of = probs;
    for (int b = 0; b < K; ++b)
        for (mask_t m = 0; m < none_of.size(); ++m)
            if (m & (1u << b)) none_of[m] += none_of[m ^ (1u << b)];
}

double binom(int n, int k) {
    double r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

ChannelSpec ChannelSpec::from_table(int K, std::vector<double> probs, bool renormalize) {
    if (K < 1 || K > 20) throw std::invalid_argument("channel: K must be in [1,20]");
    if (probs.size() != (std::size_t(1) << K))
        throw std::invalid_argument("channel: table must have 2^K entries");
    double total = 0;
    for (double x : probs) {
        if (!(x >= 0) || !std::isfinite(x)) throw std::invalid_argument("channel: negative or non-finite probability");
        total += x;
    }
    if (std::abs(total - 1.0) > kNormTol) {
        if (!renormalize || total <= 0)
            throw std::invalid_argument("channel: probabilities sum to " + std::to_string(total));
        for (double& x : probs) x /= total;
    }
    ChannelSpec s;
    s.K_ = K;
    s.probs_ = std::move(probs);
    fill_subset_sums(K, s.probs_, s.none_of_);
    return s;
}

double ChannelSpec::p_union(mask_t S) const {
    if (S == 0) return 0.0;
    mask_t comp = full_mask(K_) & ~S;
    return std::max(0.0, none_of_.back() - none_of_[comp]);
}

double ChannelSpec::f_p(mask_t S, mask_t T) const {
    if (S & T) throw std::invalid_argument("f_p: S and T overlap");
    mask_t full = full_mask(K_);
    if ((S | T) & ~full) throw std::invalid_argument("f_p: set outside [K]");
    mask_t free = full & ~(S | T);
    double acc = 0;
    for (mask_t sub = free;; sub = (sub - 1) & free) {
        acc += probs_[S | sub];
        if (sub == 0) break;
    }
    return acc;
}

bool ChannelSpec::is_symmetric(double tol) const {
    std::vector<double> first(K_ + 1, -1.0);
    for (mask_t m = 0; m < probs_.size(); ++m) {
        int c = popcount(m);
        if (first[c] < 0) first[c] = probs_[m];
        else if (std::abs(first[c] - probs_[m]) > tol) return false;
    }
    return true;
}

ChannelSpec ChannelSpec::relabeled(const std::vector<int>& perm) const {
    if ((int)perm.size() != K_) throw std::invalid_argument("relabel: bad permutation size");
    std::vector<double> np(probs_.size());
    for (mask_t m = 0; m < probs_.size(); ++m) {
        mask_t old = 0;
        for (int i = 0; i < K_; ++i)
            if (m & (1u << i)) old |= bit(perm[i]);
        np[m] = probs_[old];
    }
    ChannelSpec s = from_table(K_, std::move(np), true);
    s.kind_ = kind_;
    if (kind_ == Kind::independent) {
        for (int i = 0; i < K_; ++i) s.params_.push_back(params_[perm[i] - 1]);
    } else {
        s.params_ = params_;
    }
    return s;
}

ChannelSpec make_spatially_independent(const std::vector<double>& p) {
    int K = static_cast<int>(p.size());
    for (double x : p)
        if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("independent channel: marginal out of [0,1]");
    if (K < 1 || K > 20) throw std::invalid_argument("channel: K must be in [1,20]");
    std::vector<double> probs(std::size_t(1) << K);
    for (mask_t m = 0; m < probs.size(); ++m) {
        double v = 1;
        for (int k = 0; k < K; ++k) v *= (m >> k & 1) ? p[k] : 1.0 - p[k];
        probs[m] = v;
    }
    ChannelSpec s = ChannelSpec::from_table(K, std::move(probs), true);
    s.kind_ = ChannelSpec::Kind::independent;
    s.params_ = p;
    return s;
}

ChannelSpec make_symmetric(int K, const std::vector<double>& mass) {
    if ((int)mass.size() != K + 1) throw std::invalid_argument("symmetric channel: need K+1 masses");
    double total = 0;
    for (int c = 0; c <= K; ++c) {
        if (!(mass[c] >= 0)) throw std::invalid_argument("symmetric channel: negative mass");
        total += binom(K, c) * mass[c];
    }
    if (std::abs(total - 1.0) > kNormTol)
        throw std::invalid_argument("symmetric channel: sum C(K,c) mass[c] = " + std::to_string(total));
    std::vector<double> probs(std::size_t(1) << K);
    for (mask_t m = 0; m < probs.size(); ++m) probs[m] = mass[popcount(m)];
    ChannelSpec s = ChannelSpec::from_table(K, std::move(probs), true);
    s.kind_ = ChannelSpec::Kind::symmetric;
    s.params_ = mass;
    return s;
}

double p_union(const ChannelSpec& spec, mask_t S) { return spec.p_union(S); }
double f_p(const ChannelSpec& spec, mask_t S, mask_t T) { return spec.f_p(S, T); }

double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

ReceptionSampler::ReceptionSampler(const ChannelSpec& spec) {
    cdf_.resize(spec.probs().size());
    std::partial_sum(spec.probs().begin(), spec.probs().end(), cdf_.begin());
}

mask_t ReceptionSampler::operator()(std::mt19937_64& rng) const {
    double u = uniform01(rng) * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<mask_t>(it - cdf_.begin());
}

mask_t sample_reception(const ChannelSpec& spec, std::mt19937_64& rng) {
    return ReceptionSampler(spec)(rng);
}

std::string mask_to_string(mask_t S, int K) {
    std::string s = "{";
    bool first = true;
    for (int k = 1; k <= K; ++k) {
        if (!(S & bit(k))) continue;
        if (!first) s += ",";
        s += std::to_string(k);
        first = false;
    }
    return s + "}";
}

namespace {

mask_t mask_from_string(const std::string& str, int K) {
    mask_t m = 0;
    std::size_t i = 0;
    while (i < str.size()) {
        if (std::isdigit(static_cast<unsigned char>(str[i]))) {
            std::size_t j = i;
            while (j < str.size() && std::isdigit(static_cast<unsigned char>(str[j]))) ++j;
            int k = std::stoi(str.substr(i, j - i));
            if (k < 1 || k > K) throw std::invalid_argument("channel json: receiver index out of range in " + str);
            m |= bit(k);
            i = j;
        } else {
            ++i;
        }
    }
    return m;
}

}  // namespace

nlohmann::json spec_to_json(const ChannelSpec& spec) {
    nlohmann::json j;
    j["K"] = spec.K();
    switch (spec.kind()) {
        case ChannelSpec::Kind::independent:
            j["kind"] = "independent";
            j["marginals"] = spec.params();
            break;
        case ChannelSpec::Kind::symmetric:
            j["kind"] = "symmetric";
            j["mass"] = spec.params();
            break;
        case ChannelSpec::Kind::explicit_table: {
            j["kind"] = "explicit";
            nlohmann::json probs = nlohmann::json::object();
            for (mask_t m = 0; m < spec.probs().size(); ++m)
                probs[mask_to_string(m, spec.K())] = spec.probs()[m];
            j["probs"] = probs;
            break;
        }
    }
    return j;
}

ChannelSpec spec_from_json(const nlohmann::json& j) {
    int K = j.at("K").get<int>();
    std::string kind = j.at("kind").get<std::string>();
    ChannelSpec s;
    if (kind == "independent") {
        auto p = j.at("marginals").get<std::vector<double>>();
        if ((int)p.size() != K) throw std::invalid_argument("channel json: marginals length != K");
        s = make_spatially_independent(p);
    } else if (kind == "symmetric") {
        s = make_symmetric(K, j.at("mass").get<std::vector<double>>());
    } else if (kind == "explicit") {
        if (K < 1 || K > 20) throw std::invalid_argument("channel: K must be in [1,20]");
        std::vector<double> probs(std::size_t(1) << K, 0.0);
        const auto& pj = j.at("probs");
        if (pj.is_array()) {
            probs = pj.get<std::vector<double>>();
        } else {
            for (auto it = pj.begin(); it != pj.end(); ++it) probs[mask_from_string(it.key(), K)] = it.value().get<double>();
        }
        bool renorm = j.value("renormalize", false);
        s = ChannelSpec::from_table(K, std::move(probs), renorm);
    } else {
        throw std::invalid_argument("channel json: unknown kind '" + kind + "'");
    }
    return s;
}

}  // namespace pecap
