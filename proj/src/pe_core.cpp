#include "pecap/pe_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pecap {

namespace {

std::vector<uint32_t> receiver_keys(uint32_t first, uint32_t count, uint32_t dim) {
    std::vector<uint32_t> key(dim);
    for (uint32_t i = 0; i < dim; ++i) {
        if (i < first) key[i] = i;
        else if (i < first + count) key[i] = dim - count + (i - first);
        else key[i] = i - count;
    }
    return key;
}

std::vector<int> members(mask_t T, int K) {
    std::vector<int> out;
    for (int k = 1; k <= K; ++k)
        if (T & bit(k)) out.push_back(k);
    return out;
}

// span(knowledge_i, message_i)
Basis knowledge_plus_message(const Field& F, const ReceiverState& r) {
    Basis b(F, r.dim);
    for (const auto& row : r.knowledge_rows()) b.insert(row);
    for (uint32_t j = 0; j < r.count; ++j) b.insert(elementary(r.dim, r.first + j));
    return b;
}

}  // namespace

ReceiverState::ReceiverState(const Field& F, int k_, uint32_t first_, uint32_t count_, uint32_t dim_)
    : k(k_), first(first_), count(count_), dim(dim_), knowledge(F, receiver_keys(first_, count_, dim_)) {}

std::vector<CodingVector> ReceiverState::knowledge_rows() const {
    std::vector<CodingVector> out;
    for (const auto& r : knowledge.rows()) out.push_back(to_dense(r, dim));
    return out;
}

std::vector<int> packet_counts(long n, const RateVector& rates) {
    if (n < 0) throw std::invalid_argument("packet counts: n must be >= 0");
    std::vector<int> c;
    for (double r : rates) {
        if (!(r >= 0) || !std::isfinite(r)) throw std::invalid_argument("packet counts: rates must be finite and >= 0");
        c.push_back(static_cast<int>(std::floor(n * r + 1e-9)));
    }
    return c;
}

PeInit init_state(const Field& F, const std::vector<int>& counts) {
    PeInit out;
    SourceState& s = out.source;
    s.K = static_cast<int>(counts.size());
    if (s.K < 1 || s.K > 20) throw std::invalid_argument("init: K must be in [1,20]");
    s.counts = counts;
    uint32_t d = 0;
    for (int c : counts) {
        if (c < 0) throw std::invalid_argument("init: negative packet count");
        s.offset.push_back(d);
        d += static_cast<uint32_t>(c);
    }
    if (d == 0) throw std::invalid_argument("init: no packets to send");
    s.dim = d;
    s.packets.reserve(d);
    for (int k = 1; k <= s.K; ++k)
        for (int j = 0; j < counts[k - 1]; ++j)
            s.packets.push_back({k, j, 0, sparse_unit(s.offset[k - 1] + j)});
    for (int k = 1; k <= s.K; ++k)
        out.receivers.emplace_back(F, k, s.offset[k - 1], static_cast<uint32_t>(counts[k - 1]), d);
    return out;
}

PeInit init_state(const Field& F, long n, const RateVector& rates) {
    return init_state(F, packet_counts(n, rates));
}

std::vector<std::vector<int>> eligible_targets(const SourceState& s, mask_t T) {
    if (T == 0) throw std::invalid_argument("eligible targets: T must be nonempty");
    std::vector<std::vector<int>> out;
    for (int k : members(T, s.K)) {
        std::vector<int> ids;
        for (int j = 0; j < s.counts[k - 1]; ++j) {
            const PacketState& p = s.packet(k, j);
            if (subset_of(T, p.overhearing | bit(k))) ids.push_back(s.id(k, j));
        }
        out.push_back(std::move(ids));
    }
    return out;
}

SparseVec build_tx_vector(const Field& F, const SourceState& s, const std::vector<int>& targets,
                          const std::vector<elem>& coeffs) {
    if (targets.size() != coeffs.size()) throw std::invalid_argument("build_tx_vector: |coeffs| != |targets|");
    SparseVec v;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] < 0 || coeffs[i] == 0) continue;
        v = sparse_combine(F, 1, v, coeffs[i], s.packets.at(targets[i]).vec);
    }
    return v;
}

void set_current(const Field& F, SourceState& s, mask_t T, std::vector<int> targets, std::vector<elem> coeffs) {
    std::vector<int> ks = members(T, s.K);
    if (T == 0 || ks.size() != targets.size())
        throw std::invalid_argument("set_current: need one target per member of T");
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (targets[i] < 0) continue;
        const PacketState& p = s.packets.at(targets[i]);
        if (p.owner != ks[i]) throw std::invalid_argument("set_current: target belongs to another session");
        if (!subset_of(T, p.overhearing | bit(ks[i])))
            throw std::logic_error("set_current: " + describe(s, p.owner, p.index) + " is not eligible for T=" +
                                   mask_to_string(T, s.K));
    }
    s.current.T = T;
    s.current.v_tx = build_tx_vector(F, s, targets, coeffs);
    s.current.targets = std::move(targets);
    s.current.coeffs = std::move(coeffs);
    s.has_current = true;
}

bool update(SourceState& s, mask_t S_rx) {
    if (!s.has_current) throw std::logic_error("update: no current transmission");
    const Transmission& cur = s.current;
    std::vector<int> ks = members(cur.T, s.K);
    bool changed = false;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (cur.targets[i] < 0) continue;
        PacketState& p = s.packets[cur.targets[i]];
        if (subset_of(S_rx, p.overhearing)) continue;
        p.overhearing = (cur.T & p.overhearing) | S_rx;
        p.vec = cur.v_tx;
        changed = true;
        if ((p.overhearing | bit(ks[i])) != (cur.T | S_rx))
            throw std::logic_error("update: S u {k} != T u S_rx for " + describe(s, p.owner, p.index));
    }
    s.flag_change = changed;
    return changed;
}

void receiver_observe(ReceiverState& r, const SparseVec& v_tx, bool received) {
    if (!received) return;
    ++r.received;
    if (!v_tx.empty()) r.knowledge.insert(v_tx);
}

bool decode_all(const ReceiverState& r) {
    return r.knowledge.rank_from(r.message_key()) == r.count;
}

Basis remaining_space(const Field& F, const SourceState& s, int k) {
    Basis b(F, s.dim);
    for (int j = 0; j < s.counts[k - 1]; ++j) {
        const PacketState& p = s.packet(k, j);
        if (!(p.overhearing & bit(k))) b.insert(to_dense(p.vec, s.dim));
    }
    return b;
}

bool check_lemma3(const Field& F, const SourceState& s, const std::vector<ReceiverState>& rx) {
    std::vector<Basis> spans;
    for (const auto& r : rx) spans.push_back(knowledge_plus_message(F, r));
    for (const PacketState& p : s.packets) {
        CodingVector v = to_dense(p.vec, s.dim);
        mask_t who = p.overhearing | bit(p.owner);
        for (int i = 1; i <= s.K; ++i)
            if ((who & bit(i)) && !spans[i - 1].in_span(v)) return false;
    }
    return true;
}

bool check_lemma4(const Field& F, const SourceState& s, const std::vector<ReceiverState>& rx) {
    for (const auto& r : rx) {
        Basis zr(F, s.dim), zm = knowledge_plus_message(F, r);
        for (const auto& row : r.knowledge_rows()) zr.insert(row);
        Basis rem = remaining_space(F, s, r.k);
        for (const auto& row : rem.rows()) zr.insert(row);
        if (zr.rank() != zm.rank()) return false;
        for (const auto& row : zr.rows())
            if (!zm.in_span(row)) return false;
    }
    return true;
}

std::vector<elem> deterministic_coeffs(const Field& F, const SourceState& s, mask_t T,
                                       const std::vector<int>& targets,
                                       const std::vector<ReceiverState>& rx) {
    if (F.order() <= static_cast<uint32_t>(s.K)) throw std::invalid_argument("field too small: need q > K");
    std::vector<int> ks = members(T, s.K);
    if (ks.size() != targets.size()) throw std::invalid_argument("deterministic coeffs: need one target per member of T");
    const std::size_t m = targets.size();

    // residuals of every target vector modulo span(knowledge_k, other remaining_k), for k in B_t
    std::vector<std::vector<CodingVector>> residual;
    for (std::size_t i = 0; i < m; ++i) {
        if (targets[i] < 0) continue;
        const PacketState& x = s.packets[targets[i]];
        int k = ks[i];
        if (x.overhearing & bit(k)) continue;
        Basis b(F, s.dim);
        for (const auto& row : rx[k - 1].knowledge_rows()) b.insert(row);
        for (int j = 0; j < s.counts[k - 1]; ++j) {
            const PacketState& p = s.packet(k, j);
            if (s.id(k, j) != targets[i] && !(p.overhearing & bit(k))) b.insert(to_dense(p.vec, s.dim));
        }
        CodingVector own = b.reduce(to_dense(x.vec, s.dim));
        if (is_zero(own)) continue;
        std::vector<CodingVector> res(m);
        for (std::size_t l = 0; l < m; ++l)
            res[l] = targets[l] < 0 ? CodingVector(s.dim, 0) : b.reduce(to_dense(s.packets[targets[l]].vec, s.dim));
        residual.push_back(std::move(res));
    }

    std::vector<elem> c(m, 1);
    if (residual.empty()) return c;

    // odometer over all q^m tuples, each digit running 1..q-1 then 0
    const uint32_t q = F.order();
    auto ok = [&]() {
        for (const auto& res : residual) {
            CodingVector acc(s.dim, 0);
            for (std::size_t l = 0; l < m; ++l) axpy(F, acc, c[l], res[l]);
            if (is_zero(acc)) return false;
        }
        return true;
    };
    while (true) {
        if (ok()) return c;
        std::size_t d = 0;
        for (; d < m; ++d) {
            c[d] = c[d] == 0 ? 1 : (c[d] + 1 == q ? 0 : c[d] + 1);
            if (c[d] != 1) break;
        }
        if (d == m) break;
    }
    throw std::logic_error("deterministic coeffs: no valid coefficients found");
}

// ---------------------------------------------------------------- PeRun

bool SimulationResult::all_decoded() const {
    return std::all_of(decoded.begin(), decoded.end(), [](bool b) { return b; });
}

PeRun::PeRun(const ChannelSpec& spec, std::vector<int> counts, const PeOptions& opt, uint64_t seed)
    : spec_(spec), opt_(opt), F_(opt.q), init_(init_state(F_, counts)), sampler_(spec), seed_(seed) {
    if ((int)counts.size() != spec.K()) throw std::invalid_argument("run: counts length != K");
    std::seed_seq a{seed, uint64_t(0x5e55)}, b{seed, uint64_t(0xc0ef)};
    chan_rng_.seed(a);
    coef_rng_.seed(b);
    res_.seed = seed;
    res_.counts = counts;
    res_.logical.assign(spec.K(), std::vector<long>(std::size_t(1) << spec.K(), 0));
}

void PeRun::select(mask_t T, std::vector<int> targets) {
    SourceState& s = init_.source;
    std::vector<elem> c(targets.size(), 1);
    if (opt_.coeffs == CoeffMode::deterministic) {
        c = deterministic_coeffs(F_, s, T, targets, init_.receivers);
    } else if (targets.size() > 1) {
        std::uniform_int_distribution<uint32_t> nz(1, F_.order() - 1);
        for (auto& x : c) x = nz(coef_rng_);
    }
    set_current(F_, s, T, std::move(targets), std::move(c));
}

void PeRun::select(mask_t T, std::vector<int> targets, std::vector<elem> coeffs) {
    set_current(F_, init_.source, T, std::move(targets), std::move(coeffs));
}

mask_t PeRun::step() { return apply(sampler_(chan_rng_)); }
mask_t PeRun::step(mask_t S_rx) { return apply(S_rx); }

mask_t PeRun::apply(mask_t S_rx) {
    SourceState& s = init_.source;
    if (!s.has_current) throw std::logic_error("step: nothing selected");
    const Transmission& cur = s.current;
    SlotRecord rec;
    std::vector<int> ks = members(cur.T, s.K);
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (cur.targets[i] < 0) {
            rec.before.push_back(~0u);
            continue;
        }
        mask_t S = s.packets[cur.targets[i]].overhearing;
        rec.before.push_back(S);
        ++res_.logical[ks[i] - 1][S];
    }
    if (opt_.track_receivers)
        for (auto& r : init_.receivers) receiver_observe(r, cur.v_tx, (S_rx & bit(r.k)) != 0);
    update(s, S_rx);
    ++s.slot;
    if (opt_.trace) {
        rec.t = s.slot;
        rec.T = cur.T;
        rec.S_rx = S_rx;
        res_.trace.push_back(std::move(rec));
    }
    if (opt_.check_lemmas && opt_.track_receivers) {
        if (!check_lemma3(F_, s, init_.receivers)) ++res_.lemma3_failures;
        if (!check_lemma4(F_, s, init_.receivers)) ++res_.lemma4_failures;
    }
    return S_rx;
}

void PeRun::begin_phase(std::string name) {
    if (!res_.phases.empty()) res_.phases.back().second = slot() - phase_start_;
    res_.phases.emplace_back(std::move(name), 0);
    phase_start_ = slot();
}

SimulationResult PeRun::finish(long n, std::string shortfall) {
    if (!res_.phases.empty()) res_.phases.back().second = slot() - phase_start_;
    const SourceState& s = init_.source;
    res_.n = n;
    res_.slots_used = s.slot;
    res_.delivered = std::all_of(s.packets.begin(), s.packets.end(),
                                 [](const PacketState& p) { return (p.overhearing & bit(p.owner)) != 0; });
    res_.decoded.assign(s.K, false);
    for (int k = 1; k <= s.K; ++k) {
        if (opt_.track_receivers) {
            res_.decoded[k - 1] = decode_all(init_.receivers[k - 1]);
        } else {
            bool all = true;
            for (int j = 0; j < s.counts[k - 1]; ++j) all = all && (s.packet(k, j).overhearing & bit(k));
            res_.decoded[k - 1] = all;
        }
    }
    if (shortfall.empty() && !res_.delivered) shortfall = "undelivered packets remain";
    res_.shortfall = std::move(shortfall);
    return std::move(res_);
}

std::string describe(const SourceState& s, int k, int j) {
    const PacketState& p = s.packet(k, j);
    return "X_{" + std::to_string(k) + "," + std::to_string(j + 1) + "} S=" + mask_to_string(p.overhearing, s.K);
}

}  // namespace pecap
