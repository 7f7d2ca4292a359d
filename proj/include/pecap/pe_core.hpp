#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pecap/channel.hpp"
#include "pecap/field.hpp"

namespace pecap {

struct PacketState {
    int owner = 0;          // session k, 1-based
    int index = 0;          // j, 0-based within the session
    mask_t overhearing = 0; // S(X)
    SparseVec vec;          // v(X)
};

// T plus one target per member of T (ascending k); -1 marks an exhausted
// session that contributes an all-zero dummy
struct Transmission {
    mask_t T = 0;
    std::vector<int> targets;
    std::vector<elem> coeffs;
    SparseVec v_tx;
};

struct SourceState {
    int K = 0;
    std::vector<int> counts;        // nR_k
    std::vector<uint32_t> offset;   // first global coordinate of session k
    uint32_t dim = 0;
    std::vector<PacketState> packets;
    bool flag_change = true;
    bool has_current = false;
    Transmission current;
    long slot = 0;

    int id(int k, int j) const { return static_cast<int>(offset[k - 1]) + j; }
    const PacketState& packet(int k, int j) const { return packets[id(k, j)]; }
};

struct ReceiverState {
    int k = 0;
    uint32_t first = 0, count = 0;   // message coordinates [first, first+count)
    uint32_t dim = 0;
    SparseBasis knowledge;
    long received = 0;

    ReceiverState(const Field& F, int k, uint32_t first, uint32_t count, uint32_t dim);
    // key space puts the session's own coordinates last
    uint32_t message_key() const { return dim - count; }
    std::vector<CodingVector> knowledge_rows() const;
};

struct PeInit {
    SourceState source;
    std::vector<ReceiverState> receivers;
};

// packet counts nR_k are floor(n * R_k) with a small guard against round-off
std::vector<int> packet_counts(long n, const RateVector& rates);
PeInit init_state(const Field& F, const std::vector<int>& counts);
PeInit init_state(const Field& F, long n, const RateVector& rates);

// per k in T (ascending), packets with (S(X) u {k}) containing T
std::vector<std::vector<int>> eligible_targets(const SourceState& s, mask_t T);

SparseVec build_tx_vector(const Field& F, const SourceState& s, const std::vector<int>& targets,
                          const std::vector<elem>& coeffs);

// installs T/targets/coeffs as the current transmission
void set_current(const Field& F, SourceState& s, mask_t T, std::vector<int> targets, std::vector<elem> coeffs);

// Update rule on the current transmission; returns whether any target changed.
// Throws std::logic_error if the post-update identity S u {k} = T u S_rx fails.
bool update(SourceState& s, mask_t S_rx);

void receiver_observe(ReceiverState& r, const SparseVec& v_tx, bool received);
bool decode_all(const ReceiverState& r);

Basis remaining_space(const Field& F, const SourceState& s, int k);
bool check_lemma3(const Field& F, const SourceState& s, const std::vector<ReceiverState>& rx);
bool check_lemma4(const Field& F, const SourceState& s, const std::vector<ReceiverState>& rx);

// coefficients such that v_tx stays outside span(knowledge_k, other remaining_k)
// for every k whose target is currently outside it; requires q > K
std::vector<elem> deterministic_coeffs(const Field& F, const SourceState& s, mask_t T,
                                       const std::vector<int>& targets,
                                       const std::vector<ReceiverState>& rx);

// ---- a run: source, receivers, channel and coefficient randomness ----

enum class CoeffMode { random, deterministic };

struct PeOptions {
    uint32_t q = 65536;
    CoeffMode coeffs = CoeffMode::random;
    bool track_receivers = true;
    bool trace = false;
    bool check_lemmas = false;     // dense span checks after every slot; small runs only
};

struct SlotRecord {
    long t = 0;
    mask_t T = 0, S_rx = 0;
    std::vector<mask_t> before;    // S of each target before the update, ~0u for dummies
};

struct SimulationResult {
    long n = 0;
    long slots_used = 0;
    uint64_t seed = 0;
    std::vector<int> counts;
    std::vector<bool> decoded;
    bool delivered = false;           // every packet ended with k in S(X)
    std::string shortfall;            // non-empty when the slot budget ran out or work was left
    long lemma3_failures = 0, lemma4_failures = 0;
    // logical[k-1][S] = slots in which a session-k packet with S(X)=S was transmitted
    std::vector<std::vector<long>> logical;
    std::vector<std::pair<std::string, long>> phases;
    std::vector<SlotRecord> trace;

    bool all_decoded() const;
    bool success() const { return all_decoded() && shortfall.empty() && slots_used <= n; }
};

class PeRun {
public:
    PeRun(const ChannelSpec& spec, std::vector<int> counts, const PeOptions& opt, uint64_t seed);

    const Field& field() const { return F_; }
    const SourceState& source() const { return init_.source; }
    const std::vector<ReceiverState>& receivers() const { return init_.receivers; }
    long slot() const { return init_.source.slot; }

    // choose T and targets; coefficients are drawn here (or computed in deterministic mode)
    void select(mask_t T, std::vector<int> targets);
    void select(mask_t T, std::vector<int> targets, std::vector<elem> coeffs);
    // one slot of the current transmission; returns S_rx
    mask_t step();
    mask_t step(mask_t S_rx);

    void begin_phase(std::string name);
    SimulationResult finish(long n, std::string shortfall = {});

private:
    mask_t apply(mask_t S_rx);

    ChannelSpec spec_;
    PeOptions opt_;
    Field F_;
    PeInit init_;
    ReceptionSampler sampler_;
    std::mt19937_64 chan_rng_, coef_rng_;
    uint64_t seed_;
    SimulationResult res_;
    long phase_start_ = 0;
};

std::string describe(const SourceState& s, int k, int j);

}  // namespace pecap
