#include "pecap/field.hpp"

#include <algorithm>
#include <string>

namespace pecap {

namespace {

bool is_prime(uint32_t q) {
    if (q < 2) return false;
    for (uint32_t d = 2; d * d <= q; ++d)
        if (q % d == 0) return false;
    return true;
}

uint64_t powmod(uint64_t b, uint64_t e, uint64_t m) {
    uint64_t r = 1 % m;
    b %= m;
    while (e) {
        if (e & 1) r = r * b % m;
        b = b * b % m;
        e >>= 1;
    }
    return r;
}

uint32_t primitive_root(uint32_t q) {
    if (q == 2) return 1;
    std::vector<uint32_t> factors;
    uint32_t m = q - 1;
    for (uint32_t d = 2; d * d <= m; ++d) {
        if (m % d == 0) {
            factors.push_back(d);
            while (m % d == 0) m /= d;
        }
    }
    if (m > 1) factors.push_back(m);
    for (uint32_t g = 2; g < q; ++g) {
        bool ok = true;
        for (uint32_t f : factors)
            if (powmod(g, (q - 1) / f, q) == 1) { ok = false; break; }
        if (ok) return g;
    }
    throw std::logic_error("no primitive root");
}

}  // namespace

uint32_t primitive_poly(unsigned m) {
    // x^m + ... ; degree-8 is 0x11D, degree-16 is 0x1100B
    static const uint32_t table[17] = {0,      0x3,    0x7,    0xB,    0x13,   0x25,
                                       0x43,   0x89,   0x11D,  0x211,  0x409,  0x805,
                                       0x1053, 0x201B, 0x4443, 0x8003, 0x1100B};
    if (m < 1 || m > 16) throw std::invalid_argument("GF(2^m): m must be in [1,16]");
    return table[m];
}

Field::Field(uint32_t q) : q_(q) {
    unsigned m = 0;
    if (q >= 2 && (q & (q - 1)) == 0) {
        while ((1u << m) < q) ++m;
        if (m > 16) throw std::invalid_argument("GF(q): q > 2^16 not supported");
        binary_ = true;
        poly_ = primitive_poly(m);
    } else if (is_prime(q) && q < 65536) {
        binary_ = false;
    } else {
        throw std::invalid_argument("GF(q): q must be prime or 2^m with m <= 16, got " +
                                    std::to_string(q));
    }

    exp_.assign(2 * (q_ - 1) + 1, 0);
    log_.assign(q_, 0);
    uint32_t g = binary_ ? 2 : primitive_root(q_);
    uint64_t x = 1;
    for (uint32_t i = 0; i < q_ - 1; ++i) {
        if (i > 0 && x == 1) throw std::logic_error("GF(q): generator is not primitive");
        exp_[i] = static_cast<elem>(x);
        log_[x] = i;
        if (binary_) {
            x <<= 1;
            if (x & q_) x ^= poly_;
        } else {
            x = x * g % q_;
        }
    }
    if (x != 1) throw std::logic_error("GF(q): generator cycle mismatch");
    for (uint32_t i = q_ - 1; i < exp_.size(); ++i) exp_[i] = exp_[i - (q_ - 1)];
}

elem field_arith(const Field& F, elem a, elem b, Op op) {
    if (a >= F.order() || b >= F.order()) throw std::out_of_range("GF(q): operand out of range");
    switch (op) {
        case Op::add: return F.add(a, b);
        case Op::sub: return F.sub(a, b);
        case Op::mul: return F.mul(a, b);
        case Op::div: return F.div(a, b);
    }
    return 0;
}

CodingVector elementary(std::size_t dim, std::size_t idx) {
    CodingVector v(dim, 0);
    v.at(idx) = 1;
    return v;
}

bool is_zero(const CodingVector& v) {
    return std::all_of(v.begin(), v.end(), [](elem x) { return x == 0; });
}

void axpy(const Field& F, CodingVector& y, elem c, const CodingVector& x) {
    if (c == 0) return;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (x[i]) y[i] = F.add(y[i], F.mul(c, x[i]));
}

CodingVector Basis::reduce(CodingVector v, CodingVector* combo) const {
    if (v.size() != dim_) throw DimensionError("basis: dimension mismatch");
    if (combo) combo->assign(accepted_.size(), 0);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        elem c = v[pivots_[i]];
        if (c == 0) continue;
        axpy(*F_, v, F_->neg(c), rows_[i]);
        if (combo) {
            // v_orig = residual + sum c_i rows_i
            for (std::size_t j = 0; j < combos_[i].size(); ++j)
                if (combos_[i][j]) (*combo)[j] = F_->add((*combo)[j], F_->mul(c, combos_[i][j]));
        }
    }
    return v;
}

bool Basis::in_span(const CodingVector& v) const { return is_zero(reduce(v)); }

bool Basis::insert(const CodingVector& v) {
    CodingVector combo;
    CodingVector r = reduce(v, &combo);
    std::size_t p = 0;
    while (p < dim_ && r[p] == 0) ++p;
    if (p == dim_) return false;

    // new row expressed over accepted: r = v - sum combo_j accepted_j
    std::size_t a = accepted_.size();
    accepted_.push_back(v);
    CodingVector rc(a + 1, 0);
    for (std::size_t j = 0; j < a; ++j) rc[j] = F_->neg(combo[j]);
    rc[a] = 1;
    for (auto& c : combos_) c.push_back(0);

    elem s = F_->inv(r[p]);
    for (auto& x : r) x = F_->mul(x, s);
    for (auto& x : rc) x = F_->mul(x, s);

    for (std::size_t i = 0; i < rows_.size(); ++i) {
        elem c = rows_[i][p];
        if (c == 0) continue;
        axpy(*F_, rows_[i], F_->neg(c), r);
        axpy(*F_, combos_[i], F_->neg(c), rc);
    }
    auto pos = std::lower_bound(pivots_.begin(), pivots_.end(), p) - pivots_.begin();
    pivots_.insert(pivots_.begin() + pos, p);
    rows_.insert(rows_.begin() + pos, std::move(r));
    combos_.insert(combos_.begin() + pos, std::move(rc));
    return true;
}

DecodeResult solve_decode(const Basis& knowledge, const std::vector<CodingVector>& targets) {
    DecodeResult out;
    out.coeffs.reserve(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
        CodingVector combo;
        CodingVector r = knowledge.reduce(targets[t], &combo);
        if (!is_zero(r)) {
            out.unreachable.push_back(t);
            combo.clear();
        }
        out.coeffs.push_back(std::move(combo));
    }
    out.ok = out.unreachable.empty();
    return out;
}

SparseVec sparse_unit(uint32_t idx) {
    SparseVec v;
    v.nz.emplace_back(idx, 1);
    return v;
}

SparseVec sparse_combine(const Field& F, elem a, const SparseVec& x, elem b, const SparseVec& y) {
    SparseVec out;
    out.nz.reserve(x.nz.size() + y.nz.size());
    std::size_t i = 0, j = 0;
    while (i < x.nz.size() || j < y.nz.size()) {
        uint32_t idx;
        elem val;
        if (j == y.nz.size() || (i < x.nz.size() && x.nz[i].first < y.nz[j].first)) {
            idx = x.nz[i].first;
            val = F.mul(a, x.nz[i].second);
            ++i;
        } else if (i == x.nz.size() || y.nz[j].first < x.nz[i].first) {
            idx = y.nz[j].first;
            val = F.mul(b, y.nz[j].second);
            ++j;
        } else {
            idx = x.nz[i].first;
            val = F.add(F.mul(a, x.nz[i].second), F.mul(b, y.nz[j].second));
            ++i;
            ++j;
        }
        if (val) out.nz.emplace_back(idx, val);
    }
    return out;
}

CodingVector to_dense(const SparseVec& v, std::size_t dim) {
    CodingVector d(dim, 0);
    for (auto [i, x] : v.nz) d.at(i) = x;
    return d;
}

SparseBasis::SparseBasis(const Field& F, std::vector<uint32_t> key_of_index)
    : F_(&F), key_(std::move(key_of_index)) {
    index_of_key_.assign(key_.size(), UINT32_MAX);
    for (uint32_t i = 0; i < key_.size(); ++i) {
        if (key_[i] >= key_.size() || index_of_key_[key_[i]] != UINT32_MAX)
            throw std::invalid_argument("sparse basis: key map is not a permutation");
        index_of_key_[key_[i]] = i;
    }
    by_pivot_.resize(key_.size());
}

bool SparseBasis::insert(const SparseVec& v) {
    SparseVec w;
    w.nz.reserve(v.nz.size());
    for (auto [i, x] : v.nz) {
        if (i >= key_.size()) throw DimensionError("sparse basis: index out of range");
        w.nz.emplace_back(key_[i], x);
    }
    std::sort(w.nz.begin(), w.nz.end());
    while (!w.nz.empty()) {
        auto [p, c] = w.nz.front();
        const SparseVec& row = by_pivot_[p];
        if (row.empty()) {
            elem s = F_->inv(c);
            for (auto& e : w.nz) e.second = F_->mul(e.second, s);
            by_pivot_[p] = std::move(w);
            ++n_rows_;
            return true;
        }
        w = sparse_combine(*F_, 1, w, F_->neg(c), row);
    }
    return false;
}

std::size_t SparseBasis::rank_from(uint32_t key) const {
    std::size_t n = 0;
    for (std::size_t k = key; k < by_pivot_.size(); ++k)
        if (!by_pivot_[k].empty()) ++n;
    return n;
}

std::vector<SparseVec> SparseBasis::rows() const {
    std::vector<SparseVec> out;
    for (const auto& r : by_pivot_) {
        if (r.empty()) continue;
        SparseVec o;
        for (auto [k, x] : r.nz) o.nz.emplace_back(index_of_key_[k], x);
        std::sort(o.nz.begin(), o.nz.end());
        out.push_back(std::move(o));
    }
    return out;
}

}  // namespace pecap
