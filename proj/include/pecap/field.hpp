#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pecap {

using elem = uint32_t;

// GF(q) for q prime or q = 2^m (m <= 16), backed by log/antilog tables.
class Field {
public:
    explicit Field(uint32_t q = 65536);

    uint32_t order() const { return q_; }
    bool binary() const { return binary_; }
    uint32_t polynomial() const { return poly_; }  // 0 for prime fields

    elem add(elem a, elem b) const {
        if (binary_) return a ^ b;
        elem s = a + b;
        return s >= q_ ? s - q_ : s;
    }
    elem sub(elem a, elem b) const {
        if (binary_) return a ^ b;
        return a >= b ? a - b : a + q_ - b;
    }
    elem neg(elem a) const {
        if (binary_ || a == 0) return a;
        return q_ - a;
    }
    elem mul(elem a, elem b) const {
        if (a == 0 || b == 0) return 0;
        return exp_[log_[a] + log_[b]];
    }
    elem inv(elem a) const {
        if (a == 0) throw std::domain_error("GF(q): inverse of zero");
        return exp_[(q_ - 1) - log_[a]];
    }
    elem div(elem a, elem b) const {
        if (b == 0) throw std::domain_error("GF(q): division by zero");
        if (a == 0) return 0;
        return exp_[log_[a] + (q_ - 1) - log_[b]];
    }

private:
    uint32_t q_;
    bool binary_;
    uint32_t poly_ = 0;
    std::vector<elem> exp_;      // length 2(q-1), so log sums need no reduction
    std::vector<uint32_t> log_;
};

enum class Op { add, sub, mul, div };
elem field_arith(const Field& F, elem a, elem b, Op op);

// Conventional primitive polynomial for GF(2^m), m in [1,16].
uint32_t primitive_poly(unsigned m);

using CodingVector = std::vector<elem>;

CodingVector elementary(std::size_t dim, std::size_t idx);
bool is_zero(const CodingVector& v);
// y += c * x
void axpy(const Field& F, CodingVector& y, elem c, const CodingVector& x);

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Incremental reduced row-echelon basis. Also tracks, for every RREF row, its
// expression over the accepted input rows so decode coefficients can be read off.
class Basis {
public:
    Basis(const Field& F, std::size_t dim) : F_(&F), dim_(dim) {}

    bool insert(const CodingVector& v);
    bool in_span(const CodingVector& v) const;
    std::size_t rank() const { return rows_.size(); }
    std::size_t dim() const { return dim_; }
    const Field& field() const { return *F_; }
    const std::vector<CodingVector>& rows() const { return rows_; }
    // input vectors that extended the basis, in insertion order
    const std::vector<CodingVector>& accepted() const { return accepted_; }

    // reduce v against the basis; returns residual and the combination used
    CodingVector reduce(CodingVector v, CodingVector* combo = nullptr) const;

private:
    const Field* F_;
    std::size_t dim_;
    std::vector<CodingVector> rows_;
    std::vector<std::size_t> pivots_;
    std::vector<CodingVector> combos_;   // rows_[i] = sum combos_[i][j] * accepted_[j]
    std::vector<CodingVector> accepted_;
};

struct DecodeResult {
    bool ok = false;
    std::vector<CodingVector> coeffs;       // per target, over basis.accepted()
    std::vector<std::size_t> unreachable;   // target indices outside the span
};

DecodeResult solve_decode(const Basis& knowledge, const std::vector<CodingVector>& targets);

// Sparse row vector: (index, value) pairs sorted by index, no zero values.
struct SparseVec {
    std::vector<std::pair<uint32_t, elem>> nz;
    bool empty() const { return nz.empty(); }
};

SparseVec sparse_unit(uint32_t idx);
// a*x + b*y
SparseVec sparse_combine(const Field& F, elem a, const SparseVec& x, elem b, const SparseVec& y);
CodingVector to_dense(const SparseVec& v, std::size_t dim);

// Echelon basis over sparse rows with a caller-chosen elimination order: each
// coordinate gets a key and the pivot of a row is its smallest key. Rows whose
// pivot key is >= b span exactly the part of the space supported on keys >= b.
class SparseBasis {
public:
    SparseBasis(const Field& F, std::vector<uint32_t> key_of_index);

    bool insert(const SparseVec& v);
    std::size_t rank() const { return n_rows_; }
    std::size_t rank_from(uint32_t key) const;
    std::vector<SparseVec> rows() const;   // in original index space

private:
    const Field* F_;
    std::vector<uint32_t> key_;
    std::vector<uint32_t> index_of_key_;
    std::vector<SparseVec> by_pivot_;     // indexed by pivot key, stored in key space
    std::size_t n_rows_ = 0;
};

}  // namespace pecap
