#include "pecap/lpsolve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace pecap::lp {

const char* to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::numerical_failure: return "numerical-failure";
    }
    return "?";
}

int Problem::add_var(double obj, double lb) {
    objective.resize(n_vars, 0.0);
    lower.resize(n_vars, 0.0);
    objective.push_back(obj);
    lower.push_back(lb);
    return n_vars++;
}

double max_violation(const Problem& P, const std::vector<double>& x) {
    double worst = 0;
    for (const Row& r : P.rows) {
        double lhs = 0, mag = 0;
        for (auto [j, a] : r.coef) {
            lhs += a * x[j];
            mag += std::abs(a * x[j]);
        }
        double scale = 1.0 + std::abs(r.rhs) + mag;
        double v = 0;
        if (r.sense != Sense::ge) v = std::max(v, lhs - r.rhs);
        if (r.sense != Sense::le) v = std::max(v, r.rhs - lhs);
        worst = std::max(worst, v / scale);
    }
    for (int j = 0; j < P.n_vars; ++j) {
        double lb = j < (int)P.lower.size() ? P.lower[j] : 0.0;
        worst = std::max(worst, (lb - x[j]) / (1.0 + std::abs(lb)));
    }
    return worst;
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kDropTol = 1e-13;
constexpr double kHarris = 1e-9;

// x -= f * p, flushing tiny results to zero
#if defined(__GNUC__) && defined(__x86_64__)
__attribute__((target_clones("avx2", "default")))
#endif
void axpy_drop(double* __restrict x, const double* __restrict f, double p, int m) {
    for (int i = 0; i < m; ++i) {
        double v = x[i] - f[i] * p;
        x[i] = std::abs(v) < kDropTol ? 0.0 : v;
    }
}

double axpy_drop_norm(double* __restrict x, const double* __restrict f, double p, int m) {
    double ss = 0;
    for (int i = 0; i < m; ++i) {
        double v = x[i] - f[i] * p;
        v = std::abs(v) < kDropTol ? 0.0 : v;
        x[i] = v;
        ss += v * v;
    }
    return ss;
}

class Tableau {
public:
    int m = 0, ncol = 0, W = 0;
    std::vector<double> T;           // column-major m x W, last column is the rhs
    std::vector<double> z1, z2;      // phase-1 and phase-2 reduced-cost rows
    std::vector<int> basis;
    std::vector<char> artificial;
    std::vector<int> id_col;         // column that started as e_i
    std::vector<double> sign;        // normalized row = sign * input row
    std::vector<double> b;           // normalized rhs
    std::vector<int> scratch;
    std::vector<double> prow, pcol;
    std::vector<double> norm2;       // 1 + squared norm of each tableau column
    bool track_norms = false;
    long iterations = 0;

    void init_norms() {
        norm2.assign(ncol, 1.0);
        for (int j = 0; j < ncol; ++j) {
            const double* x = col(j);
            for (int i = 0; i < m; ++i) norm2[j] += x[i] * x[i];
        }
    }

    double* col(int j) { return T.data() + std::size_t(j) * m; }
    double& at(int i, int j) { return T[std::size_t(j) * m + i]; }

    void pivot(int r, int c) {
        prow.resize(W);
        pcol.assign(col(c), col(c) + m);
        double inv = 1.0 / pcol[r];
        scratch.clear();
        for (int j = 0; j < W; ++j) {
            double v = at(r, j);
            if (v == 0.0) continue;
            prow[j] = v * inv;
            scratch.push_back(j);
        }
        pcol[r] = 0.0;
        for (int j : scratch) {
            const double pj = prow[j];
            double* x = col(j);
            if (track_norms && j < ncol) {
                double old_r = x[r];
                norm2[j] = 1.0 + axpy_drop_norm(x, pcol.data(), pj, m) - old_r * old_r + pj * pj;
            } else {
                axpy_drop(x, pcol.data(), pj, m);
            }
            x[r] = pj;
        }
        double* xc = col(c);
        std::fill(xc, xc + m, 0.0);
        xc[r] = 1.0;
        if (track_norms) norm2[c] = 2.0;
        for (std::vector<double>* zp : {&z1, &z2}) {
            std::vector<double>& z = *zp;
            double f = z[c];
            if (f == 0.0) continue;
            for (int j : scratch) {
                double v = z[j] - f * prow[j];
                z[j] = std::abs(v) < kDropTol ? 0.0 : v;
            }
            z[c] = 0.0;
        }
        basis[r] = c;
        ++iterations;
    }

    // returns: 0 optimal, 1 unbounded, 2 iteration limit
    int run(std::vector<double>& z, bool allow_artificial, const Options& opt, long max_iter) {
        int degenerate = 0;
        bool bland = false;
        const double* rhs = col(W - 1);
        while (true) {
            if (iterations >= max_iter) return 2;
            int c = -1;
            double best = 0;
            for (int j = 0; j < ncol; ++j) {
                if (!allow_artificial && artificial[j]) continue;
                if (z[j] >= -opt.tol) continue;
                if (bland) { c = j; break; }
                double score = opt.steepest_edge ? z[j] * z[j] / norm2[j] : -z[j];
                if (score > best) { best = score; c = j; }
            }
            if (c < 0) return 0;

            // Harris two-pass: bound the step with a small slack, then take the largest pivot
            const double* cc = col(c);
            double theta = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i) {
                double a = cc[i];
                if (a <= kPivotTol) continue;
                theta = std::min(theta, (std::max(rhs[i], 0.0) + kHarris) / a);
            }
            int r = -1;
            double ratio = 0, piv = 0;
            for (int i = 0; i < m; ++i) {
                double a = cc[i];
                if (a <= kPivotTol) continue;
                double q = std::max(rhs[i], 0.0) / a;
                if (q > theta) continue;
                bool take = r < 0 || (bland ? basis[i] < basis[r] : a > piv);
                if (take) { r = i; ratio = q; piv = a; }
            }
            if (r < 0) return 1;
            if (ratio <= 1e-12) {
                if (++degenerate > opt.bland_after) bland = true;
            } else {
                degenerate = 0;
                bland = false;
            }
            pivot(r, c);
        }
    }

    // recompute basic values as B^-1 b using the identity columns
    void refresh_rhs() {
        double* rhs = col(W - 1);
        std::fill(rhs, rhs + m, 0.0);
        for (int k = 0; k < m; ++k) {
            if (b[k] == 0.0) continue;
            const double* ck = col(id_col[k]);
            for (int i = 0; i < m; ++i) rhs[i] += ck[i] * b[k];
        }
    }

    // restore primal feasibility keeping z dual feasible; 0 ok, 1 infeasible, 2 limit
    int dual(const std::vector<double>& z, long max_iter) {
        const int rhs = W - 1;
        while (true) {
            if (iterations >= max_iter) return 2;
            int r = -1;
            double worst = -1e-11;
            for (int i = 0; i < m; ++i) {
                double v = at(i, rhs);
                if (v < worst) { worst = v; r = i; }
            }
            if (r < 0) return 0;
            double theta = std::numeric_limits<double>::infinity();
            for (int j = 0; j < ncol; ++j) {
                double a = at(r, j);
                if (artificial[j] || a >= -kPivotTol) continue;
                theta = std::min(theta, (std::max(z[j], 0.0) + kHarris) / -a);
            }
            int c = -1;
            double piv = 0;
            for (int j = 0; j < ncol; ++j) {
                double a = at(r, j);
                if (artificial[j] || a >= -kPivotTol) continue;
                if (std::max(z[j], 0.0) / -a > theta) continue;
                if (-a > piv) { c = j; piv = -a; }
            }
            if (c < 0) return 1;
            pivot(r, c);
        }
    }
};

}  // namespace

Solution solve(const Problem& P, const Options& opt) {
    Solution sol;
    const int n = P.n_vars;
    const int m = static_cast<int>(P.rows.size());
    std::vector<double> lower(n, 0.0), obj(n, 0.0);
    for (int j = 0; j < n && j < (int)P.lower.size(); ++j) lower[j] = P.lower[j];
    for (int j = 0; j < n && j < (int)P.objective.size(); ++j) obj[j] = P.objective[j];
    for (const Row& r : P.rows)
        for (auto [j, a] : r.coef)
            if (j < 0 || j >= n || !std::isfinite(a)) {
                sol.message = "malformed row";
                return sol;
            }

    Tableau tb;
    tb.m = m;
    // normalized senses; count columns
    std::vector<Sense> sense(m);
    tb.sign.assign(m, 1.0);
    tb.b.assign(m, 0.0);
    int extra = 0;
    for (int i = 0; i < m; ++i) {
        const Row& r = P.rows[i];
        double rhs = r.rhs;
        for (auto [j, a] : r.coef) rhs -= a * lower[j];
        Sense s = r.sense;
        double sg = 1.0;
        if (rhs < 0 || (s == Sense::ge && rhs == 0)) {
            sg = -1.0;
            rhs = -rhs;
            if (s == Sense::le) s = Sense::ge;
            else if (s == Sense::ge) s = Sense::le;
        }
        sense[i] = s;
        tb.sign[i] = sg;
        tb.b[i] = rhs;
        extra += (s == Sense::ge) ? 2 : 1;
    }
    tb.ncol = n + extra;
    tb.W = tb.ncol + 1;
    tb.T.assign(std::size_t(m) * tb.W, 0.0);
    tb.z1.assign(tb.W, 0.0);
    tb.z2.assign(tb.W, 0.0);
    tb.basis.assign(m, -1);
    tb.artificial.assign(tb.ncol, 0);
    tb.id_col.assign(m, -1);

    // small distinct rhs shifts on slack rows break the heavy degeneracy;
    // the true rhs is restored after phase 2 and repaired by dual simplex
    std::vector<double> shift(m, 0.0);
    if (opt.perturb > 0) {
        uint64_t h = 0x9E3779B97F4A7C15ull;
        for (int i = 0; i < m; ++i) {
            h ^= h >> 27; h *= 0x3C79AC492BA7B653ull; h ^= h >> 33;
            if (sense[i] == Sense::le) shift[i] = opt.perturb * (1.0 + (h >> 11) * 0x1.0p-53) * std::max(1.0, tb.b[i]);
        }
    }

    int col = n;
    bool need_phase1 = false;
    for (int i = 0; i < m; ++i) {
        for (auto [j, a] : P.rows[i].coef) tb.at(i, j) += tb.sign[i] * a;
        tb.at(i, tb.W - 1) = tb.b[i] + shift[i];
        if (sense[i] == Sense::le) {
            tb.at(i, col) = 1.0;
            tb.id_col[i] = col;
            tb.basis[i] = col++;
        } else {
            if (sense[i] == Sense::ge) tb.at(i, col++) = -1.0;
            tb.at(i, col) = 1.0;
            tb.artificial[col] = 1;
            tb.id_col[i] = col;
            tb.basis[i] = col++;
            need_phase1 = true;
        }
    }
    for (int j = 0; j < n; ++j) tb.z2[j] = -obj[j];

    tb.track_norms = opt.steepest_edge;
    if (tb.track_norms) tb.init_norms();
    long max_iter = opt.max_iterations > 0 ? opt.max_iterations : 50L * (m + tb.ncol) + 1000;

    if (need_phase1) {
        // maximize -(sum of artificials)
        for (int i = 0; i < m; ++i) {
            if (!tb.artificial[tb.basis[i]]) continue;
            for (int j = 0; j < tb.W; ++j) tb.z1[j] -= tb.at(i, j);
            tb.z1[tb.basis[i]] = 0.0;
        }
        int rc = tb.run(tb.z1, true, opt, max_iter);
        if (rc == 2) {
            sol.status = Status::numerical_failure;
            sol.message = "iteration limit in phase 1";
            sol.iterations = tb.iterations;
            return sol;
        }
        double infeas = -tb.z1[tb.W - 1];
        double bscale = 1.0;
        for (double x : tb.b) bscale = std::max(bscale, x);
        if (infeas > opt.tol * bscale) {
            sol.status = Status::infeasible;
            sol.iterations = tb.iterations;
            return sol;
        }
        // drive zero-level artificials out of the basis where possible
        for (int i = 0; i < m; ++i) {
            if (!tb.artificial[tb.basis[i]]) continue;
            int c = -1;
            double best = kPivotTol;
            for (int j = 0; j < tb.ncol; ++j)
                if (!tb.artificial[j] && std::abs(tb.at(i, j)) > best) { best = std::abs(tb.at(i, j)); c = j; }
            if (c >= 0) tb.pivot(i, c);
        }
    }

    int rc = tb.run(tb.z2, false, opt, max_iter);
    if (rc == 0 && opt.perturb > 0) {
        tb.refresh_rhs();
        for (int round = 0; round < 8 && rc == 0; ++round) {
            int d = tb.dual(tb.z2, max_iter);
            if (d == 1) {
                sol.status = Status::infeasible;
                sol.iterations = tb.iterations;
                return sol;
            }
            if (d == 2) { rc = 2; break; }
            long before = tb.iterations;
            rc = tb.run(tb.z2, false, opt, max_iter);
            if (tb.iterations == before) break;
        }
    }
    sol.iterations = tb.iterations;
    if (rc == 2) {
        sol.status = Status::numerical_failure;
        sol.message = "iteration limit";
        return sol;
    }
    if (rc == 1) {
        sol.status = Status::unbounded;
        return sol;
    }

    tb.refresh_rhs();
    sol.values = lower;
    for (int i = 0; i < m; ++i) {
        int c = tb.basis[i];
        if (c < n) sol.values[c] = lower[c] + std::max(0.0, tb.at(i, tb.W - 1));
    }
    sol.duals.resize(m);
    for (int i = 0; i < m; ++i) sol.duals[i] = tb.sign[i] * tb.z2[tb.id_col[i]];
    sol.objective = 0;
    for (int j = 0; j < n; ++j) sol.objective += obj[j] * sol.values[j];
    sol.max_violation = max_violation(P, sol.values);
    if (sol.max_violation > opt.tol) {
        sol.status = Status::numerical_failure;
        sol.message = "residual " + std::to_string(sol.max_violation) + " exceeds tolerance";
        return sol;
    }
    sol.status = Status::optimal;
    return sol;
}

}  // namespace pecap::lp
