#pragma once

#include <string>
#include <utility>
#include <vector>

namespace pecap::lp {

enum class Sense { le, ge, eq };
enum class Status { optimal, infeasible, unbounded, numerical_failure };

const char* to_string(Status s);

struct Row {
    std::vector<std::pair<int, double>> coef;
    Sense sense = Sense::le;
    double rhs = 0.0;
};

// maximize objective . x  subject to rows, x >= lower (default 0)
struct Problem {
    int n_vars = 0;
    std::vector<double> objective;
    std::vector<double> lower;
    std::vector<Row> rows;

    int add_var(double obj = 0.0, double lb = 0.0);
    void add_row(Row r) { rows.push_back(std::move(r)); }
};

struct Solution {
    Status status = Status::numerical_failure;
    std::vector<double> values;
    std::vector<double> duals;   // one per row, sign convention of the input rows
    double objective = 0.0;
    long iterations = 0;
    double max_violation = 0.0;  // scaled residual of the returned point
    std::string message;
};

struct Options {
    double tol = 1e-9;
    int bland_after = 64;      // consecutive degenerate pivots before switching to Bland
    long max_iterations = 0;   // 0 = automatic
    bool steepest_edge = false;
    double perturb = 1e-7;     // relative rhs shift on slack rows, 0 disables
};

Solution solve(const Problem& problem, const Options& opts = {});

// scaled residual of x against the rows (and lower bounds)
double max_violation(const Problem& problem, const std::vector<double>& x);

}  // namespace pecap::lp
