#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "pecap/bounds.hpp"
#include "pecap/schemes.hpp"

using namespace pecap;
using json = nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ChannelOpts {
    std::string spec_file;
    std::vector<double> independent, symmetric;
};

void add_channel_opts(CLI::App* app, ChannelOpts& c) {
    auto* f = app->add_option("--spec", c.spec_file, "channel spec JSON file");
    auto* i = app->add_option("--independent", c.independent, "marginals p1,..,pK")->delimiter(',');
    auto* s = app->add_option("--symmetric", c.symmetric, "symmetric mass m0,..,mK")->delimiter(',');
    f->excludes(i)->excludes(s);
    i->excludes(s);
}

ChannelSpec load_channel(const ChannelOpts& c) {
    if (!c.spec_file.empty()) {
        std::ifstream in(c.spec_file);
        if (!in) throw UsageError("cannot open spec file " + c.spec_file);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw UsageError(std::string("bad spec JSON: ") + e.what());
        }
        return spec_from_json(j);
    }
    if (!c.independent.empty()) return make_spatially_independent(c.independent);
    if (!c.symmetric.empty()) return make_symmetric(static_cast<int>(c.symmetric.size()) - 1, c.symmetric);
    throw UsageError("one of --spec, --independent, --symmetric is required");
}

std::string fmt(double x) {
    std::ostringstream o;
    o << std::setprecision(10) << x;
    return o.str();
}

std::string join(const std::vector<double>& v, char sep = ';') {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + fmt(v[i]);
    return s;
}

// writes to --out or stdout
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw UsageError("cannot open output " + path);
        }
    }
    std::ostream& os() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

void emit(const Table& t, const json& config, const json& extra, const std::string& format, const std::string& out) {
    Sink sink(out);
    auto& os = sink.os();
    if (format == "json") {
        json j;
        j["schema"] = kSchemaVersion;
        j["config"] = config;
        j["columns"] = t.header;
        j["rows"] = t.rows;
        for (auto& [k, v] : extra.items()) j[k] = v;
        os << j.dump(2) << "\n";
        return;
    }
    os << "# schema " << kSchemaVersion << " config " << config.dump() << "\n";
    for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
    os << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
        os << "\n";
    }
}

// ---------------------------------------------------------------- bounds

struct BoundsArgs {
    ChannelOpts ch;
    int directions = 10;
    uint64_t seed = 1;
    std::vector<double> rates;
    std::string out, format = "csv";
};

int cmd_bounds(const BoundsArgs& a) {
    if (a.directions < 0) throw UsageError("--directions must be >= 0");
    ChannelSpec spec = load_channel(a.ch);
    const int K = spec.K();
    if (K > 8) throw UsageError("bounds: the inner-bound LP is limited to K <= 8");
    SubsetOrdering ord = cardinality_ordering(K);
    json config = {{"command", "bounds"}, {"spec", spec_to_json(spec)}, {"directions", a.directions},
                   {"seed", a.seed}};

    Table t;
    t.header = {"direction", "t_outer", "t_inner", "defi", "status"};
    std::vector<std::vector<double>> dirs;
    if (!a.rates.empty()) {
        if ((int)a.rates.size() != K) throw UsageError("--rates needs K entries");
        dirs.push_back(a.rates);
        config["rates"] = a.rates;
    } else {
        std::mt19937_64 rng(a.seed);
        for (int i = 0; i < a.directions; ++i) dirs.push_back(sample_direction(K, rng));
    }
    double worst = 0;
    int failures = 0;
    for (const auto& d : dirs) {
        OuterResult o = outer_bound_max_t(spec, d);
        if (o.t <= 0) {
            t.rows.push_back({join(d), "0", "0", "0", "zero_outer"});
            continue;
        }
        DeficiencyResult r = deficiency(spec, d, ord);
        bool ok = r.status == lp::Status::optimal;
        if (ok) worst = std::max(worst, r.defi);
        else ++failures;
        t.rows.push_back({join(d), fmt(r.t_outer), ok ? fmt(r.t_inner) : "", ok ? fmt(r.defi) : "",
                          lp::to_string(r.status)});
    }
    if (!dirs.empty()) t.rows.push_back({"max", "", "", fmt(worst), failures ? "lp_failures=" + std::to_string(failures) : "ok"});
    emit(t, config, {{"max_defi", worst}, {"lp_failures", failures}}, a.format, a.out);
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimArgs {
    ChannelOpts ch;
    std::string scheme = "four_phase";
    std::vector<double> rates;
    bool exact = false;
    double epsilon = 0.05;
    long n = 20000;
    int trials = 10;
    uint64_t seed = 1;
    uint32_t q = 65536;
    bool deterministic = false, trace = false;
    std::string out, format = "json";
};

int cmd_simulate(const SimArgs& a) {
    if (a.n <= 0) throw UsageError("--n must be > 0");
    if (a.trials < 0) throw UsageError("--trials must be >= 0");
    if (!(a.epsilon >= 0 && a.epsilon < 1)) throw UsageError("--epsilon must be in [0,1)");
    if (a.q < 2 || (a.q & (a.q - 1)) || a.q > 65536) throw UsageError("--q must be a power of two <= 65536");
    if (a.scheme != "four_phase" && a.scheme != "two_phase" && a.scheme != "sequential")
        throw UsageError("--scheme must be four_phase, two_phase or sequential");
    ChannelSpec spec = load_channel(a.ch);
    const int K = spec.K();
    if (a.scheme == "four_phase" && K != 3) throw UsageError("four_phase needs K=3");
    if (a.scheme == "two_phase" && K < 2) throw UsageError("two_phase needs K >= 2");
    if (a.scheme == "sequential" && K > 8) throw UsageError("sequential needs K <= 8");

    std::vector<double> dir = a.rates.empty() ? std::vector<double>(K, 1.0) : a.rates;
    if ((int)dir.size() != K) throw UsageError("--rates needs K entries");
    for (double x : dir)
        if (!(x >= 0)) throw UsageError("--rates must be >= 0");

    SubsetOrdering ord = cardinality_ordering(K);
    RateVector rates = dir;
    double boundary_t = 1;
    ScheduleW sched;
    if (a.scheme == "sequential") sched = schedule_from_lp(dir, spec, ord);
    if (!a.exact) {
        boundary_t = a.scheme == "sequential" ? inner_bound_max_t(spec, dir, ord).t : outer_bound_max_t(spec, dir).t;
        for (double& r : rates) r *= boundary_t * (1 - a.epsilon);
    }

    PeOptions opt;
    opt.q = a.q;
    opt.coeffs = a.deterministic ? CoeffMode::deterministic : CoeffMode::random;
    opt.trace = a.trace;

    json config = {{"command", "simulate"}, {"scheme", a.scheme}, {"spec", spec_to_json(spec)},
                   {"direction", dir}, {"exact_rates", a.exact}, {"epsilon", a.epsilon}, {"n", a.n},
                   {"trials", a.trials}, {"seed", a.seed}, {"q", a.q}, {"deterministic", a.deterministic}};
    json trials = json::array();
    int ok = 0;
    double slots = 0;
    for (int i = 0; i < a.trials; ++i) {
        uint64_t s = a.seed + static_cast<uint64_t>(i);
        SimulationResult r;
        if (a.scheme == "four_phase") r = four_phase_k3(rates, spec, a.n, s, opt);
        else if (a.scheme == "two_phase") r = two_phase_baseline(rates, spec, a.n, s, a.q);
        else r = sequential_pe(rates, spec, sched, a.n, s, opt);
        ok += r.success();
        slots += r.slots_used;
        json tr = {{"seed", s}, {"slots_used", r.slots_used}, {"success", r.success()},
                   {"decoded", r.decoded}, {"shortfall", r.shortfall}};
        json ph = json::array();
        for (auto& [name, len] : r.phases) ph.push_back({{"phase", name}, {"slots", len}});
        tr["phases"] = ph;
        if (a.trace) {
            json tj = json::array();
            for (const auto& rec : r.trace) tj.push_back({rec.t, rec.T, rec.S_rx, rec.before});
            tr["trace"] = tj;
        }
        trials.push_back(tr);
    }
    json summary = {{"rates", rates}, {"boundary_t", boundary_t}, {"successes", ok}, {"trials", a.trials}};
    if (a.trials > 0) {
        summary["success_rate"] = static_cast<double>(ok) / a.trials;
        summary["mean_slots"] = slots / a.trials;
    }

    Sink sink(a.out);
    if (a.format == "csv") {
        Table t;
        t.header = {"seed", "slots_used", "success", "shortfall"};
        for (auto& tr : trials)
            t.rows.push_back({std::to_string(tr["seed"].get<uint64_t>()), std::to_string(tr["slots_used"].get<long>()),
                              tr["success"].get<bool>() ? "1" : "0", tr["shortfall"].get<std::string>()});
        emit(t, config, {}, "csv", a.out);
    } else {
        sink.os() << json{{"schema", kSchemaVersion}, {"config", config}, {"summary", summary}, {"trials", trials}}.dump(2)
                  << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- figures

struct FigArgs {
    std::string which;
    int points = 21;
    std::string out, format = "csv";
};

std::vector<double> spaced(double p, int K) {
    std::vector<double> v;
    for (int k = 1; k <= K; ++k) v.push_back(p + (k - 1) * (1 - p) / (K - 1));
    return v;
}

double tdma_perf_fair_sum(const std::vector<double>& p) {
    double s = 0;
    for (double x : p) {
        if (x <= 0) return 0;
        s += 1 / x;
    }
    return p.size() / s;
}

// each session gets p_k R and the shares sum to one, so R = 1/K
double tdma_prop_fair_sum(const std::vector<double>& p) {
    double s = 0;
    for (double x : p) s += x;
    return s / p.size();
}

// capacity sum along dir from the outer bound, with the LP inner bound alongside
std::pair<double, double> lp_sum(const std::vector<double>& p, const std::vector<double>& dir) {
    ChannelSpec spec = make_spatially_independent(p);
    double sum = 0;
    for (double x : dir) sum += x;
    double to = outer_bound_max_t(spec, dir).t;
    if (to <= 0) return {0, 0};
    InnerMax in = inner_bound_max_t(spec, dir, cardinality_ordering(spec.K()));
    return {to * sum, in.status == lp::Status::optimal ? in.t * sum : std::nan("")};
}

int cmd_figures(const FigArgs& a) {
    if (a.points < 2) throw UsageError("--points must be >= 2");
    json config = {{"command", "figures"}, {"which", a.which}, {"points", a.points}};
    Table t;
    auto grid = [&](double lo, double hi, int i) { return lo + (hi - lo) * i / (a.points - 1); };
    if (a.which == "fig5" || a.which == "fig6") {
        std::vector<int> Ks = a.which == "fig5" ? std::vector<int>{2, 4} : std::vector<int>{20, 100};
        t.header = {"K", "p", "capacity_sum", "tdma_sum"};
        for (int K : Ks)
            for (int i = 0; i < a.points; ++i) {
                double p = grid(0.01, 1.0, i);
                std::vector<double> pv(K, p);
                t.rows.push_back({std::to_string(K), fmt(p), fmt(sum_rate_perf_fair(pv)), fmt(tdma_perf_fair_sum(pv))});
            }
    } else if (a.which == "fig7") {
        const int K = 6;
        t.header = {"p",          "perf_fair_outer", "perf_fair_inner", "prop_fair_outer", "prop_fair_inner",
                    "tdma_perf",  "tdma_prop",       "sym_capacity",    "sym_tdma"};
        for (int i = 0; i < a.points; ++i) {
            double p = grid(0.0, 0.95, i);
            std::vector<double> pv = spaced(p, K);
            auto perf = lp_sum(pv, std::vector<double>(K, 1.0));
            auto prop = lp_sum(pv, pv);
            std::vector<double> sym(K, p);
            t.rows.push_back({fmt(p), fmt(perf.first), fmt(perf.second), fmt(prop.first), fmt(prop.second),
                              fmt(tdma_perf_fair_sum(pv)), fmt(tdma_prop_fair_sum(pv)),
                              fmt(p > 0 ? sum_rate_perf_fair(sym) : 0.0), fmt(p)});
        }
    } else if (a.which == "fig8") {
        const int K = 20;
        t.header = {"p", "perf_fair_capacity", "prop_fair", "prop_fair_kind", "tdma_perf", "tdma_prop"};
        for (int i = 0; i < a.points; ++i) {
            double p = grid(0.0, 0.95, i);
            std::vector<double> pv = spaced(p, K);
            double perf = p > 0 ? sum_rate_perf_fair(pv) : 0.0;
            double s = 0;
            for (double x : pv) s += x;
            double prop = s / osf_load(pv, pv);
            bool cap = is_one_sidedly_fair(pv, pv);
            t.rows.push_back({fmt(p), fmt(perf), fmt(prop), cap ? "capacity" : "outer_bound",
                              fmt(tdma_perf_fair_sum(pv)), fmt(tdma_prop_fair_sum(pv))});
        }
    } else {
        throw UsageError("unknown figure '" + a.which + "' (fig5, fig6, fig7, fig8)");
    }
    emit(t, config, {}, a.format, a.out);
    return 0;
}

// ---------------------------------------------------------------- check

bool replay_example() {
    ChannelSpec spec = make_spatially_independent({0.5, 0.5, 0.5});
    PeRun run(spec, {1, 1, 1}, PeOptions{}, 0);
    const mask_t b1 = bit(1), b2 = bit(2), b3 = bit(3);
    run.select(b1, {0}, {1});
    run.step(b2);
    run.select(b2, {1}, {1});
    run.step(b1);
    run.select(b3, {2}, {1});
    run.step(b1 | b2);
    run.select(b1 | b2, {0, 1}, {1, 1});
    run.step(b3);
    bool ok = run.source().packets[0].overhearing == (b2 | b3) && run.source().packets[1].overhearing == (b1 | b3) &&
              run.source().packets[2].overhearing == (b1 | b2);
    run.select(b1 | b2 | b3, {0, 1, 2}, {1, 0, 1});
    run.step(b1 | b2 | b3);
    auto r = run.finish(5);
    return ok && r.success();
}

int cmd_check(uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.05, 0.95);
    int bad = 0;
    auto line = [&](bool ok, const std::string& what) {
        std::cout << (ok ? "PASS " : "FAIL ") << what << "\n";
        bad += !ok;
    };

    line(replay_example(), "worked example replay");

    double worst = 0;
    for (int i = 0; i < 20; ++i) {
        ChannelSpec spec = make_spatially_independent({U(rng), U(rng)});
        auto d = sample_direction(2, rng);
        double lp = inner_bound_max_t(spec, d, cardinality_ordering(2)).t;
        double cf = outer_bound_max_t(spec, d).t;
        worst = std::max(worst, std::abs(lp - cf) / cf);
    }
    line(worst <= 1e-6, "K=2 LP equals closed form (max rel err " + fmt(worst) + ")");

    long f3 = 0, f4 = 0;
    PeOptions o;
    o.check_lemmas = true;
    for (int i = 0; i < 50; ++i) {
        ChannelSpec spec = make_spatially_independent({U(rng), U(rng), U(rng)});
        RateVector r(3, 0.9 / outer_bound_load(spec, {1, 1, 1}));
        auto res = four_phase_k3(r, spec, 12, seed + i, o);
        f3 += res.lemma3_failures;
        f4 += res.lemma4_failures;
    }
    line(f3 == 0 && f4 <= 1, "span invariants on 50 micro-runs (" + std::to_string(f3) + "/" + std::to_string(f4) + ")");

    bool osf = true;
    for (int i = 0; i < 10; ++i) {
        std::vector<double> p{U(rng), U(rng), U(rng)};
        std::sort(p.begin(), p.end());
        RateVector r{1 / (1 - p[0]), 1 / (1 - p[1]), 1 / (1 - p[2])};
        double L = osf_load(p, r);
        for (double& x : r) x /= L;
        ChannelSpec spec = make_spatially_independent(p);
        SubsetOrdering ord = cardinality_ordering(3);
        RateVector in = r, out = r;
        for (double& x : in) x *= 1 - 1e-6;
        for (double& x : out) x *= 1 + 1e-3;
        osf = osf && inner_bound_feasible(spec, in, ord).status == InnerStatus::feasible &&
              inner_bound_feasible(spec, out, ord).status == InnerStatus::infeasible;
    }
    line(osf, "one-sidedly fair boundary accepted inside, rejected outside");

    double ident = 0;
    for (int i = 0; i < 20; ++i) {
        std::vector<double> p{U(rng), U(rng), U(rng), U(rng)};
        ChannelSpec spec = make_spatially_independent(p);
        mask_t S = static_cast<mask_t>(rng() % 15);
        double s = 0;
        for (mask_t sub = S;; sub = (sub - 1) & S) {
            s += L_S(spec, sub);
            if (sub == 0) break;
        }
        ident = std::max(ident, std::abs(s - 1 / spec.p_union(full_mask(4) & ~S)));
    }
    line(ident <= 1e-10, "subset sum of L_S");
    return bad ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pecap: broadcast erasure channel capacity bounds and packet evolution coding"};
    app.require_subcommand(1);

    BoundsArgs ba;
    auto* b = app.add_subcommand("bounds", "outer/inner bounds and deficiency along directions");
    add_channel_opts(b, ba.ch);
    b->add_option("--directions", ba.directions, "random directions");
    b->add_option("--seed", ba.seed);
    b->add_option("--rates", ba.rates, "a single direction instead of random ones")->delimiter(',');
    b->add_option("--out", ba.out);
    b->add_option("--format", ba.format)->check(CLI::IsMember({"csv", "json"}));

    SimArgs sa;
    auto* s = app.add_subcommand("simulate", "run a coding scheme over the channel");
    add_channel_opts(s, sa.ch);
    s->add_option("--scheme", sa.scheme)->check(CLI::IsMember({"four_phase", "two_phase", "sequential"}));
    s->add_option("--rates", sa.rates, "rate direction; scaled to the boundary times (1-epsilon)")->delimiter(',');
    s->add_flag("--exact-rates", sa.exact, "use --rates as given");
    s->add_option("--epsilon", sa.epsilon);
    s->add_option("--n", sa.n);
    s->add_option("--trials", sa.trials);
    s->add_option("--seed", sa.seed);
    s->add_option("--q", sa.q, "field size, power of two");
    s->add_flag("--deterministic", sa.deterministic, "deterministic mixing coefficients");
    s->add_flag("--trace", sa.trace, "dump per-slot records");
    s->add_option("--out", sa.out);
    s->add_option("--format", sa.format)->check(CLI::IsMember({"csv", "json"}));

    FigArgs fa;
    auto* f = app.add_subcommand("figures", "curve data for the sum-rate figures");
    f->add_option("--which", fa.which)->required();
    f->add_option("--points", fa.points);
    f->add_option("--out", fa.out);
    f->add_option("--format", fa.format)->check(CLI::IsMember({"csv", "json"}));

    uint64_t check_seed = 7;
    auto* c = app.add_subcommand("check", "quick self-checks; exit 2 on failure");
    c->add_option("--seed", check_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*b) return cmd_bounds(ba);
        if (*s) return cmd_simulate(sa);
        if (*f) return cmd_figures(fa);
        if (*c) return cmd_check(check_seed);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failed: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
