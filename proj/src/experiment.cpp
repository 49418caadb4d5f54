#include "flatlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>

#include "flatlab/bayes.hpp"
#include "flatlab/parallel.hpp"
#include "flatlab/svg.hpp"

namespace flatlab {

namespace fs = std::filesystem;

std::string version_string() {
#ifdef FLATLAB_VERSION
    return FLATLAB_VERSION;
#else
    return "unknown";
#endif
}

int resolve_threads(std::optional<int> flag) {
    if (flag && *flag >= 1) return *flag;
    if (const char* env = std::getenv("FLATLAB_THREADS")) {
        try {
            int t = std::stoi(env);
            if (t >= 1) return t;
        } catch (const std::logic_error&) {
        }
    }
    return 1;
}

// ---------------------------------------------------------------- tables

CsvTable rs_table(const std::vector<RsRow>& rows) {
    CsvTable t;
    t.header = {"alpha", "delta", "rho", "lambda", "bias_policy", "b", "M", "Q", "dq", "gen_err",
                "train_err", "train_loss", "test_loss", "converged", "iters"};
    for (const auto& r : rows)
        t.add_row({format_number(r.alpha), format_number(r.delta), format_number(r.rho), format_number(r.lambda),
                   r.bias_policy, format_number(r.b), format_number(r.m), format_number(r.q_norm), format_number(r.dq),
                   format_number(r.gen_err), format_number(r.train_err), format_number(r.train_loss),
                   format_number(r.test_loss), format_bool(r.converged), std::to_string(r.iters)});
    return t;
}

namespace {

std::string y_label(int y) { return y == 0 ? "inf" : std::to_string(y); }

std::vector<std::string> replicated_cells(const ReplicatedRow& r) {
    return {format_number(r.alpha),     format_number(r.delta), format_number(r.rho),   y_label(r.y),
            format_number(r.cos_theta), format_number(r.norm),  format_number(r.b),     format_number(r.m),
            format_number(r.dq0),       format_number(r.q_bar), format_number(r.b_bar), format_number(r.train_err),
            format_number(r.gen_err_center), format_bool(r.converged)};
}

const std::vector<std::string> kReplicatedHeader = {"alpha", "delta", "rho",   "y",     "cos_theta", "norm", "b",
                                                    "M",     "dq0",   "Q_bar", "b_bar", "train_err", "gen_err_center",
                                                    "converged"};

}  // namespace

CsvTable replicated_table(const std::vector<ReplicatedRow>& rows) {
    CsvTable t;
    t.header = kReplicatedHeader;
    for (const auto& r : rows) t.add_row(replicated_cells(r));
    return t;
}

CsvTable trajectory_table(const std::vector<TrajectoryRow>& rows) {
    CsvTable t;
    t.header = {"epoch", "replica", "train_loss", "train_err", "gen_err", "norm", "bias", "mean_pairwise_d", "lambda_t"};
    for (const auto& r : rows)
        t.add_row({std::to_string(r.epoch), std::to_string(r.replica), format_number(r.train_loss),
                   format_number(r.train_err), format_number(r.gen_err), format_number(r.norm), format_number(r.bias),
                   format_number(r.mean_pairwise_d), format_number(r.lambda_t)});
    return t;
}

CsvTable fp_table(const std::vector<FpTableRow>& rows) {
    CsvTable t;
    t.header = {"alpha", "delta", "rho", "lambda_r", "b", "cutoff_policy", "eps_bar", "d", "S", "beta",
                "free_entropy", "local_energy", "local_entropy_norm", "converged"};
    for (const auto& r : rows) {
        const auto& p = r.point;
        t.add_row({format_number(r.alpha), format_number(r.delta), format_number(r.rho), format_number(r.lambda_r),
                   format_number(r.b), r.cutoff_policy, format_number(p.eps_bar), format_number(p.d), format_number(p.s),
                   format_number(p.beta), format_number(p.free_entropy), format_number(p.local_energy),
                   format_number(p.local_entropy_norm), format_bool(p.converged)});
    }
    return t;
}

ReplicatedRow measure_ensemble(const Dataset& data, const ReplicaEnsemble& e, int y, double cos_theta, double norm) {
    const double p = double(data.n_patterns());
    ReplicatedRow row{data.alpha(), data.delta, data.rho, y, cos_theta, norm, 0.0, 0.0, NAN, NAN, NAN, 0.0, NAN, true};
    for (const auto& r : e.replicas) {
        Overlaps ov = measure_overlaps(r, data.centroid);
        row.m += ov.m / double(e.replicas.size());
        row.b += r.bias / double(e.replicas.size());
    }
    // The replicated theory's training error refers to the barycenter weights
    // read out with the replicas' mean bias (not the rescaled center bias).
    row.train_err = double(count_errors(LinearClassifier{e.center.weights, row.b}, data)) / p;
    Overlaps oc = measure_overlaps(e.center, data.centroid);
    row.q_bar = oc.q_norm;
    row.b_bar = e.center.bias;
    if (oc.q_norm > 0.0) {
        row.gen_err_center = gen_error_closed_form(oc, e.center.bias, data.delta, data.rho);
    } else {
        row.converged = false;
    }
    return row;
}

// ---------------------------------------------------------------- validation

namespace {

const std::set<std::string> kKinds = {"rs-sweep", "fp-curve", "replicated-sweep", "bayes",
                                      "simulate-gd", "simulate-rsgd", "compare"};
const std::set<std::string> kSections = {"model", "rs", "fp", "replicated", "bayes", "gd", "rsgd",
                                         "compare", "solver", "output"};
const std::set<std::string> kKeys = {
    "model.alpha", "model.delta", "model.rho", "model.n_dim",
    "rs.lambda", "rs.b", "rs.learned_bias",
    "fp.lambda_r", "fp.b", "fp.d", "fp.cutoff",
    "replicated.y", "replicated.large_y", "replicated.norm", "replicated.cos_theta", "replicated.theta", "replicated.b", "replicated.learned_bias",
    "bayes.alpha",
    "gd.lambda", "gd.seeds", "gd.epochs", "gd.lr", "gd.momentum", "gd.optimizer", "gd.b", "gd.learned_bias", "gd.log_every", "gd.trajectory",
    "rsgd.y", "rsgd.norm", "rsgd.cos_theta", "rsgd.theta", "rsgd.seeds", "rsgd.epochs", "rsgd.epochs_y1", "rsgd.lr", "rsgd.lr_y1", "rsgd.momentum", "rsgd.optimizer", "rsgd.optimizer_y1", "rsgd.lambda0", "rsgd.lambda1", "rsgd.lambda_max", "rsgd.b", "rsgd.learned_bias", "rsgd.couple_bias", "rsgd.log_every", "rsgd.trajectory",
    "compare.theory", "compare.sim", "compare.tol", "compare.keys",
    "solver.damping", "solver.tol", "solver.max_iters", "solver.quad_nodes",
    "output.dir", "output.svg",
};

std::vector<std::string> kinds_of(const Config& cfg) {
    if (!cfg.has("kind")) return {};
    return cfg.strings("kind");
}

struct Checker {
    const Config& cfg;
    std::vector<std::string>& errs;

    template <class F>
    void guard(F&& f) {
        try {
            f();
        } catch (const ConfigError& e) {
            errs.push_back(e.what());
        }
    }
    void grid(const std::string& key, bool required, bool positive = false) {
        if (!cfg.has(key)) {
            if (required) errs.push_back("missing required grid '" + key + "'");
            return;
        }
        guard([&] {
            auto v = cfg.numbers(key);
            if (v.empty()) errs.push_back("grid '" + key + "' is empty");
            for (double x : v) {
                if (!std::isfinite(x)) errs.push_back("grid '" + key + "' has a non-finite entry");
                else if (positive && !(x > 0.0)) errs.push_back("grid '" + key + "' must be positive");
            }
        });
    }
    void positive(const std::string& key, bool required) {
        if (!cfg.has(key)) {
            if (required) errs.push_back("missing required key '" + key + "'");
            return;
        }
        guard([&] {
            if (!(cfg.number(key) > 0.0)) errs.push_back("'" + key + "' must be positive");
        });
    }
    void integer_at_least(const std::string& key, double lo, bool required) {
        if (!cfg.has(key)) {
            if (required) errs.push_back("missing required key '" + key + "'");
            return;
        }
        guard([&] {
            for (double v : cfg.numbers(key))
                if (!(v >= lo) || v != std::floor(v))
                    errs.push_back("'" + key + "' must hold integers >= " + format_number(lo));
        });
    }
    void boolean(const std::string& key) {
        guard([&] { cfg.boolean_or(key, false); });
    }
    void one_of(const std::string& key, const std::set<std::string>& allowed) {
        if (!cfg.has(key)) return;
        guard([&] {
            std::string v = cfg.string(key);
            if (!allowed.count(v)) errs.push_back("'" + key + "' has unknown value '" + v + "'");
        });
    }
};

}  // namespace

std::vector<std::string> validate_config(const Config& cfg) {
    std::vector<std::string> errs;
    Checker ck{cfg, errs};
    for (const auto& key : cfg.keys()) {
        auto dot = key.find('.');
        if (dot == std::string::npos) {
            if (key != "kind" && key != "seed") errs.push_back("unknown top-level key '" + key + "'");
        } else if (!kSections.count(key.substr(0, dot))) {
            errs.push_back("unknown section '" + key.substr(0, dot) + "'");
        } else if (!kKeys.count(key)) {
            errs.push_back("unknown key '" + key + "'");
        }
    }
    std::vector<std::string> kinds;
    ck.guard([&] { kinds = kinds_of(cfg); });
    if (kinds.empty()) errs.push_back("missing 'kind'");
    for (const auto& k : kinds)
        if (!kKinds.count(k)) errs.push_back("unknown kind '" + k + "'");
    if (cfg.has("seed")) ck.integer_at_least("seed", 0, false);

    auto wants = [&](const char* k) { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); };
    const bool needs_model = wants("rs-sweep") || wants("fp-curve") || wants("replicated-sweep") || wants("bayes") ||
                             wants("simulate-gd") || wants("simulate-rsgd");
    if (needs_model) {
        ck.positive("model.alpha", true);
        ck.positive("model.delta", true);
        if (!cfg.has("model.rho")) {
            errs.push_back("missing required key 'model.rho'");
        } else {
            ck.guard([&] {
                double r = cfg.number("model.rho");
                if (!(r > 0.0 && r < 1.0)) errs.push_back("'model.rho' must lie in (0,1)");
            });
        }
    }
    if (wants("simulate-gd") || wants("simulate-rsgd")) ck.integer_at_least("model.n_dim", 1, true);
    if (cfg.has("solver.damping")) {
        ck.guard([&] {
            double d = cfg.number("solver.damping");
            if (!(d > 0.0 && d <= 1.0)) errs.push_back("'solver.damping' must lie in (0,1]");
        });
    }
    ck.positive("solver.tol", false);
    ck.integer_at_least("solver.max_iters", 1, false);
    ck.integer_at_least("solver.quad_nodes", 2, false);
    ck.boolean("output.svg");
    if (cfg.has("output.dir")) ck.guard([&] { cfg.string("output.dir"); });

    if (wants("rs-sweep")) {
        ck.grid("rs.lambda", true);
        ck.grid("rs.b", false);
        ck.boolean("rs.learned_bias");
        if (!cfg.has("rs.b") && !cfg.boolean_or("rs.learned_bias", false))
            errs.push_back("rs-sweep needs 'rs.b' or 'rs.learned_bias = true'");
        ck.guard([&] {
            if (!cfg.has("rs.lambda")) return;
            double alpha = cfg.has("model.alpha") ? cfg.number("model.alpha") : 1.0;
            for (double l : cfg.numbers("rs.lambda"))
                if (l < 0.0 || (l == 0.0 && alpha <= 1.0))
                    errs.push_back("'rs.lambda' entries must be positive (or zero with alpha > 1)");
        });
    }
    if (wants("fp-curve")) {
        ck.grid("fp.lambda_r", true, true);
        ck.grid("fp.d", false, true);
        ck.guard([&] {
            if (cfg.has("fp.d"))
                for (double d : cfg.numbers("fp.d"))
                    if (d > 1.0) errs.push_back("'fp.d' entries must lie in (0, 1]");
            if (cfg.has("fp.cutoff")) {
                const ConfigValue& v = cfg.at("fp.cutoff");
                if (v.type == ConfigValue::Type::String && v.text != "reference" && v.text != "oracle")
                    errs.push_back("'fp.cutoff' must be \"reference\", \"oracle\" or a number");
                if (v.type == ConfigValue::Type::Number && !(v.number >= 0.0 && v.number <= 1.0))
                    errs.push_back("'fp.cutoff' as a number is a per-pattern rate in [0,1]");
                if (v.type != ConfigValue::Type::String && v.type != ConfigValue::Type::Number)
                    errs.push_back("'fp.cutoff' must be a string or a number");
            }
        });
    }
    auto angles = [&](const std::string& sec) {
        if (cfg.has(sec + ".cos_theta") == cfg.has(sec + ".theta"))
            errs.push_back("'" + sec + "' needs exactly one of 'cos_theta' or 'theta'");
        ck.grid(sec + ".cos_theta", false);
        ck.grid(sec + ".theta", false);
        ck.guard([&] {
            if (cfg.has(sec + ".cos_theta"))
                for (double c : cfg.numbers(sec + ".cos_theta"))
                    if (!(c >= -1.0 && c <= 1.0)) errs.push_back("'" + sec + ".cos_theta' entries must lie in [-1,1]");
        });
        ck.grid(sec + ".norm", true, true);
    };
    if (wants("replicated-sweep")) {
        ck.integer_at_least("replicated.y", 1, !cfg.boolean_or("replicated.large_y", false));
        ck.boolean("replicated.large_y");
        ck.boolean("replicated.learned_bias");
        angles("replicated");
    }
    if (wants("bayes")) ck.grid("bayes.alpha", false, true);
    if (wants("simulate-gd")) {
        ck.grid("gd.lambda", true);
        ck.integer_at_least("gd.seeds", 1, false);
        ck.integer_at_least("gd.epochs", 0, false);
        ck.positive("gd.lr", false);
        ck.one_of("gd.optimizer", {"momentum", "adam"});
        ck.boolean("gd.learned_bias");
        ck.boolean("gd.trajectory");
    }
    if (wants("simulate-rsgd")) {
        ck.integer_at_least("rsgd.y", 1, true);
        ck.integer_at_least("rsgd.seeds", 1, false);
        ck.integer_at_least("rsgd.epochs", 0, false);
        ck.integer_at_least("rsgd.epochs_y1", 0, false);
        ck.positive("rsgd.lr", false);
        ck.positive("rsgd.lr_y1", false);
        ck.one_of("rsgd.optimizer", {"momentum", "adam"});
        ck.one_of("rsgd.optimizer_y1", {"momentum", "adam"});
        ck.boolean("rsgd.learned_bias");
        ck.boolean("rsgd.couple_bias");
        ck.boolean("rsgd.trajectory");
        ck.positive("rsgd.lambda0", false);
        ck.positive("rsgd.lambda_max", false);
        angles("rsgd");
        ck.guard([&] {
            if (cfg.has("rsgd.y") && cfg.has("rsgd.seeds")) {
                auto ns = cfg.numbers("rsgd.seeds");
                if (ns.size() != 1 && ns.size() != cfg.numbers("rsgd.y").size())
                    errs.push_back("'rsgd.seeds' must hold one count or one count per entry of 'rsgd.y'");
            }
        });
    }
    if (wants("compare")) {
        for (const char* k : {"compare.theory", "compare.sim", "compare.tol"}) {
            if (!cfg.has(k)) errs.push_back(std::string("missing required key '") + k + "'");
            else ck.guard([&] { cfg.string(k); });
        }
        ck.guard([&] {
            if (cfg.has("compare.tol")) parse_tolerances(cfg.string("compare.tol"));
        });
        ck.guard([&] {
            if (cfg.has("compare.keys")) cfg.strings("compare.keys");
        });
    }
    return errs;
}

// ---------------------------------------------------------------- runners

namespace {

struct Context {
    const Config& cfg;
    std::uint64_t seed;
    int threads;
    fs::path dir;
    bool svg;
    RunOutcome& out;
    nlohmann::json& manifest;
    long convergence_failures = 0;
    bool comparison_failed = false;

    double alpha() const { return cfg.number("model.alpha"); }
    double delta() const { return cfg.number("model.delta"); }
    double rho() const { return cfg.number("model.rho"); }

    void write(const CsvTable& t, const std::string& name) {
        t.write((dir / name).string());
        out.artifacts.push_back(name);
    }
    void plot(const PlotSpec& p, const std::string& name) {
        if (!svg) return;
        write_svg(p, (dir / name).string());
        out.artifacts.push_back(name);
    }
};

RsOptions solver_options(const Config& cfg) {
    RsOptions o;
    o.fixed_point.damping = cfg.number_or("solver.damping", o.fixed_point.damping);
    o.fixed_point.tol = cfg.number_or("solver.tol", o.fixed_point.tol);
    o.fixed_point.max_iters = long(cfg.number_or("solver.max_iters", double(o.fixed_point.max_iters)));
    o.quad_nodes = int(cfg.number_or("solver.quad_nodes", o.quad_nodes));
    return o;
}

BiasPolicy bias_from(const Config& cfg, const std::string& sec) {
    if (cfg.boolean_or(sec + ".learned_bias", false)) return BiasPolicy::learned();
    return BiasPolicy::fixed(cfg.number_or(sec + ".b", 0.0));
}

std::vector<double> cos_grid(const Config& cfg, const std::string& sec) {
    if (cfg.has(sec + ".cos_theta")) return cfg.numbers(sec + ".cos_theta");
    std::vector<double> out;
    for (double t : cfg.numbers(sec + ".theta")) out.push_back(std::cos(t));
    return out;
}

// Thin a list of series to at most `limit` evenly spaced entries.
std::vector<std::size_t> thin(std::size_t n, std::size_t limit) {
    std::vector<std::size_t> idx;
    if (n <= limit) {
        for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        return idx;
    }
    for (std::size_t k = 0; k < limit; ++k) idx.push_back(k * (n - 1) / (limit - 1));
    return idx;
}

void run_rs(Context& ctx) {
    RsSweepSpec spec;
    spec.alpha = ctx.alpha();
    spec.delta = ctx.delta();
    spec.rho = ctx.rho();
    spec.lambdas = ctx.cfg.numbers("rs.lambda");
    if (ctx.cfg.has("rs.b")) spec.fixed_biases = ctx.cfg.numbers("rs.b");
    spec.learned = ctx.cfg.boolean_or("rs.learned_bias", false);
    spec.options = solver_options(ctx.cfg);
    auto rows = sweep_rs(spec, ctx.threads);
    for (const auto& r : rows)
        if (!r.converged) ++ctx.convergence_failures;
    ctx.write(rs_table(rows), "rs_sweep.csv");

    PlotSpec p{"RS generalization error", "lambda", "gen_err", true, {}};
    const std::size_t nl = spec.lambdas.size();
    const std::size_t nb = spec.fixed_biases.size();
    for (std::size_t k : thin(nb, 6)) {
        PlotSeries s{"b=" + format_number(spec.fixed_biases[k]), {}, {}, false};
        for (std::size_t i = 0; i < nl; ++i) {
            s.x.push_back(rows[k * nl + i].lambda);
            s.y.push_back(rows[k * nl + i].gen_err);
        }
        p.series.push_back(s);
    }
    if (spec.learned) {
        PlotSeries s{"learned b", {}, {}, false};
        PlotSpec path{"Learned bias along the regularization path", "Q", "b", false, {}};
        PlotSeries ps{"learned b", {}, {}, false};
        for (std::size_t i = 0; i < nl; ++i) {
            const auto& r = rows[nb * nl + i];
            s.x.push_back(r.lambda);
            s.y.push_back(r.gen_err);
            ps.x.push_back(r.q_norm);
            ps.y.push_back(r.b);
        }
        p.series.push_back(s);
        path.series.push_back(ps);
        ctx.plot(path, "learned_bias_path.svg");
    }
    ctx.plot(p, "rs_sweep.svg");
}

void run_fp(Context& ctx) {
    const double alpha = ctx.alpha(), delta = ctx.delta(), rho = ctx.rho();
    const auto lambdas = ctx.cfg.numbers("fp.lambda_r");
    const double b = ctx.cfg.number_or("fp.b", 0.0);
    CutoffPolicy policy;
    if (ctx.cfg.has("fp.cutoff")) {
        const ConfigValue& v = ctx.cfg.at("fp.cutoff");
        if (v.type == ConfigValue::Type::Number) policy = {CutoffPolicy::Kind::Value, v.number * alpha};
        else if (v.text == "oracle") policy.kind = CutoffPolicy::Kind::Oracle;
    }
    const auto d_grid = ctx.cfg.has("fp.d") ? ctx.cfg.numbers("fp.d") : default_distance_grid();
    const RsOptions ropts = solver_options(ctx.cfg);
    std::vector<FpReference> refs;
    std::vector<bool> ref_ok;
    for (double l : lambdas) {
        RsSolution sol = solve_rs(alpha, delta, rho, l, BiasPolicy::fixed(b), Loss::mse(), ropts);
        refs.push_back(FpReference::from_rs(sol, alpha, delta, rho));
        ref_ok.push_back(sol.converged);
    }
    const std::size_t nd = d_grid.size();
    std::vector<FpTableRow> rows(lambdas.size() * nd);
    parallel_for(rows.size(), ctx.threads, [&](std::size_t i) {
        const std::size_t k = i / nd;
        FpCurvePoint pt;
        if (ref_ok[k]) {
            pt = fp_curve_point(refs[k], policy, d_grid[i % nd]);
        } else {
            pt.d = d_grid[i % nd];
            pt.converged = false;
            pt.failure = "reference did not converge";
        }
        rows[i] = {alpha, delta, rho, lambdas[k], b, policy.name(), pt};
    });
    PlotSpec p{"Normalized local entropy", "d", "local_entropy_norm", true, {}};
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        PlotSeries s{"lambda=" + format_number(lambdas[k]), {}, {}, false};
        for (std::size_t j = 0; j < nd; ++j) {
            const auto& r = rows[k * nd + j];
            if (!r.point.converged) {
                ++ctx.convergence_failures;
                ctx.out.messages.push_back("fp-curve lambda=" + format_number(lambdas[k]) +
                                           " d=" + format_number(r.point.d) + ": " + r.point.failure);
            }
            s.x.push_back(r.point.d);
            s.y.push_back(r.point.local_entropy_norm);
        }
        p.series.push_back(s);
    }
    ctx.write(fp_table(rows), "fp_curve.csv");
    ctx.plot(p, "fp_curve.svg");
}

void run_replicated(Context& ctx) {
    ReplicatedSweepSpec spec;
    spec.alpha = ctx.alpha();
    spec.delta = ctx.delta();
    spec.rho = ctx.rho();
    if (ctx.cfg.has("replicated.y"))
        for (double y : ctx.cfg.numbers("replicated.y")) spec.ys.push_back(int(y));
    if (ctx.cfg.boolean_or("replicated.large_y", false)) spec.ys.push_back(0);
    spec.cos_thetas = cos_grid(ctx.cfg, "replicated");
    spec.norms = ctx.cfg.numbers("replicated.norm");
    spec.bias = ctx.cfg.number_or("replicated.b", 0.0);
    spec.learned_bias = ctx.cfg.boolean_or("replicated.learned_bias", false);
    auto rows = sweep_replicated(spec, ctx.threads);
    PlotSpec p{"Center generalization error", "norm", "gen_err_center", false, {}};
    const std::size_t nn = spec.norms.size();
    for (std::size_t g = 0; g < rows.size() / nn; ++g) {
        PlotSeries s{"y=" + y_label(rows[g * nn].y) + " cos=" + format_number(rows[g * nn].cos_theta), {}, {}, false};
        for (std::size_t j = 0; j < nn; ++j) {
            const auto& r = rows[g * nn + j];
            if (!r.converged) {
                ++ctx.convergence_failures;
                ctx.out.messages.push_back("replicated y=" + y_label(r.y) + " cos=" + format_number(r.cos_theta) +
                                           " n=" + format_number(r.norm) + ": no large-beta solution");
            }
            s.x.push_back(r.norm);
            s.y.push_back(r.gen_err_center);
        }
        p.series.push_back(s);
    }
    ctx.write(replicated_table(rows), "replicated.csv");
    ctx.plot(p, "replicated.svg");
}

void run_bayes(Context& ctx) {
    const auto alphas = ctx.cfg.has("bayes.alpha") ? ctx.cfg.numbers("bayes.alpha") : std::vector<double>{ctx.alpha()};
    CsvTable t;
    t.header = {"alpha", "delta", "rho", "m_opt", "q_opt", "b_opt", "gen_err"};
    for (double a : alphas) {
        BayesBaseline bb = bayes_baseline(a, ctx.delta(), ctx.rho());
        t.add_row({format_number(a), format_number(ctx.delta()), format_number(ctx.rho()), format_number(bb.m_opt),
                   format_number(bb.q_opt), format_number(bb.b_opt), format_number(bb.gen_err)});
    }
    ctx.write(t, "bayes.csv");
}

MixtureParams mixture(const Context& ctx) {
    MixtureParams m;
    m.n_dim = long(ctx.cfg.number("model.n_dim"));
    m.alpha = ctx.alpha();
    m.delta = ctx.delta();
    m.rho = ctx.rho();
    return m;
}

Optimizer optimizer_from(const std::string& s) { return s == "adam" ? Optimizer::AdaptiveMoment : Optimizer::PlainMomentum; }

void run_gd(Context& ctx) {
    const MixtureParams mp = mixture(ctx);
    const auto lambdas = ctx.cfg.numbers("gd.lambda");
    const long seeds = long(ctx.cfg.number_or("gd.seeds", 1));
    const BiasPolicy bias = bias_from(ctx.cfg, "gd");
    TrainConfig tc;
    tc.epochs = long(ctx.cfg.number_or("gd.epochs", 20000));
    tc.lr = ctx.cfg.number_or("gd.lr", 1e-4);
    tc.momentum = ctx.cfg.number_or("gd.momentum", 0.5);
    tc.optimizer = optimizer_from(ctx.cfg.string_or("gd.optimizer", "momentum"));
    tc.log_every = long(ctx.cfg.number_or("gd.log_every", 0));
    const bool keep_traj = ctx.cfg.boolean_or("gd.trajectory", false);

    const std::size_t nl = lambdas.size();
    std::vector<RsRow> per_seed(nl * seeds);
    std::vector<std::vector<TrajectoryRow>> traj(nl);
    parallel_for(per_seed.size(), ctx.threads, [&](std::size_t i) {
        const std::size_t k = i / seeds;
        const std::uint64_t seed = ctx.seed + (i % seeds);
        Dataset data = sample_dataset(mp, seed);
        TrainConfig c = tc;
        c.seed = seed;
        RsRow row{mp.alpha, mp.delta, mp.rho, lambdas[k], bias.name(), NAN, NAN, NAN, NAN,
                  NAN, NAN, NAN, NAN, false, tc.epochs};
        try {
            TrainResult res = train_gd_mse(data, lambdas[k], bias, c);
            const auto& clf = res.ensemble.center;
            Overlaps ov = measure_overlaps(clf, data.centroid);
            const double p = double(data.n_patterns());
            row.b = clf.bias;
            row.m = ov.m;
            row.q_norm = ov.q_norm;
            row.gen_err = gen_error_closed_form(ov, clf.bias, mp.delta, mp.rho);
            row.train_err = double(count_errors(clf, data)) / p;
            row.train_loss = mse_loss(clf, data) / p;
            row.test_loss = test_loss_mse(ov, clf.bias, mp.delta, mp.rho);
            row.converged = true;
            if (keep_traj && i % seeds == 0) traj[k] = std::move(res.trajectory);
        } catch (const std::exception&) {
            row.converged = false;
        }
        per_seed[i] = row;
    });
    CsvTable final_table = rs_table(per_seed);
    final_table.header.insert(final_table.header.begin(), "seed");
    for (std::size_t i = 0; i < per_seed.size(); ++i)
        final_table.rows[i].insert(final_table.rows[i].begin(), std::to_string(ctx.seed + (i % seeds)));
    std::vector<RsRow> summary;
    PlotSeries sim{"simulation", {}, {}, true};
    for (std::size_t k = 0; k < nl; ++k) {
        RsRow s = per_seed[k * seeds];
        bool ok = true;
        for (double* f : {&s.b, &s.m, &s.q_norm, &s.gen_err, &s.train_err, &s.train_loss, &s.test_loss}) *f = 0.0;
        for (long j = 0; j < seeds; ++j) {
            const RsRow& r = per_seed[k * seeds + j];
            ok = ok && r.converged;
            s.b += r.b / seeds;
            s.m += r.m / seeds;
            s.q_norm += r.q_norm / seeds;
            s.gen_err += r.gen_err / seeds;
            s.train_err += r.train_err / seeds;
            s.train_loss += r.train_loss / seeds;
            s.test_loss += r.test_loss / seeds;
        }
        s.converged = ok;
        if (!ok) ++ctx.convergence_failures;
        summary.push_back(s);
        sim.x.push_back(s.lambda);
        sim.y.push_back(s.gen_err);
    }
    ctx.write(final_table, "gd_final.csv");
    ctx.write(rs_table(summary), "gd_summary.csv");
    if (keep_traj)
        for (std::size_t k = 0; k < nl; ++k) {
            ctx.write(trajectory_table(traj[k]), "gd_trajectory_" + std::to_string(k) + ".csv");
            ctx.manifest["trajectories"]["gd_trajectory_" + std::to_string(k) + ".csv"] = {
                {"lambda", lambdas[k]}, {"seed", ctx.seed}};
        }
    ctx.plot({"Gradient descent generalization error", "lambda", "gen_err", true, {sim}}, "gd_summary.svg");
}

void run_rsgd(Context& ctx) {
    const MixtureParams mp = mixture(ctx);
    std::vector<int> ys;
    for (double y : ctx.cfg.numbers("rsgd.y")) ys.push_back(int(y));
    std::vector<long> seed_counts;
    auto sc = ctx.cfg.has("rsgd.seeds") ? ctx.cfg.numbers("rsgd.seeds") : std::vector<double>{1};
    for (std::size_t i = 0; i < ys.size(); ++i) seed_counts.push_back(long(sc.size() == 1 ? sc[0] : sc[i]));
    const auto coss = cos_grid(ctx.cfg, "rsgd");
    const auto norms = ctx.cfg.numbers("rsgd.norm");
    const BiasPolicy bias = bias_from(ctx.cfg, "rsgd");
    TrainConfig base;
    base.epochs = long(ctx.cfg.number_or("rsgd.epochs", 40000));
    base.lr = ctx.cfg.number_or("rsgd.lr", 1e-4);
    base.momentum = ctx.cfg.number_or("rsgd.momentum", 0.5);
    base.optimizer = optimizer_from(ctx.cfg.string_or("rsgd.optimizer", "momentum"));
    base.lambda0 = ctx.cfg.number_or("rsgd.lambda0", 1e-4);
    base.lambda1 = ctx.cfg.number_or("rsgd.lambda1", 5e-3);
    base.lambda_max = ctx.cfg.number_or("rsgd.lambda_max", 1e2);
    base.couple_bias = ctx.cfg.boolean_or("rsgd.couple_bias", false);
    base.log_every = long(ctx.cfg.number_or("rsgd.log_every", 0));
    TrainConfig single = base;
    single.epochs = long(ctx.cfg.number_or("rsgd.epochs_y1", 20000));
    single.lr = ctx.cfg.number_or("rsgd.lr_y1", base.lr);
    single.optimizer = optimizer_from(ctx.cfg.string_or("rsgd.optimizer_y1", "adam"));
    const bool keep_traj = ctx.cfg.boolean_or("rsgd.trajectory", false);

    // Work items; y = 1 ignores the angle, so it runs once per (norm, seed).
    struct Task {
        std::size_t group;  // index into (y, cos, norm) groups
        int y;
        double cos_theta, norm;
        std::uint64_t seed;
        bool first_seed;
    };
    struct Group {
        int y;
        double cos_theta, norm;
        long seeds;
    };
    std::vector<Group> groups;
    std::vector<Task> tasks;
    for (std::size_t iy = 0; iy < ys.size(); ++iy)
        for (double c : coss)
            for (double n : norms) {
                groups.push_back({ys[iy], c, n, seed_counts[iy]});
                if (ys[iy] == 1 && c != coss.front()) continue;
                for (long s = 0; s < seed_counts[iy]; ++s)
                    tasks.push_back({groups.size() - 1, ys[iy], c, n, ctx.seed + std::uint64_t(s), s == 0});
            }
    std::vector<ReplicatedRow> results(tasks.size());
    std::vector<std::vector<TrajectoryRow>> traj(tasks.size());
    parallel_for(tasks.size(), ctx.threads, [&](std::size_t i) {
        const Task& t = tasks[i];
        Dataset data = sample_dataset(mp, t.seed);
        TrainConfig c = t.y == 1 ? single : base;
        c.seed = t.seed;
        c.norm_target = t.norm;
        c.d0 = distance_from_cos(t.cos_theta);
        try {
            TrainResult res = train_rsgd(data, t.y, bias, c);
            results[i] = measure_ensemble(data, res.ensemble, t.y, t.cos_theta, t.norm);
            if (keep_traj && t.first_seed) traj[i] = std::move(res.trajectory);
        } catch (const std::exception&) {
            results[i] = {mp.alpha, mp.delta, mp.rho, t.y, t.cos_theta, t.norm, NAN, NAN, NAN, NAN, NAN, NAN, NAN, false};
        }
    });
    // Expand y = 1 results across every angle so each group has its rows.
    std::vector<std::vector<std::pair<std::uint64_t, ReplicatedRow>>> by_group(groups.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Task& t = tasks[i];
        if (t.y == 1) {
            for (std::size_t g = 0; g < groups.size(); ++g)
                if (groups[g].y == 1 && groups[g].norm == t.norm) {
                    ReplicatedRow r = results[i];
                    r.cos_theta = groups[g].cos_theta;
                    by_group[g].push_back({t.seed, r});
                }
        } else {
            by_group[t.group].push_back({t.seed, results[i]});
        }
    }
    CsvTable final_table;
    final_table.header = kReplicatedHeader;
    final_table.header.insert(final_table.header.begin(), "seed");
    CsvTable summary;
    summary.header = kReplicatedHeader;
    summary.header.push_back("n_seeds");
    summary.header.push_back("gen_err_center_se");
    PlotSpec p{"rSGD center generalization error", "norm", "gen_err_center", false, {}};
    std::map<std::string, PlotSeries> series;
    std::vector<std::string> series_order;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& rows = by_group[g];
        ReplicatedRow mean{mp.alpha, mp.delta, mp.rho, groups[g].y, groups[g].cos_theta, groups[g].norm,
                           0, 0, NAN, 0, 0, 0, 0, true};
        double sq = 0.0;
        const double n = double(rows.size());
        for (const auto& [seed, r] : rows) {
            auto cells = replicated_cells(r);
            cells.insert(cells.begin(), std::to_string(seed));
            final_table.add_row(cells);
            mean.converged = mean.converged && r.converged;
            mean.b += r.b / n;
            mean.m += r.m / n;
            mean.q_bar += r.q_bar / n;
            mean.b_bar += r.b_bar / n;
            mean.train_err += r.train_err / n;
            mean.gen_err_center += r.gen_err_center / n;
            sq += r.gen_err_center * r.gen_err_center / n;
        }
        if (!mean.converged) ++ctx.convergence_failures;
        const double var = std::max(0.0, sq - mean.gen_err_center * mean.gen_err_center);
        const double se = n > 1 ? std::sqrt(var * n / (n - 1) / n) : NAN;
        auto cells = replicated_cells(mean);
        cells.push_back(std::to_string(rows.size()));
        cells.push_back(format_number(se));
        summary.add_row(cells);
        const std::string label = "y=" + std::to_string(groups[g].y) + " cos=" + format_number(groups[g].cos_theta);
        if (!series.count(label)) {
            series[label] = {label, {}, {}, true};
            series_order.push_back(label);
        }
        series[label].x.push_back(groups[g].norm);
        series[label].y.push_back(mean.gen_err_center);
    }
    for (const auto& l : series_order) p.series.push_back(series[l]);
    ctx.write(final_table, "rsgd_final.csv");
    ctx.write(summary, "rsgd_summary.csv");
    if (keep_traj) {
        std::size_t k = 0;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (!tasks[i].first_seed) continue;
            const std::string name = "rsgd_trajectory_" + std::to_string(k++) + ".csv";
            ctx.write(trajectory_table(traj[i]), name);
            ctx.manifest["trajectories"][name] = {
                {"y", tasks[i].y}, {"cos_theta", tasks[i].cos_theta}, {"norm", tasks[i].norm}, {"seed", tasks[i].seed}};
        }
    }
    ctx.plot(p, "rsgd_summary.svg");
}

void run_compare(Context& ctx) {
    const std::string a = (ctx.dir / ctx.cfg.string("compare.theory")).string();
    const std::string b = (ctx.dir / ctx.cfg.string("compare.sim")).string();
    const auto keys = ctx.cfg.has("compare.keys") ? ctx.cfg.strings("compare.keys") : std::vector<std::string>{};
    std::ostringstream os;
    int code = compare_files(a, b, ctx.cfg.string("compare.tol"), keys, os, (ctx.dir / "compare_report.csv").string());
    ctx.out.artifacts.push_back("compare_report.csv");
    ctx.out.messages.push_back(os.str());
    if (code != exit_code::kOk) ctx.comparison_failed = true;
}

}  // namespace

int compare_files(const std::string& a, const std::string& b, const std::string& tol_spec,
                  const std::vector<std::string>& keys, std::ostream& out, const std::string& report_path) {
    std::map<std::string, double> tol;
    CsvTable ta, tb;
    try {
        tol = parse_tolerances(tol_spec);
        ta = CsvTable::read(a);
        tb = CsvTable::read(b);
    } catch (const std::exception& e) {
        out << "error: " << e.what() << '\n';
        return exit_code::kValidation;
    }
    ComparisonReport rep;
    try {
        rep = compare_tables(ta, tb, tol, keys);
    } catch (const KeyMismatch& e) {
        out << "key mismatch: " << e.what() << '\n';
        return exit_code::kComparison;
    }
    if (!report_path.empty()) rep.to_table().write(report_path);
    out << rep.summary();
    return rep.passed() ? exit_code::kOk : exit_code::kComparison;
}

RunOutcome run_experiment(const Config& cfg, const RunOptions& opts, const std::string& default_out_dir) {
    RunOutcome out;
    auto errs = validate_config(cfg);
    if (!errs.empty()) {
        out.exit_code = exit_code::kValidation;
        out.messages = errs;
        return out;
    }
    const std::uint64_t seed = opts.seed ? *opts.seed : std::uint64_t(cfg.number_or("seed", 0));
    fs::path dir = opts.out_dir ? fs::path(*opts.out_dir) : fs::path(cfg.string_or("output.dir", default_out_dir));
    fs::create_directories(dir);
    out.out_dir = dir.string();
    nlohmann::json manifest;
    Context ctx{cfg, seed, std::max(1, opts.threads), dir, cfg.boolean_or("output.svg", true), out, manifest};
    const auto kinds = kinds_of(cfg);
    for (const auto& k : kinds) {
        if (k == "rs-sweep") run_rs(ctx);
        else if (k == "fp-curve") run_fp(ctx);
        else if (k == "replicated-sweep") run_replicated(ctx);
        else if (k == "bayes") run_bayes(ctx);
        else if (k == "simulate-gd") run_gd(ctx);
        else if (k == "simulate-rsgd") run_rsgd(ctx);
        else if (k == "compare") run_compare(ctx);
    }
    if (ctx.comparison_failed) out.exit_code = exit_code::kComparison;
    else if (ctx.convergence_failures > 0) out.exit_code = exit_code::kConvergence;
    manifest["version"] = version_string();
    manifest["config"] = cfg.to_json();
    manifest["kinds"] = kinds;
    manifest["seed"] = seed;
    manifest["artifacts"] = out.artifacts;
    manifest["convergence_failures"] = ctx.convergence_failures;
    manifest["exit_code"] = out.exit_code;
    std::ofstream mf(dir / "manifest.json", std::ios::binary);
    mf << manifest.dump(2) << '\n';
    out.artifacts.push_back("manifest.json");
    return out;
}

RunOutcome run_config_file(const std::string& path, const RunOptions& opts) {
    Config cfg;
    try {
        cfg = Config::load(path);
    } catch (const ConfigError& e) {
        RunOutcome out;
        out.exit_code = exit_code::kValidation;
        out.messages.push_back(e.what());
        return out;
    }
    return run_experiment(cfg, opts, (fs::path("out") / fs::path(path).stem()).string());
}

}  // namespace flatlab
