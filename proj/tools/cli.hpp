#pragma once

// countsel command-line front end. Exit codes: 0 success, 1 runtime or model
// error, 2 usage error.

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "countsel/countsel.hpp"

namespace countsel::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Error in an experiment configuration; the message names the field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error("config field '" + field + "': " + what) {}
};

inline std::vector<std::string> split(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
    }
    return out;
}

inline long parse_int(const std::string& s, const std::string& what) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(s, &pos);
    } catch (const std::logic_error&) {
        throw UsageError(what + ": '" + s + "' is not an integer");
    }
    if (pos != s.size()) throw UsageError(what + ": '" + s + "' is not an integer");
    return v;
}

inline double parse_double(const std::string& s, const std::string& what) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::logic_error&) {
        throw UsageError(what + ": '" + s + "' is not a number");
    }
    if (pos != s.size() || !std::isfinite(v)) throw UsageError(what + ": '" + s + "' is not a number");
    return v;
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
    std::vector<int> out;
    for (const auto& tok : split(s)) out.push_back(static_cast<int>(parse_int(tok, what)));
    return out;
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& tok : split(s)) out.push_back(parse_double(tok, what));
    return out;
}

inline EmissionFamily parse_family(const std::string& s) {
    if (s == "poisson") return EmissionFamily::poisson();
    if (s == "bernoulli" || s == "binary") return EmissionFamily::bernoulli();
    for (const std::string prefix : {"nb:", "negbin:"}) {
        if (s.rfind(prefix, 0) == 0) {
            const long r = parse_int(s.substr(prefix.size()), "--family");
            if (r < 1) throw UsageError("--family: negative binomial r must be >= 1");
            return EmissionFamily::negbin(static_cast<int>(r));
        }
    }
    throw UsageError("--family: expected poisson, bernoulli or nb:<r>, got '" + s + "'");
}

/// Model descriptor flags shared by simulate and fit.
struct ModelFlags {
    std::string family = "poisson";
    std::string ingarch;
    std::string knots;
    bool knots_given = false;
    bool no_feedback = false;
    std::string active;

    void attach(CLI::App& app) {
        app.add_option("--family", family, "poisson | bernoulli | nb:<r>");
        app.add_option("--ingarch", ingarch, "INGARCH orders p,q");
        app.add_option_function<std::string>(
               "--knots",
               [this](const std::string& v) {
                   knots = v;
                   knots_given = true;
               },
               "knot model with knots xi_1,...,xi_K ('none' for K=0)")
            ->allow_extra_args(false);
        app.add_flag("--no-feedback", no_feedback, "knot model without the lambda[t-1] term");
        app.add_option("--active", active, "free coefficient positions (1-based, default all)");
    }

    ModelSpec build() const {
        const auto fam = parse_family(family);
        if (knots_given && !ingarch.empty()) throw UsageError("--ingarch and --knots are mutually exclusive");
        DynamicForm form;
        std::size_t d = 0;
        if (knots_given) {
            std::vector<int> ks;
            if (knots != "none" && !knots.empty()) ks = parse_int_list(knots, "--knots");
            d = 1 + (no_feedback ? 0 : 1) + ks.size();
            form = KnotForm{ks, !no_feedback};
        } else {
            const auto pq = parse_int_list(ingarch.empty() ? "0,0" : ingarch, "--ingarch");
            if (pq.size() != 2 || pq[0] < 0 || pq[1] < 0) throw UsageError("--ingarch expects p,q with p,q >= 0");
            d = static_cast<std::size_t>(pq[0] + pq[1]);
            form = IngarchForm{pq[0], pq[1]};
        }
        std::vector<int> act;
        if (active.empty()) {
            for (std::size_t i = 1; i <= d; ++i) act.push_back(static_cast<int>(i));
        } else if (active != "none") {
            act = parse_int_list(active, "--active");
        }
        try {
            return ModelSpec(fam, form, act);
        } catch (const DomainError& e) {
            throw UsageError(e.what());
        }
    }
};

inline ParamVector parse_theta(const ModelSpec& spec, const std::string& text) {
    const auto v = parse_double_list(text, "--theta");
    if (v.size() != spec.n_params())
        throw UsageError("--theta: " + spec.descriptor() + " takes " + std::to_string(spec.n_params()) +
                         " values (" + std::to_string(v.size()) + " given)");
    return ParamVector::from_flat(spec, v);
}

/// Writes `text` to `path`, or to `fallback` when path is empty.
inline void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
    if (path.empty()) {
        fallback << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path + "'");
    f << text;
}

inline std::string dump(const io::Json& j) { return j.dump(2) + "\n"; }

struct ExperimentSettings {
    std::string preset;
    std::string family;
    std::string ingarch;
    std::string knots;
    bool knots_given = false;
    bool no_feedback = false;
    std::string theta;
    int pmax = -1, qmax = -1, kmax = -1;
    std::string knot_candidates;
    std::string penalties;
    std::string sizes;
    long replications = -1;
    long long seed = -1;
    long burn_in = -1;
    long threads = -1;
    bool full = false;
    bool fast = false;
};

/// key = value lines; '#' starts a comment.
inline void read_config(const std::string& path, ExperimentSettings& s) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    std::string line;
    while (std::getline(in, line)) {
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        const auto eq = line.find('=');
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        if (eq == std::string::npos) throw ConfigError(line.substr(b), "expected key = value");
        auto trim = [](std::string x) {
            const auto l = x.find_first_not_of(" \t\r");
            const auto r = x.find_last_not_of(" \t\r");
            return l == std::string::npos ? std::string() : x.substr(l, r - l + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto as_int = [&](long long& dst) {
            try {
                dst = static_cast<long long>(parse_int(val, key));
            } catch (const UsageError& e) {
                throw ConfigError(key, e.what());
            }
        };
        long long tmp = 0;
        if (key == "preset") s.preset = val;
        else if (key == "family") s.family = val;
        else if (key == "ingarch") s.ingarch = val;
        else if (key == "knots") { s.knots = val; s.knots_given = true; }
        else if (key == "no_feedback") s.no_feedback = (val == "true" || val == "1");
        else if (key == "theta") s.theta = val;
        else if (key == "pmax") { as_int(tmp); s.pmax = static_cast<int>(tmp); }
        else if (key == "qmax") { as_int(tmp); s.qmax = static_cast<int>(tmp); }
        else if (key == "kmax") { as_int(tmp); s.kmax = static_cast<int>(tmp); }
        else if (key == "knot_candidates") s.knot_candidates = val;
        else if (key == "penalties") s.penalties = val;
        else if (key == "sizes") s.sizes = val;
        else if (key == "replications") { as_int(tmp); s.replications = static_cast<long>(tmp); }
        else if (key == "seed") as_int(s.seed);
        else if (key == "burn_in") { as_int(tmp); s.burn_in = static_cast<long>(tmp); }
        else if (key == "threads") { as_int(tmp); s.threads = static_cast<long>(tmp); }
        else throw ConfigError(key, "unknown field");
    }
}

/// Resolves settings (preset, then explicit fields) into an ExperimentConfig.
/// Every failure names the offending field.
inline ExperimentConfig build_experiment(const ExperimentSettings& s) {
    ExperimentConfig cfg;
    auto field = [](const std::string& name, auto&& fn) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(name, e.what());
        }
    };
    if (!s.preset.empty()) field("preset", [&] { cfg = preset_experiment(s.preset); });

    const bool custom_truth = !s.family.empty() || !s.ingarch.empty() || s.knots_given || !s.theta.empty();
    if (custom_truth) {
        if (s.theta.empty()) throw ConfigError("theta", "required when the true model is given explicitly");
        ModelFlags mf;
        mf.family = s.family.empty() ? "poisson" : s.family;
        mf.ingarch = s.ingarch;
        mf.knots = s.knots;
        mf.knots_given = s.knots_given;
        mf.no_feedback = s.no_feedback;
        field("model", [&] { cfg.truth_spec = mf.build(); });
        field("theta", [&] {
            cfg.truth_theta = parse_theta(cfg.truth_spec, s.theta);
            validate(cfg.truth_spec, cfg.truth_theta);
        });
        cfg.name = "custom";
        if (cfg.truth_spec.as_knot())
            cfg.collection = KnotCollection{};
        else
            cfg.collection = IngarchCollection{};
    } else if (s.preset.empty()) {
        throw ConfigError("preset", "either a preset or an explicit true model is required");
    }

    if (auto* g = std::get_if<IngarchCollection>(&cfg.collection)) {
        if (s.kmax >= 0 || !s.knot_candidates.empty())
            throw ConfigError("kmax", "knot collection fields do not apply to an INGARCH truth");
        if (s.fast) *g = IngarchCollection{3, 3};
        if (s.pmax >= 0) g->p_max = s.pmax;
        if (s.qmax >= 0) g->q_max = s.qmax;
    } else {
        auto& k = std::get<KnotCollection>(cfg.collection);
        if (s.pmax >= 0 || s.qmax >= 0)
            throw ConfigError("pmax", "INGARCH collection fields do not apply to a knot truth");
        if (!s.knot_candidates.empty())
            field("knot_candidates", [&] { k.candidates = parse_int_list(s.knot_candidates, "knot_candidates"); });
        if (s.kmax >= 0) k.k_max = s.kmax;
        k.with_feedback = !cfg.truth_spec.as_knot() || cfg.truth_spec.as_knot()->with_feedback;
    }
    if (!s.penalties.empty()) {
        field("penalties", [&] {
            cfg.penalties.clear();
            for (const auto& p : split(s.penalties)) cfg.penalties.push_back(Penalty::parse(p));
        });
    }
    if (!s.sizes.empty()) {
        field("sizes", [&] {
            cfg.sample_sizes.clear();
            for (int v : parse_int_list(s.sizes, "sizes")) {
                if (v < 2) throw DomainError("sample sizes must be >= 2");
                cfg.sample_sizes.push_back(static_cast<std::size_t>(v));
            }
            if (cfg.sample_sizes.empty()) throw DomainError("no sample sizes");
        });
    }
    if (s.full) cfg.replications = 100;
    if (s.replications >= 0) {
        if (s.replications < 1) throw ConfigError("replications", "must be >= 1");
        cfg.replications = static_cast<std::size_t>(s.replications);
    }
    if (s.seed >= 0) cfg.base_seed = static_cast<std::uint64_t>(s.seed);
    if (s.burn_in >= 0) cfg.burn_in = static_cast<std::size_t>(s.burn_in);
    if (s.threads >= 0) cfg.threads = static_cast<unsigned>(s.threads);
    field("collection", [&] { (void)build_collection(cfg.collection, cfg.truth_spec.family()); });
    return cfg;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Count time series: simulation, Poisson QMLE fitting and penalized model selection", "countsel"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate a count series and write it as CSV");
    ModelFlags sim_model;
    sim_model.attach(*sim);
    std::string sim_theta, sim_out;
    std::size_t sim_n = 0, sim_burn = 500;
    std::uint64_t sim_seed = 1;
    bool sim_no_header = false;
    sim->add_option("--theta", sim_theta, "parameters: intercept, lags, feedbacks, knot coefficients")->required();
    sim->add_option("--n", sim_n, "kept length")->required()->check(CLI::PositiveNumber);
    sim->add_option("--burn-in", sim_burn, "discarded initial steps");
    sim->add_option("--seed", sim_seed, "random seed");
    sim->add_option("-o,--output", sim_out, "CSV output path (default stdout)");
    sim->add_flag("--no-header", sim_no_header, "omit the 'y' header line");

    // fit
    auto* fitc = app.add_subcommand("fit", "fit one model by Poisson quasi-maximum likelihood");
    ModelFlags fit_model;
    fit_model.attach(*fitc);
    std::string fit_in, fit_out;
    int fit_starts = 5;
    bool fit_no_sandwich = false;
    fitc->add_option("-i,--input", fit_in, "CSV input")->required()->check(CLI::ExistingFile);
    fitc->add_option("-o,--output", fit_out, "JSON output path (default stdout)");
    fitc->add_option("--starts", fit_starts, "number of optimizer starts")->check(CLI::PositiveNumber);
    fitc->add_flag("--no-sandwich", fit_no_sandwich, "skip the robust covariance");

    // select
    auto* selc = app.add_subcommand("select", "penalized model selection over a collection");
    std::string sel_in, sel_out, sel_family = "poisson", sel_format = "json", sel_cands;
    int sel_pmax = -1, sel_qmax = -1, sel_kmax = -1;
    bool sel_no_feedback = false;
    std::vector<std::string> sel_pen;
    selc->add_option("-i,--input", sel_in, "CSV input")->required()->check(CLI::ExistingFile);
    selc->add_option("-o,--output", sel_out, "output path (default stdout)");
    selc->add_option("--family", sel_family, "poisson | bernoulli | nb:<r>");
    selc->add_option("--pmax", sel_pmax, "largest p of the INGARCH collection")->check(CLI::NonNegativeNumber);
    selc->add_option("--qmax", sel_qmax, "largest q of the INGARCH collection")->check(CLI::NonNegativeNumber);
    selc->add_option("--kmax", sel_kmax, "largest number of knots")->check(CLI::NonNegativeNumber);
    selc->add_option("--knot-candidates", sel_cands, "candidate knot locations, e.g. 1,2,3,4");
    selc->add_flag("--no-feedback", sel_no_feedback, "knot models without the lambda[t-1] term");
    selc->add_option("--penalty", sel_pen, "logn | pow:<delta> (repeatable or comma separated)");
    selc->add_option("--format", sel_format, "json | table | csv")
        ->check(CLI::IsMember({"json", "table", "csv"}));

    // mc
    auto* mcc = app.add_subcommand("mc", "Monte Carlo selection-frequency experiment");
    ExperimentSettings mc;
    std::string mc_config, mc_out, mc_format = "table", mc_theta;
    mcc->add_option("--preset", mc.preset, "model-a|model-b|model-c|model-d|knots-r1|knots-r8|usrec-proxy");
    mcc->add_option("--config", mc_config, "key = value experiment file")->check(CLI::ExistingFile);
    mcc->add_option("--family", mc.family, "true emission family");
    mcc->add_option("--ingarch", mc.ingarch, "true INGARCH orders p,q");
    mcc->add_option_function<std::string>("--knots", [&](const std::string& v) {
        mc.knots = v;
        mc.knots_given = true;
    }, "true knot locations");
    mcc->add_option("--theta", mc_theta, "true parameters");
    mcc->add_option("--pmax", mc.pmax)->check(CLI::NonNegativeNumber);
    mcc->add_option("--qmax", mc.qmax)->check(CLI::NonNegativeNumber);
    mcc->add_option("--kmax", mc.kmax)->check(CLI::NonNegativeNumber);
    mcc->add_option("--knot-candidates", mc.knot_candidates);
    mcc->add_option("--penalties", mc.penalties, "comma separated, default logn,pow:1/3");
    mcc->add_option("--sizes", mc.sizes, "comma separated sample sizes");
    mcc->add_option("--replications", mc.replications)->check(CLI::PositiveNumber);
    mcc->add_option("--seed", mc.seed, "base seed")->check(CLI::NonNegativeNumber);
    mcc->add_option("--burn-in", mc.burn_in)->check(CLI::NonNegativeNumber);
    mcc->add_option("--threads", mc.threads, "worker threads (default COUNTSEL_THREADS or all cores)")
        ->check(CLI::PositiveNumber);
    mcc->add_flag("--full", mc.full, "100 replications");
    mcc->add_flag("--fast", mc.fast, "INGARCH collection {0..3}x{0..3}");
    mcc->add_option("--format", mc_format, "json | table")->check(CLI::IsMember({"json", "table"}));
    mcc->add_option("-o,--output", mc_out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*sim) {
            const auto spec = sim_model.build();
            const auto theta = parse_theta(spec, sim_theta);
            const auto y = simulate(spec, theta, SimConfig{sim_n, sim_burn, sim_seed});
            std::ostringstream csv;
            io::write_counts(csv, y, !sim_no_header);
            emit(sim_out, csv.str(), out);
            double mean = 0.0, var = 0.0;
            std::int64_t mx = 0;
            for (auto v : y) {
                mean += static_cast<double>(v);
                mx = std::max(mx, v);
            }
            mean /= static_cast<double>(y.size());
            for (auto v : y) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
            var /= y.size() > 1 ? static_cast<double>(y.size() - 1) : 1.0;
            (sim_out.empty() ? err : out) << "n=" << y.size() << " mean=" << io::fixed(mean, 4)
                                          << " variance=" << io::fixed(var, 4) << " max=" << mx << '\n';
            return kExitOk;
        }
        if (*fitc) {
            const auto spec = fit_model.build();
            const auto y = io::read_counts_file(fit_in);
            FitOptions opts;
            opts.n_starts = fit_starts;
            opts.sandwich = !fit_no_sandwich;
            const auto f = fit(spec, y, opts);
            emit(fit_out, dump(io::to_json(spec, f)), out);
            (fit_out.empty() ? err : out) << spec.descriptor() << " on n=" << y.size() << ", loglik "
                                          << io::fixed(f.loglik, 4) << '\n'
                                          << io::render_fit_echo(spec, f);
            return kExitOk;
        }
        if (*selc) {
            const auto fam = parse_family(sel_family);
            const bool knot_mode = sel_kmax >= 0 || !sel_cands.empty();
            const bool ingarch_mode = sel_pmax >= 0 || sel_qmax >= 0;
            if (knot_mode && ingarch_mode) throw UsageError("choose either --pmax/--qmax or --kmax/--knot-candidates");
            if (!knot_mode && !ingarch_mode) throw UsageError("a collection is required: --pmax/--qmax or --kmax");
            CollectionDescriptor desc;
            if (knot_mode) {
                KnotCollection k;
                if (!sel_cands.empty()) k.candidates = parse_int_list(sel_cands, "--knot-candidates");
                k.k_max = sel_kmax >= 0 ? sel_kmax : static_cast<int>(k.candidates.size());
                k.with_feedback = !sel_no_feedback;
                desc = k;
            } else {
                desc = IngarchCollection{std::max(sel_pmax, 0), std::max(sel_qmax, 0)};
            }
            std::vector<Penalty> pens;
            for (const auto& group : sel_pen)
                for (const auto& p : split(group)) {
                    try {
                        pens.push_back(Penalty::parse(p));
                    } catch (const DomainError& e) {
                        throw UsageError(std::string("--penalty: ") + e.what());
                    }
                }
            if (pens.empty()) pens.push_back(Penalty::log_n());
            std::vector<ModelSpec> collection;
            try {
                collection = build_collection(desc, fam);
            } catch (const DomainError& e) {
                throw UsageError(e.what());
            }
            const auto y = io::read_counts_file(sel_in);
            std::size_t max_dim = 0;
            for (const auto& m : collection) max_dim = std::max(max_dim, m.dim());
            if (y.size() < max_dim + 1) throw DomainError("series too short for the largest model");
            FitOptions opts;
            opts.sandwich = false;
            const auto fc = fit_collection(collection, y, opts, 0);
            std::vector<SelectionResult> sels;
            for (const auto& p : pens) sels.push_back(select_from_fits(fc, p));

            std::string payload;
            if (sel_format == "json") {
                io::Json j;
                j["n"] = y.size();
                j["selections"] = io::Json::array();
                for (const auto& s : sels) j["selections"].push_back(io::to_json(s));
                payload = dump(j);
            } else if (sel_format == "table") {
                payload = io::render_selection_table(sels);
            } else {
                std::ostringstream os;
                os << "penalty,model,dim,loglik,criterion,chosen\n";
                for (const auto& s : sels)
                    for (std::size_t i = 0; i < s.table.size(); ++i) {
                        const auto& r = s.table[i];
                        os << s.penalty_used.descriptor() << ',' << r.model.descriptor() << ',' << r.dim << ','
                           << (r.failed ? "" : io::fixed(r.loglik, 6)) << ','
                           << (r.failed ? "inf" : io::fixed(r.criterion, 6)) << ',' << (s.chosen == i ? 1 : 0)
                           << '\n';
                    }
                payload = os.str();
            }
            emit(sel_out, payload, out);
            return kExitOk;
        }
        if (*mcc) {
            ExperimentSettings s;
            if (!mc_config.empty()) read_config(mc_config, s);
            // Flags override file fields.
            if (!mc.preset.empty()) s.preset = mc.preset;
            if (!mc.family.empty()) s.family = mc.family;
            if (!mc.ingarch.empty()) s.ingarch = mc.ingarch;
            if (mc.knots_given) {
                s.knots = mc.knots;
                s.knots_given = true;
            }
            if (!mc_theta.empty()) s.theta = mc_theta;
            if (mc.pmax >= 0) s.pmax = mc.pmax;
            if (mc.qmax >= 0) s.qmax = mc.qmax;
            if (mc.kmax >= 0) s.kmax = mc.kmax;
            if (!mc.knot_candidates.empty()) s.knot_candidates = mc.knot_candidates;
            if (!mc.penalties.empty()) s.penalties = mc.penalties;
            if (!mc.sizes.empty()) s.sizes = mc.sizes;
            if (mc.replications >= 0) s.replications = mc.replications;
            if (mc.seed >= 0) s.seed = mc.seed;
            if (mc.burn_in >= 0) s.burn_in = mc.burn_in;
            if (mc.threads >= 0) s.threads = mc.threads;
            s.full = s.full || mc.full;
            s.fast = s.fast || mc.fast;
            const auto cfg = build_experiment(s);
            const auto table = run_experiment(cfg);
            emit(mc_out, mc_format == "json" ? dump(io::to_json(table)) : io::render_frequency_table(table), out);
            return kExitOk;
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace countsel::cli
