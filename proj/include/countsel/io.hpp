#pragma once

// Count-series CSV, JSON documents and aligned text tables.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "countsel/errors.hpp"
#include "countsel/model.hpp"
#include "countsel/montecarlo.hpp"
#include "countsel/qmle.hpp"
#include "countsel/select.hpp"

namespace countsel::io {

using Json = nlohmann::ordered_json;

/// One non-negative integer per line, optional header line `y`. Blank lines
/// are accepted only at the end of the input.
inline CountSeries read_counts(std::istream& in) {
    CountSeries out;
    std::string line;
    std::size_t lineno = 0;
    std::size_t blank_at = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos) {
            if (!blank_at) blank_at = lineno;
            continue;
        }
        if (blank_at) throw ParseError(blank_at, "empty line");
        const auto e = line.find_last_not_of(" \t");
        const std::string_view tok(line.data() + b, e - b + 1);
        if (lineno == 1 && tok == "y") continue;
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            throw ParseError(lineno, "not an integer: '" + std::string(tok) + "'");
        if (v < 0) throw ParseError(lineno, "negative count " + std::string(tok));
        out.push_back(v);
    }
    if (out.empty()) throw ParseError(lineno + 1, "no observations");
    return out;
}

inline CountSeries read_counts_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return read_counts(in);
}

inline void write_counts(std::ostream& out, std::span<const std::int64_t> y, bool header = true) {
    if (header) out << "y\n";
    for (auto v : y) out << v << '\n';
}

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline Json to_json(const ModelSpec& spec, const FitResult& f) {
    Json j;
    j["model"] = spec.descriptor();
    j["family"] = spec.family().descriptor();
    j["params"] = spec.param_names();
    j["theta"] = f.theta_hat.flat();
    j["loglik"] = f.loglik;
    j["converged"] = f.converged;
    j["grad_norm"] = f.grad_norm;
    j["iterations"] = f.iterations;
    j["n"] = f.n_used;
    if (f.degenerate) j["degenerate"] = true;
    if (f.sandwich) {
        const auto& se = f.sandwich->std_errors;
        j["std_errors"] = std::vector<double>(se.data(), se.data() + se.size());
    } else if (!f.sandwich_error.empty()) {
        j["sandwich_error"] = f.sandwich_error;
    }
    return j;
}

inline Json to_json(const SelectionResult& s) {
    Json j;
    j["n"] = s.n;
    j["penalty"] = {{"descriptor", s.penalty_used.descriptor()}, {"kappa", s.kappa}};
    Json rows = Json::array();
    for (const auto& r : s.table) {
        Json row;
        row["model"] = r.model.descriptor();
        row["dim"] = r.dim;
        row["loglik"] = r.failed ? Json(nullptr) : Json(r.loglik);
        row["criterion"] = r.failed ? Json(nullptr) : Json(r.criterion);
        row["converged"] = !r.failed;
        if (r.failed) row["failure"] = r.failure;
        rows.push_back(row);
    }
    j["table"] = rows;
    const auto& c = s.chosen_row();
    j["chosen"] = {{"index", s.chosen}, {"model", c.model.descriptor()}, {"dim", c.dim}, {"theta", c.fit->theta_hat.flat()}};
    return j;
}

inline Json to_json(const FrequencyTable& t) {
    Json j;
    j["name"] = t.name;
    j["classes"] = t.labels;
    Json cells = Json::array();
    for (const auto& c : t.cells) {
        Json cj;
        cj["penalty"] = c.penalty;
        cj["n"] = c.n;
        cj["counts"] = c.counts;
        cj["frequencies"] = c.freqs;
        cj["successes"] = c.successes;
        cj["failures"] = c.failures;
        cells.push_back(cj);
    }
    j["cells"] = cells;
    return j;
}

inline Json to_json(const CoverageReport& r) {
    Json j;
    j["model"] = r.model;
    j["n"] = r.n;
    j["replications"] = r.replications;
    j["used"] = r.used;
    j["failures"] = r.failures;
    Json comps = Json::array();
    for (const auto& c : r.components)
        comps.push_back({{"name", c.name}, {"truth", c.truth}, {"coverage", c.coverage}, {"mean_z", c.mean_z},
                         {"var_z", c.var_z}});
    j["components"] = comps;
    return j;
}

/// Fitted mean equation with standard errors in parentheses underneath:
///
///   E(Y_t|F_{t-1}) = 0.120 + 0.748 Y_{t-1}
///                   (0.029)  (0.216)
inline std::string render_fit_echo(const ModelSpec& spec, const FitResult& f) {
    const auto flat = f.theta_hat.flat();
    std::vector<std::string> terms;
    for (std::size_t i = 1; i <= spec.n_lags(); ++i) terms.push_back("Y_{t-" + std::to_string(i) + "}");
    for (std::size_t j = 1; j <= spec.n_feedback(); ++j) terms.push_back("lambda_{t-" + std::to_string(j) + "}");
    if (const auto* k = spec.as_knot())
        for (int xi : k->knots) terms.push_back("(Y_{t-1}-" + std::to_string(xi) + ")^+");

    std::string top = "E(Y_t|F_{t-1}) = ";
    std::string bottom;
    auto add = [&](std::size_t idx, const std::string& prefix, const std::string& suffix) {
        top += prefix;
        const std::string coef = fixed(flat[idx], 3);
        const std::size_t at = top.size();
        top += coef + suffix;
        if (!f.sandwich) return;
        const std::string se = "(" + fixed(f.sandwich->std_errors[static_cast<Eigen::Index>(idx)], 3) + ")";
        const std::size_t center = at + coef.size() / 2;
        std::size_t start = center >= se.size() / 2 ? center - se.size() / 2 : 0;
        if (!bottom.empty() && start <= bottom.size()) start = bottom.size() + 1;
        bottom.resize(start, ' ');
        bottom += se;
    };
    add(0, "", "");
    for (std::size_t i = 1; i < flat.size(); ++i) {
        if (!spec.is_active(i)) continue;
        add(i, " + ", " " + terms[i - 1]);
    }
    std::string out = top + "\n";
    if (f.sandwich) out += bottom + "\n";
    return out;
}

inline std::string pad(const std::string& s, std::size_t w, bool right = false) {
    if (s.size() >= w) return s;
    return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
}

/// Criterion table; one criterion column per penalty over identical fits.
inline std::string render_selection_table(const std::vector<SelectionResult>& sels) {
    if (sels.empty()) return {};
    std::ostringstream os;
    const auto& base = sels.front();
    os << pad("model", 18) << pad("dim", 5, true) << pad("loglik", 16, true);
    for (const auto& s : sels) os << pad("C[" + s.penalty_used.descriptor() + "]", 18, true);
    os << '\n';
    for (std::size_t i = 0; i < base.table.size(); ++i) {
        const auto& r = base.table[i];
        os << pad(r.model.descriptor(), 18) << pad(std::to_string(r.dim), 5, true)
           << pad(r.failed ? "failed" : fixed(r.loglik, 4), 16, true);
        for (const auto& s : sels) {
            const auto& rr = s.table[i];
            std::string cell = rr.failed ? "inf" : fixed(rr.criterion, 4);
            if (s.chosen == i) cell += " *";
            else cell += "  ";
            os << pad(cell, 18, true);
        }
        os << '\n';
    }
    for (const auto& s : sels)
        os << "chosen under " << s.penalty_used.descriptor() << " (kappa_n=" << fixed(s.kappa, 6)
           << "): " << s.chosen_model().descriptor() << '\n';
    return os.str();
}

/// Rows are outcome classes, column groups sample sizes, sub-columns penalties.
inline std::string render_frequency_table(const FrequencyTable& t) {
    std::ostringstream os;
    const std::size_t label_w = 26;
    std::size_t col_w = 8;
    for (const auto& p : t.penalties) col_w = std::max(col_w, p.size() + 2);
    const std::size_t group_w = col_w * t.penalties.size();
    if (!t.name.empty()) os << t.name << '\n';
    os << pad("", label_w);
    for (std::size_t n : t.sample_sizes) os << pad("n=" + std::to_string(n), group_w + 2, true);
    os << '\n' << pad("", label_w);
    for (std::size_t g = 0; g < t.sample_sizes.size(); ++g) {
        os << "  ";
        for (const auto& p : t.penalties) os << pad(p, col_w, true);
    }
    os << '\n';
    for (std::size_t c = 0; c < 3; ++c) {
        os << pad(t.labels[c], label_w);
        for (std::size_t n : t.sample_sizes) {
            os << "  ";
            for (const auto& p : t.penalties) os << pad(fixed(t.cell(p, n).freqs[c], 2), col_w, true);
        }
        os << '\n';
    }
    os << pad("failures", label_w);
    for (std::size_t n : t.sample_sizes) {
        os << "  ";
        for (const auto& p : t.penalties) os << pad(std::to_string(t.cell(p, n).failures), col_w, true);
    }
    os << '\n';
    return os.str();
}

inline std::string render_coverage(const CoverageReport& r) {
    std::ostringstream os;
    os << r.model << " n=" << r.n << " replications=" << r.replications << " used=" << r.used << '\n';
    os << pad("param", 10) << pad("truth", 10, true) << pad("coverage", 10, true) << pad("mean_z", 10, true)
       << pad("var_z", 10, true) << '\n';
    for (const auto& c : r.components)
        os << pad(c.name, 10) << pad(fixed(c.truth, 4), 10, true) << pad(fixed(c.coverage, 3), 10, true)
           << pad(fixed(c.mean_z, 3), 10, true) << pad(fixed(c.var_z, 3), 10, true) << '\n';
    return os.str();
}

}  // namespace countsel::io
