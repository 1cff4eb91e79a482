#include "nodal/cli.hpp"

#include <algorithm>
#include <atomic>
#include <climits>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "nodal/asymptotics.hpp"
#include "nodal/forward.hpp"

namespace nodal::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
    throw ConfigError(path, msg);
}

void expect_keys(const json& obj, const std::string& path,
                 std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) bad(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
    }
}

const json* field(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double get_real(const json& obj, const std::string& path, const char* key, double def) {
    const json* v = field(obj, key);
    if (!v) return def;
    if (!v->is_number()) bad(path + "." + key, "expected a number");
    return v->get<double>();
}

int get_int(const json& obj, const std::string& path, const char* key, int def) {
    const json* v = field(obj, key);
    if (!v) return def;
    if (!v->is_number_integer()) bad(path + "." + key, "expected an integer");
    return v->get<int>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& def) {
    const json* v = field(obj, key);
    if (!v) return def;
    if (!v->is_string()) bad(path + "." + key, "expected a string");
    return v->get<std::string>();
}

model::FunctionSpec parse_fn(const json& obj, const std::string& path, const char* key,
                             expr::Arity arity) {
    const std::string src = get_string(obj, path, key, "0");
    try {
        return model::FunctionSpec::expression(src, arity);
    } catch (const expr::ParseError& e) {
        bad(path + "." + key, std::string("expression rejected: ") + e.what());
    }
}

// ---- text and CSV plumbing ----

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CliError("cannot open " + path.string() + " for writing");
    out << body;
    out.flush();
    if (!out) throw CliError("write failed: " + path.string());
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start < text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

[[noreturn]] void bad_row(const fs::path& path, size_t lineno, const std::string& msg) {
    throw CliError(path.string() + ":" + std::to_string(lineno) + ": " + msg);
}

double field_double(const std::string& s, const fs::path& path, size_t lineno) {
    const char* c = s.c_str();
    char* end = nullptr;
    double v = std::strtod(c, &end);
    if (s.empty() || end != c + s.size())
        bad_row(path, lineno, "not a number: '" + s + "'");
    return v;
}

int field_int(const std::string& s, const fs::path& path, size_t lineno) {
    const char* c = s.c_str();
    char* end = nullptr;
    long v = std::strtol(c, &end, 10);
    if (s.empty() || end != c + s.size() || v < INT_MIN || v > INT_MAX)
        bad_row(path, lineno, "not an integer: '" + s + "'");
    return static_cast<int>(v);
}

// Rows with a fixed column count under a fixed header.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, const char* header,
                                               size_t columns) {
    const auto lines = split_lines(read_text(path));
    if (lines.empty() || lines[0] != header)
        throw CliError(path.string() + ": expected header '" + header + "'");
    std::vector<std::vector<std::string>> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty() && i + 1 == lines.size()) break;  // trailing newline
        auto fields = split_fields(lines[i]);
        if (fields.size() != columns)
            bad_row(path, i + 1,
                    "expected " + std::to_string(columns) + " fields, found " +
                        std::to_string(fields.size()));
        rows.push_back(std::move(fields));
    }
    return rows;
}

// No emitted string field may contain the separator; guard the invariant that
// makes the readers exact inverses of the writers.
const std::string& csv_safe(const std::string& s) {
    if (s.find(',') != std::string::npos || s.find('\n') != std::string::npos)
        throw CliError("refusing to emit a field containing a separator: '" + s + "'");
    return s;
}

// ---- ordered parallel map over independent level indices ----

template <typename Fn>
void for_each_level(int count, Fn&& fn) {
    const unsigned hw = std::thread::hardware_concurrency();
    if (hw <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<size_t>(count));
    const int workers = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(count)));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            int i;
            while ((i = next.fetch_add(1)) < count) {
                try {
                    fn(i);
                } catch (...) {
                    errors[static_cast<size_t>(i)] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---- shared forward plumbing ----

struct LevelResult {
    bool solved = false;
    bool gap = false;
    double lambda = 0.0;
    double residual = 0.0;
    std::vector<double> nodes;
    bool count_ok = false;
};

// Solve the given levels independently (own solver per task), warm-started at
// the spectral prediction.
std::vector<LevelResult> solve_levels(const model::Problem& prob,
                                      const asym::AsymptoticConfig& acfg,
                                      const std::vector<int>& levels, double tol) {
    std::vector<LevelResult> out(levels.size());
    for_each_level(static_cast<int>(levels.size()), [&](int i) {
        forward::ForwardSolver solver(prob);
        const int n = levels[static_cast<size_t>(i)];
        LevelResult& r = out[static_cast<size_t>(i)];
        try {
            r.lambda = forward::refine_eigenvalue(solver, asym::lambda_asym(acfg, n), tol, 0.35);
        } catch (const NoSignChange&) {
            r.gap = true;
            return;
        }
        r.residual = std::abs(solver.characteristic(r.lambda));
        auto nl = forward::nodes_with_solver(solver, r.lambda, n, 1e-13);
        r.nodes = std::move(nl.nodes);
        r.count_ok = nl.count_matches;
        r.solved = true;
    });
    return out;
}

fs::path prep_out_dir(const RunFlags& flags) {
    std::error_code ec;
    fs::create_directories(flags.out_dir, ec);
    if (ec)
        throw CliError("cannot create output directory " + flags.out_dir.string() + ": " +
                       ec.message());
    return flags.out_dir;
}

std::optional<SampledFunction> resolve_l(const RunConfig& cfg) {
    if (cfg.inversion.l_spec == "from-problem")
        return model::derive_coefficients(cfg.problem).bigL;
    const expr::Expr e = expr::Expr::parse(cfg.inversion.l_spec, expr::Arity::univariate);
    return expr::sample(e, cfg.problem.grid);
}

std::vector<int> sorted_unique(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(v[i]);
    }
    return s;
}

// Uniform-grid derivative: central differences inside, 3-point one-sided at
// the ends (same stencils the reconstruction itself uses).
std::vector<double> uniform_gradient(const std::vector<double>& y, double h) {
    const size_t m = y.size();
    std::vector<double> out(m, 0.0);
    if (m < 3) return out;
    out[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
    for (size_t i = 1; i + 1 < m; ++i) out[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
    out[m - 1] = (3.0 * y[m - 1] - 4.0 * y[m - 2] + y[m - 3]) / (2.0 * h);
    return out;
}

// Least-squares slope of log(value) against log(n); empty when degenerate.
std::optional<double> loglog_slope(const std::vector<std::pair<int, double>>& pts) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (const auto& [n, v] : pts) {
        if (!(v > 0.0)) continue;
        const double lx = std::log(static_cast<double>(n));
        const double ly = std::log(v);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    if (m < 2) return std::nullopt;
    const double denom = m * sxx - sx * sx;
    if (denom == 0.0) return std::nullopt;
    return (m * sxy - sx * sy) / denom;
}

}  // namespace

// ---- config ---------------------------------------------------------------

RunConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        bad("", std::string("not valid JSON: ") + e.what());
    }
    if (!root.is_object()) bad("", "top level must be an object");
    expect_keys(root, "", {"problem", "spectrum", "inversion", "roundtrip"});

    RunConfig cfg;

    const json* prob = field(root, "problem");
    if (!prob) bad("problem", "required block is missing");
    if (!prob->is_object()) bad("problem", "expected an object");
    expect_keys(*prob, "problem",
                {"theta", "p", "r", "m11", "m12", "m21", "m22", "omega", "grid_n"});
    if (!field(*prob, "theta")) bad("problem.theta", "required");
    const double theta = get_real(*prob, "problem", "theta", 0.0);
    if (!(theta > 0.0 && theta < PI))
        bad("problem.theta",
            "value " + fmt(theta) + " rejected; the boundary angle requires 0 < theta < pi");
    cfg.problem.theta = theta;
    cfg.problem.p = parse_fn(*prob, "problem", "p", expr::Arity::univariate);
    cfg.problem.r = parse_fn(*prob, "problem", "r", expr::Arity::univariate);
    cfg.problem.m11 = parse_fn(*prob, "problem", "m11", expr::Arity::bivariate);
    cfg.problem.m12 = parse_fn(*prob, "problem", "m12", expr::Arity::bivariate);
    cfg.problem.m21 = parse_fn(*prob, "problem", "m21", expr::Arity::bivariate);
    cfg.problem.m22 = parse_fn(*prob, "problem", "m22", expr::Arity::bivariate);
    cfg.problem.omega = parse_fn(*prob, "problem", "omega", expr::Arity::univariate);
    cfg.grid_n = get_int(*prob, "problem", "grid_n", 4000);
    if (cfg.grid_n < 16) bad("problem.grid_n", "needs at least 16 intervals");
    cfg.problem.grid = Grid(cfg.grid_n);

    if (const json* spec = field(root, "spectrum")) {
        if (!spec->is_object()) bad("spectrum", "expected an object");
        expect_keys(*spec, "spectrum", {"n_min", "n_max", "tol"});
        cfg.spectrum.n_min = get_int(*spec, "spectrum", "n_min", cfg.spectrum.n_min);
        cfg.spectrum.n_max = get_int(*spec, "spectrum", "n_max", cfg.spectrum.n_max);
        cfg.spectrum.tol = get_real(*spec, "spectrum", "tol", cfg.spectrum.tol);
        if (cfg.spectrum.n_min < 1) bad("spectrum.n_min", "must be >= 1");
        if (cfg.spectrum.n_max < cfg.spectrum.n_min) bad("spectrum.n_max", "must be >= n_min");
        if (!(cfg.spectrum.tol > 0.0) || !std::isfinite(cfg.spectrum.tol))
            bad("spectrum.tol", "must be a positive number");
    }

    if (const json* inv = field(root, "inversion")) {
        if (!inv->is_object()) bad("inversion", "expected an object");
        expect_keys(*inv, "inversion", {"n_list", "grid_lo", "grid_hi", "grid_points", "L"});
        if (const json* nl = field(*inv, "n_list")) {
            if (!nl->is_array() || nl->empty())
                bad("inversion.n_list", "expected a nonempty array of integers");
            cfg.inversion.n_list.clear();
            for (const auto& el : *nl) {
                if (!el.is_number_integer())
                    bad("inversion.n_list", "expected a nonempty array of integers");
                const int n = el.get<int>();
                if (n < 1) bad("inversion.n_list", "levels must be >= 1");
                cfg.inversion.n_list.push_back(n);
            }
        }
        cfg.inversion.grid_lo = get_real(*inv, "inversion", "grid_lo", cfg.inversion.grid_lo);
        cfg.inversion.grid_hi = get_real(*inv, "inversion", "grid_hi", cfg.inversion.grid_hi);
        cfg.inversion.grid_points =
            get_int(*inv, "inversion", "grid_points", cfg.inversion.grid_points);
        if (!(cfg.inversion.grid_lo > 0.0 && cfg.inversion.grid_lo < cfg.inversion.grid_hi &&
              cfg.inversion.grid_hi < PI))
            bad("inversion.grid_lo", "requires 0 < grid_lo < grid_hi < pi");
        if (cfg.inversion.grid_points < 11) bad("inversion.grid_points", "needs at least 11");
        cfg.inversion.l_spec = get_string(*inv, "inversion", "L", cfg.inversion.l_spec);
        if (cfg.inversion.l_spec != "from-problem") {
            try {
                (void)expr::Expr::parse(cfg.inversion.l_spec, expr::Arity::univariate);
            } catch (const expr::ParseError& e) {
                bad("inversion.L", std::string("expression rejected: ") + e.what());
            }
        }
    }

    if (const json* rt = field(root, "roundtrip")) {
        if (!rt->is_object()) bad("roundtrip", "expected an object");
        expect_keys(*rt, "roundtrip",
                    {"tol_theta", "tol_omega_pi", "tol_mu", "tol_p_plus_r", "tol_v_sq",
                     "tol_p", "tol_r"});
        auto tol = [&](const char* key, double def) {
            const double v = get_real(*rt, "roundtrip", key, def);
            if (!(v > 0.0)) bad(std::string("roundtrip.") + key, "must be positive");
            return v;
        };
        cfg.roundtrip.theta = tol("tol_theta", cfg.roundtrip.theta);
        cfg.roundtrip.omega_pi = tol("tol_omega_pi", cfg.roundtrip.omega_pi);
        cfg.roundtrip.mu = tol("tol_mu", cfg.roundtrip.mu);
        cfg.roundtrip.p_plus_r = tol("tol_p_plus_r", cfg.roundtrip.p_plus_r);
        cfg.roundtrip.v_sq = tol("tol_v_sq", cfg.roundtrip.v_sq);
        cfg.roundtrip.p = tol("tol_p", cfg.roundtrip.p);
        cfg.roundtrip.r = tol("tol_r", cfg.roundtrip.r);
    }

    try {
        model::validate_problem(cfg.problem);
    } catch (const std::invalid_argument& e) {
        bad("problem.theta", e.what());
    } catch (const std::exception& e) {
        bad("problem", e.what());
    }
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::string text;
    try {
        text = read_text(path);
    } catch (const CliError& e) {
        bad("", e.what());
    }
    return parse_config(text);
}

void apply_flags(RunConfig& cfg, const RunFlags& flags) {
    if (flags.grid_n) {
        if (*flags.grid_n < 16) bad("--grid-n", "needs at least 16 intervals");
        cfg.grid_n = *flags.grid_n;
        cfg.problem.grid = Grid(cfg.grid_n);
    }
    if (flags.n_list) {
        if (flags.n_list->empty()) bad("--n-list", "expected at least one level");
        for (int n : *flags.n_list)
            if (n < 1) bad("--n-list", "levels must be >= 1");
        cfg.inversion.n_list = *flags.n_list;
    }
    if (flags.tol) {
        if (!(*flags.tol > 0.0)) bad("--tol", "must be positive");
        cfg.spectrum.tol = *flags.tol;
    }
}

// ---- file formats ----------------------------------------------------------

void write_spectrum_csv(const fs::path& path, const std::vector<SpectrumRow>& rows) {
    std::string body = "n,lambda,residual\n";
    for (const auto& r : rows)
        body += std::to_string(r.n) + "," + fmt(r.lambda) + "," + fmt(r.residual) + "\n";
    write_text(path, body);
}

std::vector<SpectrumRow> read_spectrum_csv(const fs::path& path) {
    std::vector<SpectrumRow> rows;
    size_t lineno = 1;
    for (const auto& f : read_csv(path, "n,lambda,residual", 3)) {
        ++lineno;
        rows.push_back({field_int(f[0], path, lineno), field_double(f[1], path, lineno),
                        field_double(f[2], path, lineno)});
    }
    return rows;
}

void write_nodes_csv(const fs::path& path, const std::vector<NodeRow>& rows) {
    std::string body = "n,j,x\n";
    for (const auto& r : rows)
        body += std::to_string(r.n) + "," + std::to_string(r.j) + "," + fmt(r.x) + "\n";
    write_text(path, body);
}

std::vector<NodeRow> read_nodes_csv(const fs::path& path) {
    std::vector<NodeRow> rows;
    size_t lineno = 1;
    for (const auto& f : read_csv(path, "n,j,x", 3)) {
        ++lineno;
        rows.push_back({field_int(f[0], path, lineno), field_int(f[1], path, lineno),
                        field_double(f[2], path, lineno)});
    }
    return rows;
}

inverse::NodalSet to_nodal_set(const std::vector<NodeRow>& rows, std::string provenance) {
    inverse::NodalSet set;
    set.provenance = std::move(provenance);
    for (const auto& r : rows) {
        auto& level = set.entries[r.n];
        if (r.j != static_cast<int>(level.size()))
            throw DataError("nodes data: level n = " + std::to_string(r.n) + ": expected j = " +
                            std::to_string(level.size()) + ", found j = " + std::to_string(r.j) +
                            " (truncated or out-of-order rows)");
        level.push_back(r.x);
    }
    return set;
}

std::vector<NodeRow> from_nodal_set(const inverse::NodalSet& set) {
    std::vector<NodeRow> rows;
    for (const auto& [n, nodes] : set.entries)
        for (size_t j = 0; j < nodes.size(); ++j)
            rows.push_back({n, static_cast<int>(j), nodes[j]});
    return rows;
}

void write_reconstruction_csv(const fs::path& path, const inverse::Reconstruction& rec) {
    std::string body = "x,mu,mu_prime,v_sq,v,p,r\n";
    for (int i = 0; i < rec.mu_hat.size(); ++i) {
        body += fmt(rec.mu_hat.grid.x(i));
        body += ",";
        body += fmt(rec.mu_hat[i]);
        body += ",";
        body += fmt(rec.mu_prime_hat[i]);
        body += ",";
        body += fmt(rec.v_sq_hat[i]);
        body += ",";
        body += fmt(rec.v_hat[i]);
        body += ",";
        body += fmt(rec.p_hat[i]);
        body += ",";
        body += fmt(rec.r_hat[i]);
        body += "\n";
    }
    write_text(path, body);
}

ReconstructionTable read_reconstruction_csv(const fs::path& path) {
    ReconstructionTable t;
    size_t lineno = 1;
    for (const auto& f : read_csv(path, "x,mu,mu_prime,v_sq,v,p,r", 7)) {
        ++lineno;
        t.x.push_back(field_double(f[0], path, lineno));
        t.mu.push_back(field_double(f[1], path, lineno));
        t.mu_prime.push_back(field_double(f[2], path, lineno));
        t.v_sq.push_back(field_double(f[3], path, lineno));
        t.v.push_back(field_double(f[4], path, lineno));
        t.p.push_back(field_double(f[5], path, lineno));
        t.r.push_back(field_double(f[6], path, lineno));
    }
    return t;
}

MetaEntries reconstruction_meta(const inverse::Reconstruction& rec,
                                const std::vector<int>& n_list) {
    MetaEntries m;
    m.emplace_back("n_list", join_ints(n_list));
    m.emplace_back("theta_hat", fmt(rec.theta_hat));
    m.emplace_back("omega_pi_hat", fmt(rec.omega_pi_hat));
    m.emplace_back("a_hat", fmt(rec.a_hat));
    m.emplace_back("v0_hat", fmt(rec.v0_hat));
    m.emplace_back("v0_degenerate", rec.v0_degenerate ? "true" : "false");
    m.emplace_back("v_sign_defaulted", rec.v_sign_defaulted ? "true" : "false");
    m.emplace_back("f_pi_residual", fmt(rec.f_pi_residual));
    m.emplace_back("h_constancy_spread", fmt(rec.h_spread));
    m.emplace_back("v_sq_cross_check", fmt(rec.v_sq_cross_check));
    m.emplace_back("clip_count", std::to_string(rec.clip_count));
    m.emplace_back("stage3_converged", rec.stage3_converged ? "true" : "false");
    m.emplace_back("stage3_last_delta", fmt(rec.stage3_last_delta));
    return m;
}

void write_meta(const fs::path& path, const MetaEntries& entries) {
    std::string body;
    for (const auto& [k, v] : entries) {
        if (k.find('\n') != std::string::npos || v.find('\n') != std::string::npos ||
            k.find(" = ") != std::string::npos)
            throw CliError("meta entry would not round-trip: '" + k + "'");
        body += k + " = " + v + "\n";
    }
    write_text(path, body);
}

MetaEntries read_meta(const fs::path& path) {
    MetaEntries entries;
    const auto lines = split_lines(read_text(path));
    for (size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty() && i + 1 == lines.size()) break;
        const size_t pos = lines[i].find(" = ");
        if (pos == std::string::npos)
            bad_row(path, i + 1, "expected 'key = value'");
        entries.emplace_back(lines[i].substr(0, pos), lines[i].substr(pos + 3));
    }
    return entries;
}

void write_report_csv(const fs::path& path, const std::vector<ReportRow>& rows) {
    std::string body = "section,name,n,value,extra\n";
    for (const auto& r : rows) {
        body += csv_safe(r.section) + "," + csv_safe(r.name) + ",";
        if (r.n >= 0) body += std::to_string(r.n);
        body += "," + fmt(r.value) + "," + csv_safe(r.extra) + "\n";
    }
    write_text(path, body);
}

std::vector<ReportRow> read_report_csv(const fs::path& path) {
    std::vector<ReportRow> rows;
    size_t lineno = 1;
    for (const auto& f : read_csv(path, "section,name,n,value,extra", 5)) {
        ++lineno;
        ReportRow r;
        r.section = f[0];
        r.name = f[1];
        r.n = f[2].empty() ? -1 : field_int(f[2], path, lineno);
        r.value = field_double(f[3], path, lineno);
        r.extra = f[4];
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---- runners ---------------------------------------------------------------

int run_forward(const RunConfig& cfg, const RunFlags& flags) {
    const fs::path dir = prep_out_dir(flags);

    const auto spectrum = forward::eigenvalues(cfg.problem, cfg.spectrum.n_min,
                                               cfg.spectrum.n_max, cfg.spectrum.tol);
    std::vector<SpectrumRow> srows;
    srows.reserve(spectrum.entries.size());
    for (const auto& e : spectrum.entries) srows.push_back({e.n, e.lambda, e.residual});
    write_spectrum_csv(dir / "spectrum.csv", srows);

    const int count = static_cast<int>(spectrum.entries.size());
    std::vector<std::vector<NodeRow>> per(static_cast<size_t>(count));
    std::vector<std::string> notes(static_cast<size_t>(count));
    for_each_level(count, [&](int i) {
        forward::ForwardSolver solver(cfg.problem);
        const auto& e = spectrum.entries[static_cast<size_t>(i)];
        auto nl = forward::nodes_with_solver(solver, e.lambda, e.n, 1e-13);
        if (!nl.count_matches)
            notes[static_cast<size_t>(i)] =
                "note: level n = " + std::to_string(e.n) + " produced " +
                std::to_string(nl.nodes.size()) + " interior sign changes";
        auto& rows = per[static_cast<size_t>(i)];
        for (size_t j = 0; j < nl.nodes.size(); ++j)
            rows.push_back({e.n, static_cast<int>(j), nl.nodes[j]});
    });
    std::vector<NodeRow> nrows;
    for (const auto& rows : per) nrows.insert(nrows.end(), rows.begin(), rows.end());
    write_nodes_csv(dir / "nodes.csv", nrows);
    for (const auto& note : notes)
        if (!note.empty()) std::fprintf(stderr, "%s\n", note.c_str());

    std::printf("spectrum: %zu levels (n = %d..%d) -> %s\n", spectrum.entries.size(),
                cfg.spectrum.n_min, cfg.spectrum.n_max, (dir / "spectrum.csv").c_str());
    std::printf("nodes: %zu rows -> %s\n", nrows.size(), (dir / "nodes.csv").c_str());

    if (!spectrum.missing.empty()) {
        std::fprintf(stderr, "no sign change bracketed the eigenvalue for n = %s\n",
                     join_ints(spectrum.missing).c_str());
        if (!flags.allow_gaps) return kExitSpectrumGap;
    }
    return kExitOk;
}

int run_invert(const fs::path& nodes_path, const RunConfig& cfg, const RunFlags& flags) {
    const fs::path dir = prep_out_dir(flags);

    std::vector<NodeRow> rows;
    try {
        rows = read_nodes_csv(nodes_path);
    } catch (const DataError&) {
        throw;
    } catch (const CliError& e) {
        throw DataError(e.what());
    }
    const auto set = to_nodal_set(rows, nodes_path.string());

    if (cfg.inversion.n_list.size() < 4)
        bad("inversion.n_list", "the reconstruction needs at least 4 levels");
    inverse::Options opt;
    opt.n_list = cfg.inversion.n_list;
    opt.grid = inverse::InversionGrid{cfg.inversion.grid_lo, cfg.inversion.grid_hi,
                                      cfg.inversion.grid_points};

    const auto rec = inverse::reconstruct(set, resolve_l(cfg), opt);
    write_reconstruction_csv(dir / "reconstruction.csv", rec);
    write_meta(dir / "reconstruction.meta", reconstruction_meta(rec, opt.n_list));

    std::printf("theta_hat = %s\n", fmt(rec.theta_hat).c_str());
    std::printf("omega_pi_hat = %s\n", fmt(rec.omega_pi_hat).c_str());
    std::printf("a_hat = %s\n", fmt(rec.a_hat).c_str());
    std::printf("clip_count = %d, h_constancy_spread = %s\n", rec.clip_count,
                fmt(rec.h_spread).c_str());
    std::printf("wrote %s and %s\n", (dir / "reconstruction.csv").c_str(),
                (dir / "reconstruction.meta").c_str());
    return kExitOk;
}

int run_roundtrip(const RunConfig& cfg, const RunFlags& flags) {
    const fs::path dir = prep_out_dir(flags);

    const std::vector<int> levels = sorted_unique(cfg.inversion.n_list);
    if (levels.size() < 4) bad("inversion.n_list", "the reconstruction needs at least 4 levels");

    const auto coeffs = model::derive_coefficients(cfg.problem);
    const auto acfg = asym::make_config(cfg.problem);
    const auto solves = solve_levels(cfg.problem, acfg, levels, cfg.spectrum.tol);

    std::vector<int> gaps;
    for (size_t i = 0; i < levels.size(); ++i)
        if (solves[i].gap) gaps.push_back(levels[i]);
    if (!gaps.empty()) {
        std::fprintf(stderr, "no sign change bracketed the eigenvalue for n = %s\n",
                     join_ints(gaps).c_str());
        if (!flags.allow_gaps) return kExitSpectrumGap;
    }

    std::vector<SpectrumRow> srows;
    std::vector<NodeRow> nrows;
    inverse::NodalSet set;
    set.provenance = "roundtrip";
    std::vector<int> usable;
    for (size_t i = 0; i < levels.size(); ++i) {
        const auto& s = solves[i];
        if (!s.solved) continue;
        if (!s.count_ok)
            throw DataError("forward nodes for n = " + std::to_string(levels[i]) +
                            ": interior sign-change count mismatch (" +
                            std::to_string(s.nodes.size()) + " found)");
        srows.push_back({levels[i], s.lambda, s.residual});
        for (size_t j = 0; j < s.nodes.size(); ++j)
            nrows.push_back({levels[i], static_cast<int>(j), s.nodes[j]});
        set.entries[levels[i]] = s.nodes;
        usable.push_back(levels[i]);
    }
    write_spectrum_csv(dir / "spectrum.csv", srows);
    write_nodes_csv(dir / "nodes.csv", nrows);
    if (usable.size() < 4)
        throw DataError("fewer than 4 usable levels after gaps; cannot reconstruct");

    inverse::Options opt;
    opt.n_list = usable;
    opt.grid = inverse::InversionGrid{cfg.inversion.grid_lo, cfg.inversion.grid_hi,
                                      cfg.inversion.grid_points};
    const auto rec = inverse::reconstruct(set, resolve_l(cfg), opt);
    write_reconstruction_csv(dir / "reconstruction.csv", rec);
    write_meta(dir / "reconstruction.meta", reconstruction_meta(rec, usable));

    // Compare against the problem's own coefficients over the interior window.
    const double window_lo = 0.2, window_hi = PI - 0.2;
    double mu_err = 0.0, sum_err = 0.0, vsq_err = 0.0, p_err = 0.0, r_err = 0.0;
    for (int i = 0; i < rec.mu_hat.size(); ++i) {
        const double x = rec.mu_hat.grid.x(i);
        if (x < window_lo || x > window_hi) continue;
        const double pt = cfg.problem.p(x);
        const double rt = cfg.problem.r(x);
        const double vt = 0.5 * (pt - rt);
        mu_err = std::max(mu_err, std::abs(rec.mu_hat[i] - interp_cubic(coeffs.mu, x)));
        sum_err = std::max(sum_err, std::abs(rec.p_hat[i] + rec.r_hat[i] - (pt + rt)));
        vsq_err = std::max(vsq_err, std::abs(rec.v_sq_hat[i] - vt * vt));
        p_err = std::max(p_err, std::abs(rec.p_hat[i] - pt));
        r_err = std::max(r_err, std::abs(rec.r_hat[i] - rt));
    }
    const double theta_err = std::abs(rec.theta_hat - cfg.problem.theta);
    const double omega_err = std::abs(rec.omega_pi_hat - coeffs.omega_pi);

    MetaEntries m;
    m.emplace_back("n_list", join_ints(usable));
    m.emplace_back("interior_lo", fmt(window_lo));
    m.emplace_back("interior_hi", fmt(window_hi));
    bool all_pass = true;
    auto gate = [&](const char* name, double err, double tol) {
        const bool ok = err <= tol;
        all_pass = all_pass && ok;
        m.emplace_back(std::string(name) + "_err", fmt(err));
        m.emplace_back(std::string(name) + "_tol", fmt(tol));
        m.emplace_back(std::string(name) + "_status", ok ? "PASS" : "FAIL");
        std::printf("%-8s err = %-12.5g tol = %-8g %s\n", name, err, tol,
                    ok ? "PASS" : "FAIL");
    };
    gate("theta", theta_err, cfg.roundtrip.theta);
    gate("omega_pi", omega_err, cfg.roundtrip.omega_pi);
    gate("mu", mu_err, cfg.roundtrip.mu);
    gate("p_plus_r", sum_err, cfg.roundtrip.p_plus_r);
    gate("v_sq", vsq_err, cfg.roundtrip.v_sq);
    gate("p", p_err, cfg.roundtrip.p);
    gate("r", r_err, cfg.roundtrip.r);
    m.emplace_back("overall_status", all_pass ? "PASS" : "FAIL");
    write_meta(dir / "roundtrip.meta", m);
    std::printf("overall: %s -> %s\n", all_pass ? "PASS" : "FAIL",
                (dir / "roundtrip.meta").c_str());
    return kExitOk;
}

int run_check(const RunConfig& cfg, const RunFlags& flags) {
    const fs::path dir = prep_out_dir(flags);
    const auto coeffs = model::derive_coefficients(cfg.problem);
    const auto acfg = asym::make_config(cfg.problem);
    std::vector<ReportRow> rows;

    // Per-level residual sweep over the spectrum block (one extra level so
    // every requested n has a right neighbor for the midpoint probe).
    const int lo = cfg.spectrum.n_min, hi = cfg.spectrum.n_max;
    const auto spectrum = forward::eigenvalues(cfg.problem, lo, hi + 1, cfg.spectrum.tol);
    if (!spectrum.missing.empty()) {
        std::fprintf(stderr, "no sign change bracketed the eigenvalue for n = %s\n",
                     join_ints(spectrum.missing).c_str());
        if (!flags.allow_gaps) return kExitSpectrumGap;
    }
    std::map<int, double> lam;
    for (const auto& e : spectrum.entries) lam[e.n] = e.lambda;

    std::vector<int> sweep;
    for (int n = lo; n <= hi; ++n)
        if (lam.count(n)) sweep.push_back(n);

    struct SweepSlot {
        double node_sup = -1.0, node_sup_variant = -1.0, char_mid = -1.0;
        std::string note;
    };
    std::vector<SweepSlot> slots(sweep.size());
    for_each_level(static_cast<int>(sweep.size()), [&](int i) {
        const int n = sweep[static_cast<size_t>(i)];
        SweepSlot& s = slots[static_cast<size_t>(i)];
        forward::ForwardSolver solver(cfg.problem);
        auto nl = forward::nodes_with_solver(solver, lam.at(n), n, 1e-13);
        if (nl.count_matches) {
            double sup = 0.0, sup_var = 0.0;
            for (size_t j = 0; j < nl.nodes.size(); ++j) {
                const int jj = static_cast<int>(j);
                sup = std::max(sup, std::abs(nl.nodes[j] - asym::node_asym(acfg, n, jj)));
                sup_var = std::max(
                    sup_var, std::abs(nl.nodes[j] - asym::node_asym(
                                                        acfg, n, jj,
                                                        asym::NodeSeries::sign_variant)));
            }
            s.node_sup = sup;
            s.node_sup_variant = sup_var;
        } else {
            s.note = "note: level n = " + std::to_string(n) + " produced " +
                     std::to_string(nl.nodes.size()) + " interior sign changes";
        }
        if (lam.count(n + 1)) {
            const double mid = 0.5 * (lam.at(n) + lam.at(n + 1));
            s.char_mid = std::abs(solver.characteristic(mid) - asym::char_asym(acfg, mid));
        }
    });

    std::vector<std::pair<int, double>> lam_pts, node_pts;
    for (size_t i = 0; i < sweep.size(); ++i) {
        const int n = sweep[i];
        const double lresid = std::abs(lam.at(n) - asym::lambda_asym(acfg, n));
        rows.push_back({"residual", "lambda", n, lresid, ""});
        lam_pts.emplace_back(n, lresid);
        if (slots[i].node_sup >= 0.0) {
            rows.push_back({"residual", "node_sup", n, slots[i].node_sup, ""});
            rows.push_back(
                {"residual", "node_sup_sign_variant", n, slots[i].node_sup_variant, ""});
            node_pts.emplace_back(n, slots[i].node_sup);
        }
        if (slots[i].char_mid >= 0.0)
            rows.push_back({"residual", "char_mid", n, slots[i].char_mid, ""});
        if (!slots[i].note.empty()) std::fprintf(stderr, "%s\n", slots[i].note.c_str());
    }
    if (auto s = loglog_slope(lam_pts))
        rows.push_back({"slope", "lambda", -1, *s, std::to_string(lam_pts.size()) + " levels"});
    if (auto s = loglog_slope(node_pts))
        rows.push_back({"slope", "node_sup", -1, *s, std::to_string(node_pts.size()) + " levels"});

    // Printed-vs-derived reconstruction-formula divergence table, computed on
    // forward nodes at the inversion levels.
    const std::vector<int> levels = sorted_unique(cfg.inversion.n_list);
    if (levels.size() < 4) bad("inversion.n_list", "the divergence table needs at least 4 levels");
    const auto solves = solve_levels(cfg.problem, acfg, levels, cfg.spectrum.tol);
    inverse::NodalSet set;
    set.provenance = "check";
    for (size_t i = 0; i < levels.size(); ++i) {
        if (solves[i].gap) {
            std::fprintf(stderr, "no sign change bracketed the eigenvalue for n = %d\n",
                         levels[i]);
            if (!flags.allow_gaps) return kExitSpectrumGap;
            continue;
        }
        if (!solves[i].count_ok)
            throw DataError("forward nodes for n = " + std::to_string(levels[i]) +
                            ": interior sign-change count mismatch");
        set.entries[levels[i]] = solves[i].nodes;
    }
    std::vector<int> usable;
    for (const auto& [n, nodes] : set.entries) usable.push_back(n);
    if (usable.size() < 4) throw DataError("fewer than 4 usable levels; cannot tabulate");

    const double th = inverse::estimate_theta(set, usable);
    const inverse::InversionGrid grid{cfg.inversion.grid_lo, cfg.inversion.grid_hi,
                                      cfg.inversion.grid_points};
    const inverse::Curve f_hat = inverse::estimate_f(set, grid, usable);
    auto [mu_hat, mu_prime_hat] = inverse::stage1(f_hat, th);
    const inverse::Curve g_hat = inverse::estimate_g(set, usable, th, mu_hat);
    auto [h_hat, a_hat] = inverse::estimate_h(set, usable, th, mu_hat, g_hat);

    const double d = PI + 2.0 * th;
    const double f0 = f_hat.at(0.0);
    const double g0 = g_hat.at(0.0);
    const double g_pi = g_hat.at(PI);
    const std::vector<double> fp = uniform_gradient(f_hat.values, grid.step());
    const std::vector<double> gp = uniform_gradient(g_hat.values, grid.step());

    const auto l_known = resolve_l(cfg);
    const SampledFunction dl = central_diff(*l_known);

    double mp_printed = 0.0, mp_derived = 0.0, vsq_printed = 0.0, vsq_derived = 0.0;
    for (int i = 0; i < grid.points; ++i) {
        const double x = grid.x(i);
        const double pt = cfg.problem.p(x);
        const double rt = cfg.problem.r(x);
        const double mu_prime_true = 0.5 * (pt + rt);
        const double v_true = 0.5 * (pt - rt);
        const double lp = interp_cubic(dl, x);
        const size_t k = static_cast<size_t>(i);
        mp_printed = std::max(
            mp_printed, std::abs((2.0 * fp[k] + 2.0 * f0 + PI) - mu_prime_true));
        const double mp_hat = fp[k] + 0.5 + th / PI;
        mp_derived = std::max(mp_derived, std::abs(mp_hat - mu_prime_true));
        const double common = gp[k] + mp_hat * d + a_hat;
        vsq_printed =
            std::max(vsq_printed, std::abs((common + lp) / PI - v_true * v_true));
        vsq_derived = std::max(
            vsq_derived,
            std::abs((common - d * d / (2.0 * PI)) / PI + lp - v_true * v_true));
    }
    rows.push_back({"typo", "mu_prime_printed_err", -1, mp_printed, ""});
    rows.push_back({"typo", "mu_prime_derived_err", -1, mp_derived, ""});

    const double omega_printed =
        (g_pi - 3.0 * th * PI - 4.0 * th * th - 0.5 * PI * PI) / (2.0 * PI);
    const double omega_derived = (g_pi - th * PI - 0.5 * PI * PI) / (2.0 * PI);
    rows.push_back({"typo", "omega_pi_printed_err", -1,
                    std::abs(omega_printed - coeffs.omega_pi), ""});
    rows.push_back({"typo", "omega_pi_derived_err", -1,
                    std::abs(omega_derived - coeffs.omega_pi), ""});

    const double sin2 = std::sin(2.0 * th);
    const double v0_true = 0.5 * (cfg.problem.p(0.0) - cfg.problem.r(0.0));
    if (std::abs(sin2) <= 0.1) {
        rows.push_back({"typo", "v0_printed_err", -1, 0.0, "degenerate"});
        rows.push_back({"typo", "v0_derived_err", -1, 0.0, "degenerate"});
    } else {
        const double v0_printed = (g0 - th * PI - 2.0 * th * th) / (PI * sin2);
        const double v0_derived = (g0 + th * d) / (PI * sin2);
        rows.push_back({"typo", "v0_printed_err", -1, std::abs(v0_printed - v0_true), ""});
        rows.push_back({"typo", "v0_derived_err", -1, std::abs(v0_derived - v0_true), ""});
    }
    rows.push_back({"typo", "v_sq_printed_err", -1, vsq_printed, ""});
    rows.push_back({"typo", "v_sq_derived_err", -1, vsq_derived, ""});

    write_report_csv(dir / "asym_report.csv", rows);
    std::printf("asymptotics sweep: %zu levels", sweep.size());
    if (auto s = loglog_slope(lam_pts)) std::printf(", lambda-residual slope %.3f", *s);
    if (auto s = loglog_slope(node_pts)) std::printf(", node-residual slope %.3f", *s);
    std::printf("\n");
    std::printf("divergence table: mu' printed %.4g vs derived %.4g; omega(pi) printed %.4g "
                "vs derived %.4g\n",
                mp_printed, mp_derived, std::abs(omega_printed - coeffs.omega_pi),
                std::abs(omega_derived - coeffs.omega_pi));
    std::printf("wrote %s\n", (dir / "asym_report.csv").c_str());
    return kExitOk;
}

}  // namespace nodal::cli
