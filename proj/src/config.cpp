#include "fpk/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace fpk {

namespace {

using nlohmann::json;

struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
};

using Section = std::map<std::string, Entry>;
using Tree = std::map<std::string, Section>;

[[noreturn]] void bad(int line, const std::string& msg) {
    throw Error(errc::config, "config line " + std::to_string(line) + ": " + msg);
}

std::string trim(std::string s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

bool lower_ident(const std::string& s) {
    if (s.empty()) return false;
    for (char ch : s)
        if (!((ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '_')) return false;
    return !(s[0] >= '0' && s[0] <= '9');
}

Tree lex(const std::string& text) {
    static const char* kSections[] = {"domain",   "coefficients", "initial", "solver",
                                      "lyapunov", "mc",           "tolerances"};
    Tree tree;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::string s = trim(raw);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') bad(line, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            bool known = false;
            for (const char* k : kSections) known = known || section == k;
            if (!known) bad(line, "unknown section [" + section + "]");
            if (tree.count(section)) bad(line, "section [" + section + "] given twice");
            tree[section];
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) bad(line, "expected key = value");
        if (section.empty()) bad(line, "key outside any section");
        std::string key = trim(s.substr(0, eq));
        if (!lower_ident(key)) bad(line, "keys are lowercase identifiers, got '" + key + "'");
        std::string value = trim(s.substr(eq + 1));
        if (value.empty()) bad(line, "key '" + key + "' has no value");
        auto [it, fresh] = tree[section].insert({key, Entry{value, line, false}});
        if (!fresh) bad(line, "key '" + key + "' given twice in [" + section + "]");
    }
    return tree;
}

// split on commas at parenthesis depth zero; commas inside min(,)/max(,)/pow(,)
// stay with their expression
std::vector<std::string> split_list(const std::string& v, int line) {
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (char ch : v) {
        if (ch == '(') ++depth;
        if (ch == ')') --depth;
        if (depth < 0) bad(line, "unbalanced ')' in value");
        if (ch == ',' && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (depth != 0) bad(line, "unbalanced '(' in value");
    out.push_back(trim(cur));
    for (const std::string& piece : out)
        if (piece.empty()) bad(line, "empty entry in comma list");
    return out;
}

class Reader {
public:
    Reader(Tree& t) : tree_(t) {}

    bool has_section(const std::string& s) const { return tree_.count(s) != 0; }

    void require_section(const std::string& s) const {
        if (!has_section(s)) throw Error(errc::config, "missing section [" + s + "]");
    }

    Entry* find(const std::string& sec, const std::string& key) {
        auto it = tree_.find(sec);
        if (it == tree_.end()) return nullptr;
        auto jt = it->second.find(key);
        if (jt == it->second.end()) return nullptr;
        jt->second.used = true;
        return &jt->second;
    }

    Entry& get(const std::string& sec, const std::string& key) {
        Entry* e = find(sec, key);
        if (!e) throw Error(errc::config, "[" + sec + "] is missing key '" + key + "'");
        return *e;
    }

    double num(const std::string& sec, const std::string& key, double dflt) {
        Entry* e = find(sec, key);
        return e ? parse_num(*e) : dflt;
    }
    double num_req(const std::string& sec, const std::string& key) {
        return parse_num(get(sec, key));
    }
    long long integer(const std::string& sec, const std::string& key, long long dflt) {
        Entry* e = find(sec, key);
        if (!e) return dflt;
        double v = parse_num(*e);
        auto n = static_cast<long long>(std::llround(v));
        if (static_cast<double>(n) != v) bad(e->line, "key '" + key + "' needs an integer");
        return n;
    }
    std::string word(const std::string& sec, const std::string& key, const std::string& dflt) {
        Entry* e = find(sec, key);
        if (!e) return dflt;
        if (!lower_ident(e->value)) bad(e->line, "key '" + key + "' needs a word");
        return e->value;
    }
    std::vector<double> num_list(const std::string& sec, const std::string& key) {
        Entry* e = find(sec, key);
        std::vector<double> out;
        if (!e) return out;
        for (const std::string& piece : split_list(e->value, e->line)) {
            Entry tmp{piece, e->line, true};
            out.push_back(parse_num(tmp));
        }
        return out;
    }
    expr::Expr expression(const std::string& sec, const std::string& key, bool required) {
        Entry* e = find(sec, key);
        if (!e) {
            if (required) throw Error(errc::config, "[" + sec + "] is missing key '" + key + "'");
            return {};
        }
        return parse_expr(*e, key);
    }
    std::vector<expr::Expr> expr_list(const std::string& sec, const std::string& key) {
        Entry& e = get(sec, key);
        std::vector<expr::Expr> out;
        for (const std::string& piece : split_list(e.value, e.line)) {
            Entry tmp{piece, e.line, true};
            out.push_back(parse_expr(tmp, key));
        }
        return out;
    }

    void reject(const std::string& sec, const std::string& key, const std::string& why) {
        if (Entry* e = find(sec, key)) bad(e->line, "key '" + key + "' " + why);
    }

    // every key must have been consumed by now
    void finish() const {
        for (const auto& [sec, entries] : tree_)
            for (const auto& [key, e] : entries)
                if (!e.used) bad(e.line, "unknown key '" + key + "' in [" + sec + "]");
    }

private:
    static double parse_num(const Entry& e) {
        const std::string& v = e.value;
        double out = 0;
        auto res = std::from_chars(v.data(), v.data() + v.size(), out);
        if (res.ec != std::errc() || res.ptr != v.data() + v.size())
            bad(e.line, "expected a number, got '" + v + "'");
        return out;
    }
    static expr::Expr parse_expr(const Entry& e, const std::string& key) {
        try {
            return expr::parse(e.value);
        } catch (const ParseError& pe) {
            throw Error(errc::parse, "config line " + std::to_string(e.line) + ", key '" + key +
                                         "': " + pe.what());
        }
    }

    Tree& tree_;
};

DomainSpec read_domain(Reader& r) {
    r.require_section("domain");
    std::string kind = r.word("domain", "kind", "");
    if (kind.empty()) throw Error(errc::config, "[domain] is missing key 'kind'");

    std::string exh = r.word("domain", "exhaustion", "dyadic");
    if (exh != "dyadic" && exh != "linear")
        throw Error(errc::config, "[domain] exhaustion must be dyadic or linear");
    auto rule = exh == "dyadic" ? DomainSpec::Exhaustion::Dyadic : DomainSpec::Exhaustion::Linear;

    if (kind == "interval") {
        double lo = r.num_req("domain", "lower"), hi = r.num_req("domain", "upper");
        double step = r.num("domain", "step", 1.0);
        return DomainSpec::interval(lo, hi, rule, step);
    }
    if (kind == "box") {
        std::vector<double> lo = r.num_list("domain", "lower");
        std::vector<double> hi = r.num_list("domain", "upper");
        if (lo.empty() || hi.empty())
            throw Error(errc::config, "[domain] box needs lower and upper lists");
        double step = r.num("domain", "step", 1.0);
        return DomainSpec::box(std::move(lo), std::move(hi), rule, step);
    }
    if (kind == "whole_space") {
        r.reject("domain", "exhaustion", "does not apply to whole_space (balls of radius k*step)");
        r.reject("domain", "lower", "does not apply to whole_space");
        r.reject("domain", "upper", "does not apply to whole_space");
        auto d = static_cast<int>(r.integer("domain", "dim", 1));
        double step = r.num("domain", "step", 1.0);
        return DomainSpec::whole_space(d, step);
    }
    throw Error(errc::config, "[domain] kind must be interval, box or whole_space");
}

CoefficientSet read_coefficients(Reader& r, int d) {
    r.require_section("coefficients");
    CoefficientSet cs;
    cs.d = d;
    cs.a = r.expr_list("coefficients", "a");
    cs.b = r.expr_list("coefficients", "b");
    auto need = static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
    if (cs.a.size() != need)
        throw Error(errc::config, "[coefficients] a needs " + std::to_string(need) +
                                      " entries (row-major d x d), got " +
                                      std::to_string(cs.a.size()));
    if (cs.b.size() != static_cast<std::size_t>(d))
        throw Error(errc::config, "[coefficients] b needs " + std::to_string(d) +
                                      " entries, got " + std::to_string(cs.b.size()));
    cs.c = r.expression("coefficients", "c", false);
    return cs;
}

InitialMeasure read_initial(Reader& r, int d) {
    r.require_section("initial");
    InitialMeasure im;
    std::string kind = r.word("initial", "kind", "");
    if (kind == "dirac") {
        im.kind = InitialMeasure::Kind::Dirac;
        im.point = r.num_list("initial", "point");
        if (im.point.size() != static_cast<std::size_t>(d))
            throw Error(errc::config, "[initial] point needs " + std::to_string(d) + " entries");
        r.reject("initial", "density", "needs kind = density");
        r.reject("initial", "lower", "needs kind = uniform");
        r.reject("initial", "upper", "needs kind = uniform");
    } else if (kind == "density") {
        im.kind = InitialMeasure::Kind::Density;
        im.density = r.expression("initial", "density", true);
        r.reject("initial", "point", "needs kind = dirac");
        r.reject("initial", "lower", "needs kind = uniform");
        r.reject("initial", "upper", "needs kind = uniform");
    } else if (kind == "uniform") {
        im.kind = InitialMeasure::Kind::Uniform;
        im.lo = r.num_list("initial", "lower");
        im.hi = r.num_list("initial", "upper");
        if (im.lo.size() != static_cast<std::size_t>(d) || im.hi.size() != im.lo.size())
            throw Error(errc::config, "[initial] lower/upper need " + std::to_string(d) +
                                          " entries each");
        r.reject("initial", "point", "needs kind = dirac");
        r.reject("initial", "density", "needs kind = density");
    } else {
        throw Error(errc::config, "[initial] kind must be dirac, density or uniform");
    }
    return im;
}

void read_solver(Reader& r, RunConfig& c) {
    r.require_section("solver");
    c.problem.t_end = r.num_req("solver", "t_end");
    if (!(c.problem.t_end > 0)) throw Error(errc::config, "[solver] t_end must be positive");
    c.solve.K = static_cast<int>(r.integer("solver", "k", c.solve.K));
    c.solve.N = static_cast<int>(r.integer("solver", "n", c.solve.N));
    c.solve.dt = r.num("solver", "dt", c.solve.dt);
    std::string scheme = r.word("solver", "scheme", "upwind");
    if (scheme == "upwind")
        c.solve.scheme = FluxScheme::Upwind;
    else if (scheme == "exp_fitted")
        c.solve.scheme = FluxScheme::ExpFitted;
    else
        throw Error(errc::config, "[solver] scheme must be upwind or exp_fitted");
    c.solve.eps_ladder = r.num_list("solver", "eps_ladder");
    c.solve.save_times = r.num_list("solver", "save_times");
    c.solve.mollify_n = static_cast<int>(r.integer("solver", "mollify_n", c.solve.mollify_n));
}

void read_lyapunov(Reader& r, RunConfig& c) {
    if (!r.has_section("lyapunov")) return;
    LyapunovConfig ly;
    ly.v = r.expression("lyapunov", "v", true);
    Entry* checks = r.find("lyapunov", "checks");
    if (checks) {
        for (const std::string& w : split_list(checks->value, checks->line)) {
            if (w != "existence" && w != "ergodic" && w != "timedep")
                bad(checks->line, "unknown check '" + w + "' (existence, ergodic, timedep)");
            ly.checks.push_back(w);
        }
    } else {
        ly.checks = {"existence"};
    }
    ly.timedep_k = r.expression("lyapunov", "timedep_k", false);
    ly.timedep_h = r.expression("lyapunov", "timedep_h", false);
    ly.n_ladder = r.num_list("lyapunov", "n_ladder");
    ly.params.k_max = static_cast<int>(r.integer("lyapunov", "k_max", ly.params.k_max));
    ly.params.samples_per_shell =
        static_cast<int>(r.integer("lyapunov", "samples", ly.params.samples_per_shell));
    ly.params.seed = static_cast<std::uint64_t>(
        r.integer("lyapunov", "seed", static_cast<long long>(ly.params.seed)));
    ly.params.tol = r.num("lyapunov", "tol", ly.params.tol);
    c.lyapunov = std::move(ly);
}

void read_mc(Reader& r, RunConfig& c) {
    if (!r.has_section("mc")) return;
    long long paths = r.integer("mc", "n_paths", static_cast<long long>(c.mc.n_paths));
    if (paths < 1) throw Error(errc::config, "[mc] n_paths must be positive");
    c.mc.n_paths = static_cast<std::size_t>(paths);
    c.mc.dt = r.num("mc", "dt", c.mc.dt);
    if (r.find("mc", "seed")) {
        c.mc_seed_set = true;
        c.mc.seed = static_cast<std::uint64_t>(
            r.integer("mc", "seed", static_cast<long long>(c.mc.seed)));
    }
    c.mc.threads = static_cast<int>(r.integer("mc", "threads", c.mc.threads));
    c.mc.save_times = r.num_list("mc", "save_times");
}

json expr_json(const expr::Expr& e) { return e.empty() ? json(nullptr) : json(e.str()); }

json expr_list_json(const std::vector<expr::Expr>& v) {
    json out = json::array();
    for (const auto& e : v) out.push_back(e.str());
    return out;
}

} // namespace

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

RunConfig config_parse(const std::string& text) {
    Tree tree = lex(text);
    Reader r(tree);
    RunConfig c;
    c.source = text;
    c.hash = fnv1a(text);

    c.problem.domain = read_domain(r);
    c.problem.coeffs = read_coefficients(r, c.problem.domain.dim);
    c.problem.initial = read_initial(r, c.problem.domain.dim);
    read_solver(r, c);
    read_lyapunov(r, c);
    read_mc(r, c);
    if (r.has_section("tolerances")) {
        c.tol.tol_mass = r.num("tolerances", "tol_mass", c.tol.tol_mass);
        c.tol.compare_l1 = r.num("tolerances", "compare_l1", c.tol.compare_l1);
    }
    c.solve.tol_mass = c.tol.tol_mass;
    r.finish();

    c.problem.check();
    return c;
}

RunConfig config_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_parse(buf.str());
}

std::string config_json(const RunConfig& c) {
    json j;
    j["version"] = "1.0.0";
    char hex[24];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(c.hash));
    j["hash"] = hex;
    j["source"] = c.source;

    const DomainSpec& d = c.problem.domain;
    json jd;
    jd["kind"] = d.kind == DomainSpec::Kind::Interval  ? "interval"
                 : d.kind == DomainSpec::Kind::Box     ? "box"
                                                       : "whole_space";
    jd["dim"] = d.dim;
    jd["lower"] = d.lower;
    jd["upper"] = d.upper;
    jd["exhaustion"] = d.exhaustion == DomainSpec::Exhaustion::Dyadic ? "dyadic" : "linear";
    jd["step"] = d.step;
    j["domain"] = jd;

    json jc;
    jc["a"] = expr_list_json(c.problem.coeffs.a);
    jc["b"] = expr_list_json(c.problem.coeffs.b);
    jc["c"] = expr_json(c.problem.coeffs.c);
    j["coefficients"] = jc;

    const InitialMeasure& im = c.problem.initial;
    json ji;
    ji["kind"] = im.kind == InitialMeasure::Kind::Dirac     ? "dirac"
                 : im.kind == InitialMeasure::Kind::Density ? "density"
                                                            : "uniform";
    ji["point"] = im.point;
    ji["density"] = expr_json(im.density);
    ji["lower"] = im.lo;
    ji["upper"] = im.hi;
    j["initial"] = ji;

    json js;
    js["t_end"] = c.problem.t_end;
    js["k"] = c.solve.K;
    js["n"] = c.solve.N;
    js["dt"] = c.solve.dt;
    js["scheme"] = c.solve.scheme == FluxScheme::Upwind ? "upwind" : "exp_fitted";
    js["eps_ladder"] = c.solve.eps_ladder;
    js["save_times"] = c.solve.save_times;
    js["mollify_n"] = c.solve.mollify_n;
    js["tol_mass"] = c.solve.tol_mass;
    j["solver"] = js;

    if (c.lyapunov) {
        json jl;
        jl["v"] = expr_json(c.lyapunov->v);
        jl["checks"] = c.lyapunov->checks;
        jl["timedep_k"] = expr_json(c.lyapunov->timedep_k);
        jl["timedep_h"] = expr_json(c.lyapunov->timedep_h);
        jl["n_ladder"] = c.lyapunov->n_ladder;
        jl["k_max"] = c.lyapunov->params.k_max;
        jl["samples"] = c.lyapunov->params.samples_per_shell;
        jl["seed"] = c.lyapunov->params.seed;
        jl["tol"] = c.lyapunov->params.tol;
        j["lyapunov"] = jl;
    } else {
        j["lyapunov"] = nullptr;
    }

    json jm;
    jm["n_paths"] = c.mc.n_paths;
    jm["dt"] = c.mc.dt;
    jm["seed"] = c.mc_seed_set ? json(c.mc.seed) : json(nullptr);
    jm["threads"] = c.mc.threads;
    jm["save_times"] = c.mc.save_times;
    j["mc"] = jm;

    json jt;
    jt["tol_mass"] = c.tol.tol_mass;
    jt["compare_l1"] = c.tol.compare_l1;
    j["tolerances"] = jt;

    return j.dump(2);
}

} // namespace fpk
