#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "chaospde/common.hpp"
#include "chaospde/propagator.hpp"
#include "chaospde/spectral.hpp"

namespace chaospde {

struct NoiseConfig {
    std::string kind = "white";  // white | ou | fractional
    double b = 1.0;
    double H = 0.75;
};

struct CouplingConfig {
    std::string kind = "diagonal";  // diagonal | multiplier
    double sigma = 0.5;
    std::string h = "const:1";  // field spec, multiplier only
};

// Experiment description parsed from line-oriented `key = value` text with
// dotted section prefixes. Every field has a default; unknown keys are
// rejected.
struct ExperimentConfig {
    double T = 1.0;
    int K_steps = 1;
    int Q = 16;
    std::size_t M = 1024;
    int N = 4;
    int n = 16;
    int r = 1;
    std::size_t mc_samples = 10000;
    std::uint64_t seed = 12345;
    std::uint64_t enum_limit = 1000000;
    std::size_t sample_points = 64;
    std::string out = "out.csv";
    std::string u0 = "sin:1:1";
    std::vector<NoiseConfig> noises = {NoiseConfig{}};
    std::vector<CouplingConfig> couplings = {CouplingConfig{}};
    std::vector<int> sweep_values;  // empty = per-axis defaults
};

namespace cfgdetail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("config: bad numeric value for '" + key + "': " + value);
    }
}

inline long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("config: bad integer value for '" + key + "': " + value);
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("config: bad unsigned value for '" + key + "': " + value);
    }
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

}  // namespace cfgdetail

// Field spec grammar: comma-separated terms
//   const:AMP | sin:Q:AMP | cos:Q:AMP
inline SpectralField parse_field_spec(const std::string& spec, int cutoff) {
    SpectralField field(cutoff);
    for (const std::string& raw : cfgdetail::split(spec, ',')) {
        std::string term = cfgdetail::trim(raw);
        if (term.empty()) throw ConfigError("field spec: empty term in '" + spec + "'");
        auto parts = cfgdetail::split(term, ':');
        const std::string& kind = parts[0];
        if (kind == "const") {
            if (parts.size() != 2) throw ConfigError("field spec: const takes one value: '" + term + "'");
            field += SpectralField::constant(cfgdetail::parse_double("field", parts[1]), cutoff);
        } else if (kind == "sin" || kind == "cos") {
            if (parts.size() != 3) throw ConfigError("field spec: " + kind + " takes mode and amplitude: '" + term + "'");
            int q = static_cast<int>(cfgdetail::parse_int("field mode", parts[1]));
            double amp = cfgdetail::parse_double("field amplitude", parts[2]);
            if (q < 1 || q > cutoff) throw ConfigError("field spec: mode " + parts[1] + " outside [1, Q]");
            field += kind == "sin" ? SpectralField::harmonic_sin(q, amp, cutoff)
                                   : SpectralField::harmonic_cos(q, amp, cutoff);
        } else {
            throw ConfigError("field spec: unknown term kind '" + kind + "'");
        }
    }
    return field;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = cfgdetail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = cfgdetail::trim(t.substr(0, eq));
        std::string value = cfgdetail::trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (kv.count(key)) throw ConfigError("config: duplicate key '" + key + "'");
        kv[key] = value;
    }

    ExperimentConfig cfg;
    cfg.noises.clear();
    cfg.couplings.clear();

    auto take = [&kv](const std::string& key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    std::vector<std::string> consumed;
    auto consume = [&](const std::string& key) -> const std::string* {
        const std::string* v = take(key);
        if (v) consumed.push_back(key);
        return v;
    };

    using namespace cfgdetail;
    if (auto* v = consume("T")) cfg.T = parse_double("T", *v);
    if (auto* v = consume("K_steps")) cfg.K_steps = static_cast<int>(parse_int("K_steps", *v));
    if (auto* v = consume("Q")) cfg.Q = static_cast<int>(parse_int("Q", *v));
    if (auto* v = consume("M")) cfg.M = static_cast<std::size_t>(parse_int("M", *v));
    if (auto* v = consume("N")) cfg.N = static_cast<int>(parse_int("N", *v));
    if (auto* v = consume("n")) cfg.n = static_cast<int>(parse_int("n", *v));
    if (auto* v = consume("r")) cfg.r = static_cast<int>(parse_int("r", *v));
    if (auto* v = consume("mc_samples")) cfg.mc_samples = static_cast<std::size_t>(parse_int("mc_samples", *v));
    if (auto* v = consume("seed")) cfg.seed = parse_u64("seed", *v);
    if (auto* v = consume("enum_limit")) cfg.enum_limit = parse_u64("enum_limit", *v);
    if (auto* v = consume("sample_points")) cfg.sample_points = static_cast<std::size_t>(parse_int("sample_points", *v));
    if (auto* v = consume("out")) cfg.out = *v;
    if (auto* v = consume("u0")) cfg.u0 = *v;
    if (auto* v = consume("sweep.values")) {
        for (const auto& part : split(*v, ','))
            cfg.sweep_values.push_back(static_cast<int>(parse_int("sweep.values", trim(part))));
    }

    for (int i = 1;; ++i) {
        std::string prefix = "noise." + std::to_string(i) + ".";
        const std::string* kind = consume(prefix + "kind");
        const std::string* bval = consume(prefix + "b");
        const std::string* hval = consume(prefix + "H");
        if (!kind && !bval && !hval) break;
        NoiseConfig nc;
        if (kind) nc.kind = *kind;
        if (bval) nc.b = parse_double(prefix + "b", *bval);
        if (hval) nc.H = parse_double(prefix + "H", *hval);
        cfg.noises.push_back(nc);
    }
    for (int i = 1;; ++i) {
        std::string prefix = "B." + std::to_string(i) + ".";
        const std::string* kind = consume(prefix + "kind");
        const std::string* sval = consume(prefix + "sigma");
        const std::string* hval = consume(prefix + "h");
        if (!kind && !sval && !hval) break;
        CouplingConfig cc;
        if (kind) cc.kind = *kind;
        if (sval) cc.sigma = parse_double(prefix + "sigma", *sval);
        if (hval) cc.h = *hval;
        cfg.couplings.push_back(cc);
    }
    if (cfg.noises.empty()) cfg.noises.push_back(NoiseConfig{});
    if (cfg.couplings.empty()) cfg.couplings.push_back(CouplingConfig{});

    for (const auto& [key, value] : kv) {
        bool known = false;
        for (const auto& k : consumed)
            if (k == key) known = true;
        if (!known) throw ConfigError("config: unknown key '" + key + "'");
    }

    // schema validation
    if (!(cfg.T > 0.0)) throw ConfigError("config: T must be positive");
    if (cfg.K_steps < 1) throw ConfigError("config: K_steps must be >= 1");
    if (cfg.Q < 1) throw ConfigError("config: Q must be >= 1");
    if (cfg.M < 2) throw ConfigError("config: M must be >= 2");
    if (cfg.N < 0) throw ConfigError("config: N must be >= 0");
    if (cfg.n < 1) throw ConfigError("config: n must be >= 1");
    if (cfg.r < 1) throw ConfigError("config: r must be >= 1");
    if (cfg.mc_samples < 1) throw ConfigError("config: mc_samples must be >= 1");
    if (cfg.sample_points < 2) throw ConfigError("config: sample_points must be >= 2");
    if (cfg.noises.size() != cfg.couplings.size())
        throw ConfigError("config: noise list and B list must have the same length");
    if (static_cast<std::size_t>(cfg.r) > cfg.noises.size())
        throw ConfigError("config: r exceeds the number of configured noises");
    for (const auto& nc : cfg.noises) {
        if (nc.kind != "white" && nc.kind != "ou" && nc.kind != "fractional")
            throw ConfigError("config: unknown noise kind '" + nc.kind + "'");
        if (nc.kind == "ou" && !(nc.b > 0.0)) throw ConfigError("config: OU rate b must be positive");
        if (nc.kind == "fractional" && !(nc.H > 0.5 && nc.H < 1.0))
            throw ConfigError("config: Hurst parameter must lie in (1/2, 1)");
    }
    for (const auto& cc : cfg.couplings)
        if (cc.kind != "diagonal" && cc.kind != "multiplier")
            throw ConfigError("config: unknown coupling kind '" + cc.kind + "'");
    // field specs must parse
    parse_field_spec(cfg.u0, cfg.Q);
    for (const auto& cc : cfg.couplings)
        if (cc.kind == "multiplier") parse_field_spec(cc.h, cfg.Q);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
    using cfgdetail::format_double;
    std::ostringstream out;
    out << "T = " << format_double(cfg.T) << "\n";
    out << "K_steps = " << cfg.K_steps << "\n";
    out << "Q = " << cfg.Q << "\n";
    out << "M = " << cfg.M << "\n";
    out << "N = " << cfg.N << "\n";
    out << "n = " << cfg.n << "\n";
    out << "r = " << cfg.r << "\n";
    out << "mc_samples = " << cfg.mc_samples << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "enum_limit = " << cfg.enum_limit << "\n";
    out << "sample_points = " << cfg.sample_points << "\n";
    out << "out = " << cfg.out << "\n";
    out << "u0 = " << cfg.u0 << "\n";
    if (!cfg.sweep_values.empty()) {
        out << "sweep.values = ";
        for (std::size_t i = 0; i < cfg.sweep_values.size(); ++i)
            out << (i ? "," : "") << cfg.sweep_values[i];
        out << "\n";
    }
    for (std::size_t i = 0; i < cfg.noises.size(); ++i) {
        const auto& nc = cfg.noises[i];
        std::string prefix = "noise." + std::to_string(i + 1) + ".";
        out << prefix << "kind = " << nc.kind << "\n";
        if (nc.kind == "ou") out << prefix << "b = " << format_double(nc.b) << "\n";
        if (nc.kind == "fractional") out << prefix << "H = " << format_double(nc.H) << "\n";
    }
    for (std::size_t i = 0; i < cfg.couplings.size(); ++i) {
        const auto& cc = cfg.couplings[i];
        std::string prefix = "B." + std::to_string(i + 1) + ".";
        out << prefix << "kind = " << cc.kind << "\n";
        if (cc.kind == "diagonal") out << prefix << "sigma = " << format_double(cc.sigma) << "\n";
        if (cc.kind == "multiplier") out << prefix << "h = " << cc.h << "\n";
    }
    return out.str();
}

// Concrete objects from the parsed description.
inline NoiseSpec make_noise(const NoiseConfig& nc, double T) {
    if (nc.kind == "white") return NoiseSpec::white(T);
    if (nc.kind == "ou") return NoiseSpec::ornstein_uhlenbeck(nc.b, T);
    return NoiseSpec::fractional(nc.H, T);
}

inline SystemOperators make_system(const ExperimentConfig& cfg, double horizon) {
    SystemOperators ops;
    ops.generator = SpectralGenerator{0.0};
    for (const auto& nc : cfg.noises) ops.noises.push_back(make_noise(nc, horizon));
    for (const auto& cc : cfg.couplings) {
        if (cc.kind == "diagonal")
            ops.couplings.push_back(CouplingOperator::diagonal(cc.sigma));
        else
            ops.couplings.push_back(CouplingOperator::multiplier(parse_field_spec(cc.h, cfg.Q)));
    }
    return ops;
}

inline SpectralField make_initial_field(const ExperimentConfig& cfg) { return parse_field_spec(cfg.u0, cfg.Q); }

}  // namespace chaospde
