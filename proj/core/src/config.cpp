#include "vpgrav/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "vpgrav/snapshot.hpp"

namespace vpgrav {

Params RunConfig::params() const {
    Params p;
    p.g = g;
    p.eta = eta;
    p.beta = beta;
    p.beta_tilde = beta_tilde;
    p.green_constant = green_constant;
    return p;
}

SpatialGrid RunConfig::spatial_grid() const {
    if (vertical_refinement > 1.0)
        return SpatialGrid::refined(n1, n2, n3, L3, vertical_refinement);
    return SpatialGrid::uniform(n1, n2, n3, L3);
}

VelocityGrid RunConfig::velocity_grid() const { return VelocityGrid::cube(m1, m2, m3, vmax); }

BoundaryDatum RunConfig::boundary() const {
    if (boundary_kind == "maxwellian" || boundary_kind == "vacuum")
        return BoundaryDatum::maxwellian(boundary_kind == "vacuum" ? 0.0 : amplitude,
                                         boundary_decay());
    if (boundary_kind == "tabulated") {
        Snapshot snap = read_snapshot(table);
        if (snap.meta.dims.size() != 5)
            throw ConfigError("boundary.table: expected 5 dims (x1 x2 v1 v2 v3)");
        int tn1 = static_cast<int>(snap.meta.dims[0]);
        int tn2 = static_cast<int>(snap.meta.dims[1]);
        int mv = static_cast<int>(snap.meta.dims[2]);
        if (snap.meta.dims[3] != snap.meta.dims[2] || snap.meta.dims[4] != snap.meta.dims[2])
            throw ConfigError("boundary.table: velocity dims must agree");
        return BoundaryDatum::tabulated(tn1, tn2, mv, snap.meta.vmax,
                                        std::move(snap.payload), amplitude,
                                        boundary_decay());
    }
    throw ConfigError("boundary.kind must be maxwellian, vacuum, or tabulated");
}

void RunConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError(what); };
    if (!(g > 0)) fail("physics.g must be positive");
    if (eta != 1 && eta != -1) fail("physics.eta must be +1 or -1");
    if (!(beta > 0)) fail("physics.beta must be positive");
    if (!(beta_tilde > 0)) fail("physics.beta_tilde must be positive");
    if (!(green_constant > 0)) fail("physics.green_constant must be positive");
    if (n1 < 1 || n2 < 1) fail("grid.n1/n2 must be >= 1");
    if (n3 < 2) fail("grid.n3 must be >= 2");
    if (!(L3 > 0)) fail("grid.L3 must be positive");
    if (m1 < 1 || m2 < 1 || m3 < 2) fail("grid.m1/m2 >= 1 and m3 >= 2 required");
    if (!(vmax > 0)) fail("grid.vmax must be positive");
    if (vertical_refinement < 0) fail("grid.vertical_refinement must be >= 0");
    if (boundary_kind != "maxwellian" && boundary_kind != "vacuum" &&
        boundary_kind != "tabulated")
        fail("boundary.kind must be maxwellian, vacuum, or tabulated");
    if (boundary_kind == "tabulated" && table.empty())
        fail("boundary.table is required for the tabulated kind");
    if (amplitude < 0) fail("boundary.amplitude must be >= 0");
    if (decay < 0) fail("boundary.decay must be >= 0");
    if (!(tol_fix > 0)) fail("steady.tol_fix must be positive");
    if (max_iter < 1) fail("steady.max_iter must be >= 1");
    if (!(h_scale > 0)) fail("steady.h_scale must be positive");
    if (!(dt > 0)) fail("dynamic.dt must be positive");
    if (T < 0) fail("dynamic.T must be >= 0");
    if (f0_amplitude < 0) fail("dynamic.f0_amplitude must be >= 0");
    if (output_stride < 1) fail("dynamic.output_stride must be >= 1");
    if (substeps < 1) fail("dynamic.substeps must be >= 1");
    if (snapshot_stride < 1) fail("dynamic.snapshot_stride must be >= 1");
    if (samples < 1) fail("verify.samples must be >= 1");
    if (!(tol_exit > 0)) fail("verify.tol_exit must be positive");
}

namespace {

struct Setter {
    enum class Type { d, i, u, b, s } type;
    void* ptr;
};

std::map<std::string, Setter> key_table(RunConfig& c) {
    using T = Setter::Type;
    return {
        {"physics.g", {T::d, &c.g}},
        {"physics.eta", {T::i, &c.eta}},
        {"physics.beta", {T::d, &c.beta}},
        {"physics.beta_tilde", {T::d, &c.beta_tilde}},
        {"physics.green_constant", {T::d, &c.green_constant}},
        {"grid.n1", {T::i, &c.n1}},
        {"grid.n2", {T::i, &c.n2}},
        {"grid.n3", {T::i, &c.n3}},
        {"grid.L3", {T::d, &c.L3}},
        {"grid.m1", {T::i, &c.m1}},
        {"grid.m2", {T::i, &c.m2}},
        {"grid.m3", {T::i, &c.m3}},
        {"grid.vmax", {T::d, &c.vmax}},
        {"grid.vertical_refinement", {T::d, &c.vertical_refinement}},
        {"boundary.kind", {T::s, &c.boundary_kind}},
        {"boundary.amplitude", {T::d, &c.amplitude}},
        {"boundary.decay", {T::d, &c.decay}},
        {"boundary.table", {T::s, &c.table}},
        {"steady.tol_fix", {T::d, &c.tol_fix}},
        {"steady.max_iter", {T::i, &c.max_iter}},
        {"steady.h_scale", {T::d, &c.h_scale}},
        {"steady.seed_from_closed_form", {T::b, &c.seed_from_closed_form}},
        {"dynamic.dt", {T::d, &c.dt}},
        {"dynamic.T", {T::d, &c.T}},
        {"dynamic.f0_amplitude", {T::d, &c.f0_amplitude}},
        {"dynamic.output_stride", {T::i, &c.output_stride}},
        {"dynamic.substeps", {T::i, &c.substeps}},
        {"dynamic.snapshot_stride", {T::i, &c.snapshot_stride}},
        {"dynamic.predictor_corrector", {T::b, &c.predictor_corrector}},
        {"verify.seed", {T::u, &c.seed}},
        {"verify.samples", {T::i, &c.samples}},
        {"verify.tol_exit", {T::d, &c.tol_exit}},
        {"verify.tol_jacobian", {T::d, &c.tol_jacobian}},
        {"verify.tol_weight_drift", {T::d, &c.tol_weight_drift}},
        {"verify.threads", {T::u, &c.threads}},
    };
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    auto table = key_table(cfg);

    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any [section]");
        std::string full = section + "." + key;
        auto it = table.find(full);
        if (it == table.end())
            throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
        try {
            switch (it->second.type) {
                case Setter::Type::d:
                    *static_cast<double*>(it->second.ptr) = std::stod(val);
                    break;
                case Setter::Type::i:
                    *static_cast<int*>(it->second.ptr) = std::stoi(val);
                    break;
                case Setter::Type::u:
                    if (full == "verify.threads")
                        *static_cast<unsigned*>(it->second.ptr) =
                            static_cast<unsigned>(std::stoul(val));
                    else
                        *static_cast<std::uint64_t*>(it->second.ptr) = std::stoull(val);
                    break;
                case Setter::Type::b: {
                    if (val == "true" || val == "1")
                        *static_cast<bool*>(it->second.ptr) = true;
                    else if (val == "false" || val == "0")
                        *static_cast<bool*>(it->second.ptr) = false;
                    else
                        throw std::invalid_argument("bool");
                    break;
                }
                case Setter::Type::s:
                    *static_cast<std::string*>(it->second.ptr) = val;
                    break;
            }
        } catch (const std::exception&) {
            throw ConfigError("invalid value for " + full + ": '" + val + "'");
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace {
std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

std::string echo_config(const RunConfig& c) {
    std::ostringstream os;
    os << "[physics]\n"
       << "g = " << num(c.g) << "\n"
       << "eta = " << c.eta << "\n"
       << "beta = " << num(c.beta) << "\n"
       << "beta_tilde = " << num(c.beta_tilde) << "\n"
       << "green_constant = " << num(c.green_constant) << "\n\n";
    os << "[grid]\n"
       << "n1 = " << c.n1 << "\n"
       << "n2 = " << c.n2 << "\n"
       << "n3 = " << c.n3 << "\n"
       << "L3 = " << num(c.L3) << "\n"
       << "m1 = " << c.m1 << "\n"
       << "m2 = " << c.m2 << "\n"
       << "m3 = " << c.m3 << "\n"
       << "vmax = " << num(c.vmax) << "\n"
       << "vertical_refinement = " << num(c.vertical_refinement) << "\n\n";
    os << "[boundary]\n"
       << "kind = " << c.boundary_kind << "\n"
       << "amplitude = " << num(c.amplitude) << "\n"
       << "decay = " << num(c.decay) << "\n";
    if (!c.table.empty()) os << "table = " << c.table << "\n";
    os << "\n";
    os << "[steady]\n"
       << "tol_fix = " << num(c.tol_fix) << "\n"
       << "max_iter = " << c.max_iter << "\n"
       << "h_scale = " << num(c.h_scale) << "\n"
       << "seed_from_closed_form = " << (c.seed_from_closed_form ? "true" : "false") << "\n\n";
    os << "[dynamic]\n"
       << "dt = " << num(c.dt) << "\n"
       << "T = " << num(c.T) << "\n"
       << "f0_amplitude = " << num(c.f0_amplitude) << "\n"
       << "output_stride = " << c.output_stride << "\n"
       << "substeps = " << c.substeps << "\n"
       << "snapshot_stride = " << c.snapshot_stride << "\n"
       << "predictor_corrector = " << (c.predictor_corrector ? "true" : "false") << "\n\n";
    os << "[verify]\n"
       << "seed = " << c.seed << "\n"
       << "samples = " << c.samples << "\n"
       << "tol_exit = " << num(c.tol_exit) << "\n"
       << "tol_jacobian = " << num(c.tol_jacobian) << "\n"
       << "tol_weight_drift = " << num(c.tol_weight_drift) << "\n"
       << "threads = " << c.threads << "\n";
    return os.str();
}

}  // namespace vpgrav
