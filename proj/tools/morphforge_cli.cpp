// Command-line front end: experiment configs in, JSON/CSV results out.
//
// Subcommands: solve-circle | sphere | morph-energy | bend-energy |
//              el-check | sobolev-norm | admissibility
//
// Conventions shared by every subcommand:
//   - results go to stdout as JSON (and to --out PATH when given);
//   - the JSON embeds the full resolved config and the library version;
//   - numbers are printed with 17 significant digits, so identical configs
//     produce byte-identical output;
//   - exit 0 on success, 2 on invalid input, 3 on numerical failure; the
//     "error" field carries the originating error name;
//   - a JSON config file (--config) supplies defaults, flags override it,
//     unknown config keys are rejected;
//   - MORPHFORGE_THREADS caps the worker count, --quiet silences progress.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <morphforge/circlemorph.hpp>
#include <morphforge/eleq.hpp>
#include <morphforge/energy.hpp>
#include <morphforge/errors.hpp>
#include <morphforge/evolve.hpp>
#include <morphforge/jsonio.hpp>
#include <morphforge/manifold.hpp>
#include <morphforge/spheremorph.hpp>
#include <morphforge/velocity.hpp>
#include <morphforge/version.hpp>

using morphforge::jsonio::format_double;
using morphforge::jsonio::Json;

namespace {

bool g_quiet = false;
long long g_seed = 0;
std::string g_command;

void progress(const std::string& msg) {
  if (!g_quiet) std::cerr << "[morphforge] " << msg << std::endl;
}

// ---------------------------------------------------------------------------
// small parsers

std::vector<std::string> split(const std::string& s, char sep) {
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

std::string trimmed(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw morphforge::ValidationError(what + ": cannot parse number '" + s + "'");
  }
  if (used != s.size())
    throw morphforge::ValidationError(what + ": trailing characters in number '" + s + "'");
  return v;
}

std::vector<double> parse_doubles(const std::string& s, int expect, const std::string& what) {
  auto parts = split(s, ',');
  if (expect >= 0 && static_cast<int>(parts.size()) != expect)
    throw morphforge::ValidationError(what + ": expected " + std::to_string(expect) +
                                      " comma-separated numbers, got '" + s + "'");
  std::vector<double> vals;
  for (auto& p : parts) vals.push_back(to_double(trimmed(p), what));
  return vals;
}

morphforge::Vec3 parse_vec3(const std::string& s, const std::string& what) {
  auto v = parse_doubles(s, 3, what);
  return morphforge::Vec3(v[0], v[1], v[2]);
}

// Complex literals for Mobius entries: "1.5", "-2", "1.1+0.3i", "0.3i", "-i".
std::complex<double> parse_complex(const std::string& raw) {
  std::string s;
  for (char c : raw)
    if (c != ' ' && c != '\t') s += c;
  if (s.empty()) throw morphforge::ValidationError("empty complex literal");
  if (s.back() != 'i' && s.back() != 'I') return {to_double(s, "complex literal"), 0.0};
  std::string body = s.substr(0, s.size() - 1);
  // split off a trailing imaginary part: the last +/- that is not a leading
  // sign and not part of an exponent
  std::size_t cut = std::string::npos;
  for (std::size_t i = body.size(); i-- > 1;) {
    if ((body[i] == '+' || body[i] == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
      cut = i;
      break;
    }
  }
  auto imag_value = [](const std::string& t) -> double {
    if (t.empty() || t == "+") return 1.0;
    if (t == "-") return -1.0;
    return to_double(t, "complex literal");
  };
  if (cut == std::string::npos) return {0.0, imag_value(body)};
  return {to_double(body.substr(0, cut), "complex literal"), imag_value(body.substr(cut))};
}

// ---------------------------------------------------------------------------
// config handling: every option is registered in a table so that a JSON
// config file can fill it (flags override), unknown keys are rejected, and
// the fully resolved record can be embedded in the output.

struct Binding {
  std::string key;
  enum Type { kDouble, kInt, kString, kBool } type;
  void* ptr;
  CLI::Option* opt = nullptr;
  bool from_config = false;
};

class ParamTable {
 public:
  CLI::Option* add(CLI::App& cmd, const std::string& flag, double& var, const std::string& help) {
    CLI::Option* o = cmd.add_option(flag, var, help);
    binds_.push_back({key_of(flag), Binding::kDouble, &var, o, false});
    return o;
  }
  CLI::Option* add(CLI::App& cmd, const std::string& flag, int& var, const std::string& help) {
    CLI::Option* o = cmd.add_option(flag, var, help);
    binds_.push_back({key_of(flag), Binding::kInt, &var, o, false});
    return o;
  }
  CLI::Option* add(CLI::App& cmd, const std::string& flag, std::string& var,
                   const std::string& help) {
    CLI::Option* o = cmd.add_option(flag, var, help);
    binds_.push_back({key_of(flag), Binding::kString, &var, o, false});
    return o;
  }
  CLI::Option* add_flag(CLI::App& cmd, const std::string& flag, bool& var,
                        const std::string& help) {
    CLI::Option* o = cmd.add_flag(flag, var, help);
    binds_.push_back({key_of(flag), Binding::kBool, &var, o, false});
    return o;
  }

  // Applies a JSON config file. Command-line flags win over config values;
  // keys that no option claims are an error.
  void merge_config(const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in)
      throw morphforge::ValidationError("cannot read config file '" + path + "'", "IoError");
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const std::exception& ex) {
      throw morphforge::ValidationError("config '" + path + "': " + ex.what());
    }
    if (!doc.is_object())
      throw morphforge::ValidationError("config '" + path + "' must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      Binding* b = find(it.key());
      if (!b)
        throw morphforge::ValidationError("config '" + path + "': unknown key '" + it.key() +
                                          "'");
      if (b->opt && b->opt->count() > 0) continue;  // flag overrides config
      const nlohmann::json& v = it.value();
      switch (b->type) {
        case Binding::kDouble:
          if (!v.is_number())
            throw morphforge::ValidationError("config key '" + it.key() + "' must be a number");
          *static_cast<double*>(b->ptr) = v.get<double>();
          break;
        case Binding::kInt:
          if (!v.is_number_integer())
            throw morphforge::ValidationError("config key '" + it.key() + "' must be an integer");
          *static_cast<int*>(b->ptr) = v.get<int>();
          break;
        case Binding::kString:
          if (!v.is_string())
            throw morphforge::ValidationError("config key '" + it.key() + "' must be a string");
          *static_cast<std::string*>(b->ptr) = v.get<std::string>();
          break;
        case Binding::kBool:
          if (!v.is_boolean())
            throw morphforge::ValidationError("config key '" + it.key() + "' must be a boolean");
          *static_cast<bool*>(b->ptr) = v.get<bool>();
          break;
      }
      b->from_config = true;
    }
    // blanket invariant on the config surface: tolerances are positive
    for (const Binding& b : binds_) {
      if (b.type == Binding::kDouble && b.key.find("tol") != std::string::npos &&
          *static_cast<double*>(b.ptr) <= 0)
        throw morphforge::ValidationError("tolerance '" + b.key + "' must be positive");
    }
  }

  bool provided(const std::string& key) const {
    for (const Binding& b : binds_)
      if (b.key == key) return (b.opt && b.opt->count() > 0) || b.from_config;
    return false;
  }

  Json resolved() const {
    Json obj = Json::object();
    obj.add("seed", g_seed);
    obj.add("quiet", g_quiet);
    for (const Binding& b : binds_) {
      switch (b.type) {
        case Binding::kDouble: obj.add(b.key, *static_cast<const double*>(b.ptr)); break;
        case Binding::kInt: obj.add(b.key, *static_cast<const int*>(b.ptr)); break;
        case Binding::kString: obj.add(b.key, *static_cast<const std::string*>(b.ptr)); break;
        case Binding::kBool: obj.add(b.key, *static_cast<const bool*>(b.ptr)); break;
      }
    }
    return obj;
  }

 private:
  static std::string key_of(const std::string& flag) {
    // "--t-samples" -> "t_samples"; take the first (long) name before any comma
    std::string first = split(flag, ',')[0];
    std::size_t pos = first.find_first_not_of('-');
    std::string key = pos == std::string::npos ? first : first.substr(pos);
    for (char& c : key)
      if (c == '-') c = '_';
    return key;
  }

  Binding* find(const std::string& key) {
    for (Binding& b : binds_)
      if (b.key == key) return &b;
    return nullptr;
  }

  std::vector<Binding> binds_;
};

// ---------------------------------------------------------------------------
// output plumbing

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw morphforge::ValidationError("cannot open '" + path + "' for writing", "IoError");
  out << text;
  out.flush();
  if (!out.good())
    throw morphforge::ValidationError("write failed for '" + path + "'", "IoError");
}

void emit_result(const Json& root, const std::string& out_path) {
  std::string text = root.dump() + "\n";
  std::cout << text;
  if (!out_path.empty()) write_file(out_path, text);
}

Json result_header(const std::string& command, const ParamTable& tbl) {
  Json root = Json::object();
  root.add("command", command);
  root.add("version", morphforge::version_string);
  root.add("config", tbl.resolved());
  return root;
}

// ---------------------------------------------------------------------------
// manifold and map specs, e.g. "circle:R=1,n=256", "sphere:R=2,ntheta=64,nphi=128"

struct ManifoldSpec {
  std::string kind;
  std::map<std::string, double> kv;
};

ManifoldSpec parse_manifold_spec(const std::string& text) {
  ManifoldSpec spec;
  auto head = split(text, ':');
  if (head.size() > 2 || head[0].empty())
    throw morphforge::ValidationError("bad manifold spec '" + text + "'");
  spec.kind = trimmed(head[0]);
  if (head.size() == 2 && !trimmed(head[1]).empty()) {
    for (auto& item : split(head[1], ',')) {
      auto kv = split(item, '=');
      if (kv.size() != 2)
        throw morphforge::ValidationError("bad manifold parameter '" + item + "' in '" + text +
                                          "'");
      spec.kv[trimmed(kv[0])] = to_double(trimmed(kv[1]), "manifold spec");
    }
  }
  return spec;
}

double spec_value(const ManifoldSpec& s, const std::string& key, double fallback) {
  auto it = s.kv.find(key);
  return it == s.kv.end() ? fallback : it->second;
}

int spec_int(const ManifoldSpec& s, const std::string& key, int fallback) {
  double v = spec_value(s, key, fallback);
  int n = static_cast<int>(std::lround(v));
  if (std::abs(v - n) > 1e-9 || n <= 0)
    throw morphforge::ValidationError("manifold parameter '" + key +
                                      "' must be a positive integer");
  return n;
}

void check_spec_keys(const ManifoldSpec& s, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : s.kv) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok)
      throw morphforge::ValidationError("manifold spec: unknown parameter '" + key + "' for '" +
                                        s.kind + "'");
  }
}

// level doubles the grid resolution level times (refinement studies)
morphforge::EmbeddedManifold build_manifold(const ManifoldSpec& s, int level = 0) {
  const int scale = 1 << level;
  if (s.kind == "circle") {
    check_spec_keys(s, {"R", "n"});
    return morphforge::make_circle(spec_value(s, "R", 1.0), spec_int(s, "n", 128) * scale);
  }
  if (s.kind == "sphere") {
    check_spec_keys(s, {"R", "ntheta", "nphi"});
    return morphforge::make_sphere(spec_value(s, "R", 1.0), spec_int(s, "ntheta", 64) * scale,
                                   spec_int(s, "nphi", 128) * scale);
  }
  if (s.kind == "ellipse") {
    check_spec_keys(s, {"a", "b", "n"});
    return morphforge::make_ellipse(spec_value(s, "a", 1.3), spec_value(s, "b", 0.8),
                                    spec_int(s, "n", 128) * scale);
  }
  throw morphforge::ValidationError("unknown manifold kind '" + s.kind +
                                    "' (circle|sphere|ellipse)");
}

// Chart self-maps for el-check: "identity", or "wavy:amp=A" which shifts the
// first chart coordinate by (A/2) sin(u0) (a generic non-critical map).
morphforge::ChartMap parse_chart_map(const std::string& text) {
  auto head = split(text, ':');
  std::string kind = trimmed(head[0]);
  morphforge::ChartMap f;
  if (kind == "identity") {
    if (head.size() > 1 && !trimmed(head[1]).empty())
      throw morphforge::ValidationError("map 'identity' takes no parameters");
    f.value = [](const morphforge::Param& u) { return u; };
    f.jacobian = [](const morphforge::Param&) { return std::array<double, 4>{1, 0, 0, 1}; };
    f.hessian = [](const morphforge::Param&) { return std::array<double, 6>{0, 0, 0, 0, 0, 0}; };
    return f;
  }
  if (kind == "wavy") {
    double amp = 0.1;
    if (head.size() == 2 && !trimmed(head[1]).empty()) {
      auto kv = split(head[1], '=');
      if (kv.size() != 2 || trimmed(kv[0]) != "amp")
        throw morphforge::ValidationError("map 'wavy' takes a single parameter amp=<value>");
      amp = to_double(trimmed(kv[1]), "map spec");
    }
    f.value = [amp](const morphforge::Param& u) {
      return morphforge::Param{u[0] + 0.5 * amp * std::sin(u[0]), u[1]};
    };
    f.jacobian = [amp](const morphforge::Param& u) {
      return std::array<double, 4>{1 + 0.5 * amp * std::cos(u[0]), 0, 0, 1};
    };
    f.hessian = [amp](const morphforge::Param& u) {
      return std::array<double, 6>{-0.5 * amp * std::sin(u[0]), 0, 0, 0, 0, 0};
    };
    return f;
  }
  throw morphforge::ValidationError("unknown map spec '" + text + "' (identity|wavy:amp=A)");
}

// ---------------------------------------------------------------------------
// velocity-field construction shared by the field-driven subcommands

struct FieldFlags {
  std::string family = "radial";
  double R = 2.0;                      // radial: time-one flow is p -> R p
  std::string constant = "0,0,0";      // constant family
  std::string matrix;                  // linear family, 9 row-major entries
  std::string offset = "0,0,0";        // linear family
  std::string vx = "0", vy = "0", vz = "0";  // custom-expression family
  std::string domain_center = "0,0,0";
  double domain_radius = 0;            // 0 = unbounded
  double bump_r1 = 0, bump_r2 = 0;     // bump_r2 > 0 applies a radial cutoff
  double fd_step = 0;                  // FD step for expression derivatives
};

void register_field_flags(CLI::App& cmd, ParamTable& tbl, FieldFlags& ff) {
  tbl.add(cmd, "--family", ff.family,
          "velocity family: radial|constant|linear|custom-expression");
  tbl.add(cmd, "--R", ff.R, "radial family: dilation factor of the time-one flow");
  tbl.add(cmd, "--constant", ff.constant, "constant family: 'cx,cy,cz'");
  tbl.add(cmd, "--matrix", ff.matrix, "linear family: 9 row-major entries 'a00,...,a22'");
  tbl.add(cmd, "--offset", ff.offset, "linear family: affine part 'bx,by,bz'");
  tbl.add(cmd, "--vx", ff.vx, "custom-expression family: x-component in x,y,z,t");
  tbl.add(cmd, "--vy", ff.vy, "custom-expression family: y-component in x,y,z,t");
  tbl.add(cmd, "--vz", ff.vz, "custom-expression family: z-component in x,y,z,t");
  tbl.add(cmd, "--domain-center", ff.domain_center, "field domain center 'x,y,z'");
  tbl.add(cmd, "--domain-radius", ff.domain_radius, "field domain radius (0 = unbounded)");
  tbl.add(cmd, "--bump-r1", ff.bump_r1, "bump cutoff: plateau radius");
  tbl.add(cmd, "--bump-r2", ff.bump_r2, "bump cutoff: support radius (0 = no bump)");
  tbl.add(cmd, "--fd-step", ff.fd_step, "finite-difference step for expression derivatives");
}

morphforge::VelocityField build_field(const FieldFlags& ff) {
  morphforge::VelocityField v;
  if (ff.family == "radial") {
    if (!(ff.R > 0))
      throw morphforge::ValidationError("radial family needs R > 0");
    v = morphforge::make_radial_ramp_field(ff.R, ff.domain_radius);
  } else if (ff.family == "constant") {
    v = morphforge::make_constant_field(parse_vec3(ff.constant, "--constant"),
                                        ff.domain_radius);
  } else if (ff.family == "linear") {
    if (ff.matrix.empty())
      throw morphforge::ValidationError("linear family needs --matrix with 9 entries");
    auto m = parse_doubles(ff.matrix, 9, "--matrix");
    Eigen::Matrix3d A;
    A << m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7], m[8];
    v = morphforge::make_linear_field(A, parse_vec3(ff.offset, "--offset"), ff.domain_radius);
  } else if (ff.family == "custom-expression" || ff.family == "expression") {
    v = morphforge::make_expression_field({ff.vx, ff.vy, ff.vz}, ff.domain_radius, ff.fd_step);
  } else {
    throw morphforge::ValidationError("unknown field family '" + ff.family +
                                      "' (radial|constant|linear|custom-expression)");
  }
  v.center = parse_vec3(ff.domain_center, "--domain-center");
  if (ff.bump_r2 > 0) v = morphforge::apply_bump(v, morphforge::BumpFunction(ff.bump_r1, ff.bump_r2));
  return v;
}

// ---------------------------------------------------------------------------
// CSV helpers (header row, fixed column order, 17-digit numbers; parsing the
// file back reproduces the doubles exactly)

std::string csv_row(const std::vector<double>& vals) {
  std::string row;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (i) row += ',';
    row += format_double(vals[i]);
  }
  row += '\n';
  return row;
}

// ---------------------------------------------------------------------------
// subcommand: solve-circle

struct SolveCircleParams {
  double R = 2.0;
  double A = std::numeric_limits<double>::quiet_NaN();
  double P = std::numeric_limits<double>::quiet_NaN();
  int k = 5;
  int t_samples = 65;
  int sobolev_nodes = 161;
  std::string out, csv, config;
};

void run_solve_circle(const SolveCircleParams& p, ParamTable& tbl) {
  const bool has_A = tbl.provided("A");
  const bool has_P = tbl.provided("P");
  if (has_A == has_P)
    throw morphforge::ValidationError(
        "solve-circle needs exactly one of --A (constraint level) or --P (norm budget)");

  morphforge::CircleProblem prob;
  prob.R = p.R;
  double norm_sq = 0, norm_err = 0;
  if (has_P) {
    // constraint level from a norm budget: A = P^2 / |rho . id|^2 where rho
    // is the standard cutoff that is 1 on the ball of radius R+1 and 0
    // outside radius R+2, and the norm is the order-k Sobolev norm on the
    // enclosing box
    if (!(p.P > 0)) throw morphforge::ValidationError("solve-circle needs P > 0");
    if (!(p.R > 1)) throw morphforge::ValidationError("circle problem needs R > 1");
    progress("solve-circle: measuring the reference field norm");
    morphforge::VelocityField ident =
        morphforge::make_linear_field(Eigen::Matrix3d::Identity(), morphforge::Vec3::Zero());
    morphforge::VelocityField rho_id =
        morphforge::apply_bump(ident, morphforge::BumpFunction(p.R + 1, p.R + 2));
    morphforge::BoxGrid box;
    box.halfwidth = p.R + 2;
    box.n = p.sobolev_nodes;
    box.dim = 2;
    box.time_nodes = 3;  // the reference field is time-independent
    auto sob = morphforge::sobolev_norm_sq(rho_id, p.k, box);
    norm_sq = sob.value;
    norm_err = sob.richardson_error;
    prob.A = p.P * p.P / norm_sq;
  } else {
    prob.A = p.A;
  }

  progress("solve-circle: solving the constrained radius problem");
  morphforge::CircleMorphSolution sol = morphforge::solve_circle_morph(prob, p.t_samples);

  Json root = result_header("solve-circle", tbl);
  root.add("mu", sol.mu);
  root.add("lambda", sol.lambda);
  root.add("A", sol.A);
  root.add("J", sol.J_value);
  root.add("G", sol.G_value);
  root.add("hamiltonian_residual", sol.hamiltonian_residual);
  Json diag = Json::object();
  diag.add("multiplier_roundtrip", sol.multiplier_roundtrip);
  diag.add("cross_check_max", sol.cross_check_max);
  diag.add("constraint_tol", sol.constraint_tol);
  diag.add("hamiltonian_tol", sol.hamiltonian_tol_scale * (1 + sol.mu));
  diag.add("cross_tol", sol.cross_tol);
  root.add("diagnostics", std::move(diag));
  if (has_P) {
    Json budget = Json::object();
    budget.add("P", p.P);
    budget.add("k", p.k);
    budget.add("sobolev_norm_sq", norm_sq);
    budget.add("richardson_error", norm_err);
    root.add("budget", std::move(budget));
  }
  Json curve = Json::array();
  for (std::size_t i = 0; i < sol.t.size(); ++i) {
    Json pt = Json::array();
    pt.push(sol.t[i]);
    pt.push(sol.psi[i]);
    curve.push(std::move(pt));
  }
  root.add("psi", std::move(curve));
  emit_result(root, p.out);

  if (!p.csv.empty()) {
    std::string text = "t,psi\n";
    for (std::size_t i = 0; i < sol.t.size(); ++i) text += csv_row({sol.t[i], sol.psi[i]});
    write_file(p.csv, text);
  }
}

// ---------------------------------------------------------------------------
// subcommand: sphere

struct SphereParams {
  double R = 2.0;
  std::string canonical, mobius;
  bool quadrature = false;
  int sigma_panels = 64;
  int phi_nodes = 256;
  std::string scan_csv, out, config;
};

void run_sphere(const SphereParams& p, ParamTable& tbl) {
  const bool has_canon = tbl.provided("canonical");
  const bool has_mobius = tbl.provided("mobius");
  if (has_canon == has_mobius)
    throw morphforge::ValidationError(
        "sphere needs exactly one of --canonical q,r or --mobius a,b,c,d");

  morphforge::CanonicalMobius cm;
  if (has_canon) {
    auto qr = parse_doubles(p.canonical, 2, "--canonical");
    if (qr[0] < 0) throw morphforge::ValidationError("canonical q must be >= 0");
    cm.q = qr[0];
    cm.r = qr[1];
    morphforge::canonical_map(cm);  // validates r > 0
  } else {
    auto parts = split(p.mobius, ',');
    if (parts.size() != 4)
      throw morphforge::ValidationError("--mobius needs 4 comma-separated complex entries");
    morphforge::MobiusMap m;
    m.a = parse_complex(parts[0]);
    m.b = parse_complex(parts[1]);
    m.c = parse_complex(parts[2]);
    m.d = parse_complex(parts[3]);
    m.validate();
    cm = morphforge::reduce(m);
  }

  progress("sphere: evaluating the deformation energy");
  const double closed = morphforge::psi_bar_closed(cm.q, cm.r, p.R);
  morphforge::HessianReport hess = morphforge::hessian_F(cm.q, cm.r, p.R);

  Json root = result_header("sphere", tbl);
  Json canon = Json::object();
  canon.add("q", cm.q);
  canon.add("r", cm.r);
  root.add("canonical", std::move(canon));
  root.add("psi_bar_closed", closed);
  if (p.quadrature) {
    progress("sphere: cross-checking by plane quadrature");
    root.add("psi_bar_quadrature",
             morphforge::psi_bar_quadrature(cm.q, cm.r, p.R, p.sigma_panels, p.phi_nodes));
  } else {
    root.add("psi_bar_quadrature", Json::null());
  }
  Json grad = Json::object();
  grad.add("q", hess.grad_q);
  grad.add("r", hess.grad_r);
  root.add("gradient", std::move(grad));
  Json hj = Json::object();
  hj.add("qq", hess.F_qq);
  hj.add("qr", hess.F_qr);
  hj.add("rr", hess.F_rr);
  hj.add("det", hess.det);
  root.add("hessian", std::move(hj));
  root.add("positive_definite", hess.positive_definite);
  root.add("min_value_reference", M_PI * (p.R * p.R - 1) * (p.R * p.R - 1));
  emit_result(root, p.out);

  if (!p.scan_csv.empty()) {
    // energy profile along the canonical family at q = 0; the minimum sits
    // at r = 1 (the identity class)
    std::string text = "r,psi_bar\n";
    for (int i = 0; i <= 150; ++i) {
      double r = 0.5 + 0.01 * i;
      text += csv_row({r, morphforge::psi_bar_closed(0.0, r, p.R)});
    }
    write_file(p.scan_csv, text);
  }
}

// ---------------------------------------------------------------------------
// subcommand: morph-energy (time-integrated distortion of the flow)

struct MorphEnergyParams {
  std::string manifold = "circle:R=1,n=256";
  double B1 = 1.0, B2 = 1.0;
  int t_intervals = 0;  // 0 = adaptive refinement
  int steps = 32;
  double rk_tol = 1e-9;
  double time_rel_tol = 1e-6;
  std::string csv, out, config;
};

void run_morph_energy(const MorphEnergyParams& p, const FieldFlags& ff, ParamTable& tbl) {
  morphforge::EmbeddedManifold M = build_manifold(parse_manifold_spec(p.manifold));
  morphforge::VelocityField v = build_field(ff);
  morphforge::EnergyWeights w{p.B1, p.B2};
  morphforge::MorphingOptions opt;
  opt.evolve_opts.steps = p.steps;
  opt.evolve_opts.rk_tol = p.rk_tol;
  opt.fixed_intervals = p.t_intervals;
  opt.time_rel_tol = p.time_rel_tol;

  progress("morph-energy: integrating the distortion along the flow");
  morphforge::MorphingReport rep = morphforge::morphing_energy(v, M, w, opt);

  Json root = result_header("morph-energy", tbl);
  root.add("Script_E", rep.value);
  Json terms = Json::object();
  terms.add("metric", rep.metric_term);
  terms.add("second_form", rep.second_form_term);
  root.add("terms", std::move(terms));
  Json wj = Json::object();
  wj.add("B1", w.B1);
  wj.add("B2", w.B2);
  root.add("weights", std::move(wj));
  Json quad = Json::object();
  quad.add("t_nodes", rep.time_intervals + 1);
  quad.add("space_nodes", M.grid.nodes());
  root.add("quadrature", std::move(quad));
  Json hist = Json::array();
  for (auto& [intervals, value] : rep.refinement_history) {
    Json h = Json::array();
    h.push(Json::integer(intervals));
    h.push(value);
    hist.push(std::move(h));
  }
  root.add("refinement_history", std::move(hist));
  emit_result(root, p.out);

  if (!p.csv.empty()) {
    // per-time trace of the two strain integrals at the settled resolution
    progress("morph-energy: writing the time trace");
    morphforge::ManifoldSeeds ms = morphforge::manifold_seeds(M, 2);
    morphforge::EvolveOptions eo = opt.evolve_opts;
    eo.steps = rep.time_intervals;
    morphforge::MorphTrajectory rec =
        morphforge::evolve(v, ms.points, ms.w0, ms.s0, ms.pairs, eo);
    auto gM = morphforge::first_fundamental_form(M);
    auto iiM = morphforge::second_fundamental_form(M);
    std::string text = "t,metric_term,second_form_term\n";
    for (int i = 0; i <= rep.time_intervals; ++i) {
      morphforge::MapDifferentialSamples S = morphforge::trajectory_slice(rec, M, i);
      morphforge::EmbeddedManifold Mt =
          morphforge::make_tabulated(M.grid, S.image, M.orientation_sign);
      auto gT = morphforge::first_fundamental_form(Mt);
      auto iiT = morphforge::second_fundamental_form(Mt);
      double m = morphforge::integrate(
          morphforge::fiber_norm_sq(
              morphforge::tensor_sub(morphforge::pullback(gT, S, Mt), gM), gM),
          M);
      double b = morphforge::integrate(
          morphforge::fiber_norm_sq(
              morphforge::tensor_sub(morphforge::pullback(iiT, S, Mt), iiM), gM),
          M);
      text += csv_row({rec.times[i], m, b});
    }
    write_file(p.csv, text);
  }
}

// ---------------------------------------------------------------------------
// subcommand: bend-energy (distortion of the time-one map alone)

struct BendEnergyParams {
  std::string manifold = "circle:R=1,n=256";
  std::string target;
  double B1 = 1.0, B2 = 1.0;
  int steps = 32;
  double rk_tol = 1e-9;
  std::string out, config;
};

void run_bend_energy(const BendEnergyParams& p, const FieldFlags& ff, ParamTable& tbl) {
  ManifoldSpec src = parse_manifold_spec(p.manifold);
  morphforge::EmbeddedManifold M = build_manifold(src);
  morphforge::EmbeddedManifold N = [&] {
    if (!p.target.empty()) return build_manifold(parse_manifold_spec(p.target));
    // default target: the source scaled by the radial factor
    if (ff.family != "radial")
      throw morphforge::ValidationError("bend-energy needs --target for non-radial families");
    ManifoldSpec tgt = src;
    tgt.kv["R"] = spec_value(src, "R", 1.0) * ff.R;
    if (src.kind == "ellipse")
      throw morphforge::ValidationError("bend-energy needs an explicit --target for ellipses");
    return build_manifold(tgt);
  }();

  morphforge::VelocityField v = build_field(ff);
  morphforge::EnergyWeights w{p.B1, p.B2};
  morphforge::EvolveOptions eo;
  eo.steps = p.steps;
  eo.rk_tol = p.rk_tol;

  progress("bend-energy: flowing to time one and measuring the distortion");
  morphforge::EnergyReport rep = morphforge::bending_energy_E(v, M, N, w, nullptr, eo);

  Json root = result_header("bend-energy", tbl);
  root.add("E", rep.value);
  Json terms = Json::object();
  terms.add("metric", rep.metric_term);
  terms.add("second_form", rep.second_form_term);
  root.add("terms", std::move(terms));
  Json wj = Json::object();
  wj.add("B1", w.B1);
  wj.add("B2", w.B2);
  root.add("weights", std::move(wj));
  Json quad = Json::object();
  quad.add("t_nodes", p.steps + 1);
  quad.add("space_nodes", M.grid.nodes());
  root.add("quadrature", std::move(quad));
  emit_result(root, p.out);
}

// ---------------------------------------------------------------------------
// subcommand: el-check (criticality residual and first variation)

struct ElCheckParams {
  std::string manifold = "circle:R=1,n=64";
  std::string target;
  std::string map = "identity";
  int refine = 2;
  double fv_eps = 1e-4;
  std::string out, config;
};

void run_el_check(const ElCheckParams& p, ParamTable& tbl) {
  if (p.refine < 0) throw morphforge::ValidationError("el-check needs --refine >= 0");
  if (!(p.fv_eps > 0)) throw morphforge::ValidationError("el-check needs --fv-eps > 0");
  ManifoldSpec src = parse_manifold_spec(p.manifold);
  ManifoldSpec tgt = p.target.empty() ? src : parse_manifold_spec(p.target);
  morphforge::ChartMap h = parse_chart_map(p.map);

  progress("el-check: assembling the residual over " + std::to_string(p.refine + 1) +
           " grid levels");
  std::vector<std::array<double, 3>> levels;  // nodes, max, l2
  morphforge::EmbeddedManifold M_fine = build_manifold(src);
  morphforge::EmbeddedManifold N_fine = build_manifold(tgt);
  for (int level = 0; level <= p.refine; ++level) {
    morphforge::EmbeddedManifold M = build_manifold(src, level);
    morphforge::EmbeddedManifold N = build_manifold(tgt, level);
    auto samples = morphforge::map_samples_from_chart_map(M, N, h, false);
    auto alpha = morphforge::first_fundamental_form(M);
    auto beta = morphforge::pullback(morphforge::first_fundamental_form(N), samples, N);
    morphforge::ELResidual res = morphforge::el_residual(alpha, beta);
    levels.push_back({static_cast<double>(M.grid.nodes()), res.max_norm, res.l2_norm});
    if (level == p.refine) {
      M_fine = std::move(M);
      N_fine = std::move(N);
    }
  }

  Json root = result_header("el-check", tbl);
  root.add("residual_max", levels.back()[1]);
  root.add("residual_l2", levels.back()[2]);
  Json lv = Json::array();
  for (auto& row : levels) {
    Json r = Json::array();
    r.push(Json::integer(static_cast<long long>(row[0])));
    r.push(row[1]);
    r.push(row[2]);
    lv.push(std::move(r));
  }
  root.add("levels", std::move(lv));
  Json orders = Json::object();
  Json omax = Json::array(), ol2 = Json::array();
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    omax.push(std::log2(levels[i][1] / levels[i + 1][1]));
    ol2.push(std::log2(levels[i][2] / levels[i + 1][2]));
  }
  orders.add("max", std::move(omax));
  orders.add("l2", std::move(ol2));
  root.add("refinement_orders", std::move(orders));

  if (M_fine.dim == 1) {
    progress("el-check: first variation against a finite-difference reference");
    morphforge::ChartVectorField Y = [](const morphforge::Param& u) {
      return std::array<double, 2>{std::sin(u[0]), 0.0};
    };
    morphforge::FirstVariationReport fv =
        morphforge::first_variation(h, Y, M_fine, N_fine, p.fv_eps);
    Json fj = Json::object();
    fj.add("analytic", fv.analytic);
    fj.add("finite_difference", fv.finite_difference);
    fj.add("rel_err", fv.rel_err);
    root.add("first_variation", std::move(fj));
  } else {
    root.add("first_variation", Json::null());
  }
  emit_result(root, p.out);
}

// ---------------------------------------------------------------------------
// subcommand: sobolev-norm

struct SobolevParams {
  int k = 5;
  double halfwidth = 0;  // 0 = use the field's domain radius
  std::string center = "0,0,0";
  int box_nodes = 65;
  int box_dim = 2;
  int time_nodes = 9;
  std::string out, config;
};

void run_sobolev(const SobolevParams& p, const FieldFlags& ff, ParamTable& tbl) {
  morphforge::VelocityField v = build_field(ff);
  morphforge::BoxGrid box;
  box.center = parse_vec3(p.center, "--center");
  box.halfwidth = p.halfwidth > 0 ? p.halfwidth : v.radius;
  if (!(box.halfwidth > 0))
    throw morphforge::ValidationError(
        "sobolev-norm needs --halfwidth (the field has no bounded domain)");
  box.n = p.box_nodes;
  box.dim = p.box_dim;
  box.time_nodes = p.time_nodes;
  if (box.dim != 2 && box.dim != 3)
    throw morphforge::ValidationError("sobolev-norm needs --box-dim 2 or 3");

  progress("sobolev-norm: integrating derivative energies over the box");
  morphforge::SobolevReport rep = morphforge::sobolev_norm_sq(v, p.k, box);

  Json root = result_header("sobolev-norm", tbl);
  root.add("k", p.k);
  Json bj = Json::object();
  Json cj = Json::array();
  cj.push(box.center[0]);
  cj.push(box.center[1]);
  cj.push(box.center[2]);
  bj.add("center", std::move(cj));
  bj.add("halfwidth", box.halfwidth);
  bj.add("nodes", box.n);
  bj.add("dim", box.dim);
  bj.add("time_nodes", box.time_nodes);
  root.add("box", std::move(bj));
  root.add("norm_sq", rep.value);
  root.add("norm", std::sqrt(rep.value));
  root.add("richardson_error", rep.richardson_error);
  emit_result(root, p.out);
}

// ---------------------------------------------------------------------------
// subcommand: admissibility

struct AdmissibilityParams {
  std::string manifold = "circle:R=1,n=128";
  std::string target = "circle:R=2,n=128";
  double P = std::numeric_limits<double>::quiet_NaN();
  int k = 5;
  double halfwidth = 0;
  int box_nodes = 65;
  int box_dim = 2;
  int time_nodes = 9;
  int steps = 32;
  std::string out, config;
};

void run_admissibility(const AdmissibilityParams& p, const FieldFlags& ff, ParamTable& tbl) {
  if (!tbl.provided("P") || !(p.P >= 0))
    throw morphforge::ValidationError("admissibility needs a norm budget --P >= 0");
  morphforge::EmbeddedManifold M = build_manifold(parse_manifold_spec(p.manifold));
  morphforge::EmbeddedManifold N = build_manifold(parse_manifold_spec(p.target));
  morphforge::VelocityField v = build_field(ff);
  morphforge::BoxGrid box;
  box.halfwidth = p.halfwidth > 0 ? p.halfwidth : v.radius;
  if (!(box.halfwidth > 0))
    throw morphforge::ValidationError(
        "admissibility needs --halfwidth (the field has no bounded domain)");
  box.n = p.box_nodes;
  box.dim = p.box_dim;
  box.time_nodes = p.time_nodes;
  morphforge::EvolveOptions eo;
  eo.steps = p.steps;

  progress("admissibility: flowing the source and measuring the norm");
  morphforge::AdmissibilityReport rep =
      morphforge::admissibility_check(v, M, N, p.P, p.k, box, eo);

  Json root = result_header("admissibility", tbl);
  root.add("match_residual", rep.match_residual);
  root.add("tol_match", rep.tol_match);
  root.add("maps_to_target", rep.maps_to_target);
  root.add("norm", rep.norm);
  root.add("norm_richardson", rep.norm_richardson);
  root.add("norm_within_bound", rep.norm_within_bound);
  root.add("admissible", rep.maps_to_target && rep.norm_within_bound);
  emit_result(root, p.out);
}

}  // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  CLI::App app{"morphforge: distortion energies of hypersurface morphs"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", morphforge::version_string);
  app.add_flag("--quiet", g_quiet, "suppress progress output on stderr");
  app.add_option("--seed", g_seed, "seed for randomized probe families (recorded in output)");

  // solve-circle ------------------------------------------------------------
  SolveCircleParams scp;
  ParamTable sct;
  CLI::App* sc = app.add_subcommand(
      "solve-circle", "optimal radial morph between concentric circles");
  sct.add(*sc, "--R", scp.R, "target/source radius ratio (R > 1)");
  sct.add(*sc, "--A", scp.A, "constraint level for the mean-square log-speed");
  sct.add(*sc, "--P", scp.P, "norm budget; sets A = P^2 / |rho . id|^2");
  sct.add(*sc, "--k", scp.k, "Sobolev order for the --P route");
  sct.add(*sc, "--t-samples", scp.t_samples, "number of output samples of psi");
  sct.add(*sc, "--sobolev-nodes", scp.sobolev_nodes, "box nodes per axis for the --P route");
  sct.add(*sc, "--out", scp.out, "write the JSON result to this path");
  sct.add(*sc, "--csv", scp.csv, "write a (t, psi) CSV to this path");
  sct.add(*sc, "--config", scp.config, "JSON config file (flags override)");
  sc->callback([&] {
    g_command = "solve-circle";
    sct.merge_config(scp.config);
    run_solve_circle(scp, sct);
  });

  // sphere --------------------------------------------------------------
  SphereParams spp;
  ParamTable spt;
  CLI::App* sp = app.add_subcommand(
      "sphere", "deformation energy of a Mobius morph of the round sphere");
  spt.add(*sp, "--R", spp.R, "dilation factor of the target sphere");
  spt.add(*sp, "--canonical", spp.canonical, "canonical class 'q,r'");
  spt.add(*sp, "--mobius", spp.mobius, "map entries 'a,b,c,d' (complex, e.g. 1.1+0.3i)");
  spt.add_flag(*sp, "--quadrature", spp.quadrature, "cross-check by plane quadrature");
  spt.add(*sp, "--sigma-panels", spp.sigma_panels, "quadrature panels in the radial angle");
  spt.add(*sp, "--phi-nodes", spp.phi_nodes, "quadrature nodes in the polar angle");
  spt.add(*sp, "--scan-csv", spp.scan_csv, "write an (r, psi_bar) scan at q = 0 to this path");
  spt.add(*sp, "--out", spp.out, "write the JSON result to this path");
  spt.add(*sp, "--config", spp.config, "JSON config file (flags override)");
  sp->callback([&] {
    g_command = "sphere";
    spt.merge_config(spp.config);
    run_sphere(spp, spt);
  });

  // morph-energy ----------------------------------------------------------
  MorphEnergyParams mep;
  FieldFlags mef;
  ParamTable met;
  CLI::App* me = app.add_subcommand(
      "morph-energy", "time-integrated distortion of the flow of a velocity field");
  met.add(*me, "--manifold", mep.manifold, "source manifold spec, e.g. circle:R=1,n=256");
  register_field_flags(*me, met, mef);
  met.add(*me, "--B1", mep.B1, "weight of the metric term");
  met.add(*me, "--B2", mep.B2, "weight of the curvature term");
  met.add(*me, "--t-intervals", mep.t_intervals, "fixed time intervals (0 = adaptive)");
  met.add(*me, "--steps", mep.steps, "recorded flow intervals");
  met.add(*me, "--rk-tol", mep.rk_tol, "integrator refinement tolerance");
  met.add(*me, "--time-rel-tol", mep.time_rel_tol, "time-quadrature refinement tolerance");
  met.add(*me, "--csv", mep.csv, "write a (t, metric_term, second_form_term) trace");
  met.add(*me, "--out", mep.out, "write the JSON result to this path");
  met.add(*me, "--config", mep.config, "JSON config file (flags override)");
  me->callback([&] {
    g_command = "morph-energy";
    met.merge_config(mep.config);
    run_morph_energy(mep, mef, met);
  });

  // bend-energy -------------------------------------------------------------
  BendEnergyParams bep;
  FieldFlags bef;
  ParamTable bet;
  CLI::App* be = app.add_subcommand(
      "bend-energy", "distortion of the time-one flow map against a target");
  bet.add(*be, "--manifold", bep.manifold, "source manifold spec");
  bet.add(*be, "--target", bep.target, "target manifold spec (default: source scaled by R)");
  register_field_flags(*be, bet, bef);
  bet.add(*be, "--B1", bep.B1, "weight of the metric term");
  bet.add(*be, "--B2", bep.B2, "weight of the curvature term");
  bet.add(*be, "--steps", bep.steps, "recorded flow intervals");
  bet.add(*be, "--rk-tol", bep.rk_tol, "integrator refinement tolerance");
  bet.add(*be, "--out", bep.out, "write the JSON result to this path");
  bet.add(*be, "--config", bep.config, "JSON config file (flags override)");
  be->callback([&] {
    g_command = "bend-energy";
    bet.merge_config(bep.config);
    run_bend_energy(bep, bef, bet);
  });

  // el-check ----------------------------------------------------------------
  ElCheckParams elp;
  ParamTable elt;
  CLI::App* el = app.add_subcommand(
      "el-check", "criticality residual of a chart map under grid refinement");
  elt.add(*el, "--manifold", elp.manifold, "source manifold spec");
  elt.add(*el, "--target", elp.target, "target manifold spec (default: the source)");
  elt.add(*el, "--map", elp.map, "chart map spec: identity | wavy:amp=A");
  elt.add(*el, "--refine", elp.refine, "number of grid doublings");
  elt.add(*el, "--fv-eps", elp.fv_eps, "flow step for the first-variation reference");
  elt.add(*el, "--out", elp.out, "write the JSON result to this path");
  elt.add(*el, "--config", elp.config, "JSON config file (flags override)");
  el->callback([&] {
    g_command = "el-check";
    elt.merge_config(elp.config);
    run_el_check(elp, elt);
  });

  // sobolev-norm --------------------------------------------------------------
  SobolevParams sop;
  FieldFlags sof;
  ParamTable sot;
  CLI::App* so = app.add_subcommand(
      "sobolev-norm", "space-time Sobolev norm of a velocity field over a box");
  register_field_flags(*so, sot, sof);
  sot.add(*so, "--k", sop.k, "derivative order");
  sot.add(*so, "--halfwidth", sop.halfwidth, "box halfwidth (default: field domain radius)");
  sot.add(*so, "--center", sop.center, "box center 'x,y,z'");
  sot.add(*so, "--box-nodes", sop.box_nodes, "nodes per axis (odd, >= 5)");
  sot.add(*so, "--box-dim", sop.box_dim, "2 for planar fields, 3 otherwise");
  sot.add(*so, "--time-nodes", sop.time_nodes, "time quadrature nodes");
  sot.add(*so, "--out", sop.out, "write the JSON result to this path");
  sot.add(*so, "--config", sop.config, "JSON config file (flags override)");
  so->callback([&] {
    g_command = "sobolev-norm";
    sot.merge_config(sop.config);
    run_sobolev(sop, sof, sot);
  });

  // admissibility ------------------------------------------------------------
  AdmissibilityParams adp;
  FieldFlags adf;
  ParamTable adt;
  CLI::App* ad = app.add_subcommand(
      "admissibility", "does the field carry the source onto the target within budget");
  adt.add(*ad, "--manifold", adp.manifold, "source manifold spec");
  adt.add(*ad, "--target", adp.target, "target manifold spec");
  register_field_flags(*ad, adt, adf);
  adt.add(*ad, "--P", adp.P, "norm budget");
  adt.add(*ad, "--k", adp.k, "Sobolev order");
  adt.add(*ad, "--halfwidth", adp.halfwidth, "box halfwidth (default: field domain radius)");
  adt.add(*ad, "--box-nodes", adp.box_nodes, "nodes per axis (odd, >= 5)");
  adt.add(*ad, "--box-dim", adp.box_dim, "2 for planar fields, 3 otherwise");
  adt.add(*ad, "--time-nodes", adp.time_nodes, "time quadrature nodes");
  adt.add(*ad, "--steps", adp.steps, "recorded flow intervals");
  adt.add(*ad, "--out", adp.out, "write the JSON result to this path");
  adt.add(*ad, "--config", adp.config, "JSON config file (flags override)");
  ad->callback([&] {
    g_command = "admissibility";
    adt.merge_config(adp.config);
    run_admissibility(adp, adf, adt);
  });

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
      Json err = Json::object();
      if (!g_command.empty()) err.add("command", g_command);
      err.add("version", morphforge::version_string);
      err.add("error", "ValidationError");
      err.add("message", e.what());
      std::cout << err.dump() << "\n";
      return 2;
    }
  } catch (const morphforge::Error& e) {
    Json err = Json::object();
    if (!g_command.empty()) err.add("command", g_command);
    err.add("version", morphforge::version_string);
    err.add("error", e.name);
    err.add("message", e.what());
    std::cout << err.dump() << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    Json err = Json::object();
    if (!g_command.empty()) err.add("command", g_command);
    err.add("version", morphforge::version_string);
    err.add("error", "InternalError");
    err.add("message", e.what());
    std::cout << err.dump() << "\n";
    return 3;
  }
  return 0;
}
