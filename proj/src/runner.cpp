#include "mdelab/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdelab/charflow.hpp"
#include "mdelab/covariance.hpp"
#include "mdelab/cumulants.hpp"
#include "mdelab/cuspstats.hpp"
#include "mdelab/flows.hpp"
#include "mdelab/io.hpp"
#include "mdelab/locallaw.hpp"
#include "mdelab/mde.hpp"
#include "mdelab/pearcey.hpp"
#include "mdelab/rigidity.hpp"
#include "mdelab/sampler.hpp"
#include "mdelab/shape.hpp"
#include "mdelab/spectral.hpp"

namespace mdelab {
namespace {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// strict-schema JSON helpers. Configs are plain objects; unknown keys are
// rejected so a typo cannot silently fall back to a default. Optional keys
// write their default back into the config object, which therefore becomes
// the fully resolved config echoed in the report.

json parse_strict(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw SchemaError("config: not valid JSON");
  if (!j.is_object()) throw SchemaError("config: top level must be an object");
  return j;
}

void check_keys(const json& j, const std::string& where,
                const std::vector<std::string>& required,
                const std::vector<std::string>& optional) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  for (const auto& k : required)
    if (!j.contains(k)) throw SchemaError(where + ": missing key '" + k + "'");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (std::find(required.begin(), required.end(), k) != required.end())
      continue;
    if (std::find(optional.begin(), optional.end(), k) != optional.end())
      continue;
    throw SchemaError(where + ": unknown key '" + k + "'");
  }
}

double req_num(const json& j, const std::string& where, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number()) throw SchemaError(where + ": '" + key + "' must be a number");
  return v.get<double>();
}

double opt_num(json& j, const std::string& where, const char* key, double dflt) {
  if (!j.contains(key)) {
    j[key] = dflt;
    return dflt;
  }
  return req_num(j, where, key);
}

int req_int(const json& j, const std::string& where, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw SchemaError(where + ": '" + key + "' must be an integer");
  return v.get<int>();
}

int opt_int(json& j, const std::string& where, const char* key, int dflt) {
  if (!j.contains(key)) {
    j[key] = dflt;
    return dflt;
  }
  return req_int(j, where, key);
}

bool opt_bool(json& j, const std::string& where, const char* key, bool dflt) {
  if (!j.contains(key)) {
    j[key] = dflt;
    return dflt;
  }
  const json& v = j.at(key);
  if (!v.is_boolean()) throw SchemaError(where + ": '" + key + "' must be a bool");
  return v.get<bool>();
}

std::string opt_str(json& j, const std::string& where, const char* key,
                    const std::string& dflt) {
  if (!j.contains(key)) {
    j[key] = dflt;
    return dflt;
  }
  const json& v = j.at(key);
  if (!v.is_string()) throw SchemaError(where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> opt_num_list(json& j, const std::string& where,
                                 const char* key,
                                 const std::vector<double>& dflt) {
  if (!j.contains(key)) {
    j[key] = dflt;
    return dflt;
  }
  const json& v = j.at(key);
  if (!v.is_array()) throw SchemaError(where + ": '" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number())
      throw SchemaError(where + ": '" + key + "' entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> req_int_list(const json& j, const std::string& where,
                              const char* key) {
  const json& v = j.at(key);
  if (!v.is_array()) throw SchemaError(where + ": '" + key + "' must be an array");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() && !e.is_number_unsigned())
      throw SchemaError(where + ": '" + key + "' entries must be integers");
    out.push_back(e.get<int>());
  }
  return out;
}

// seed is mandatory in every config; --seed on the command line overrides it
// and the override is reflected in the resolved config echo
uint64_t resolve_seed(json& cfg, const RunContext& ctx) {
  if (ctx.seed_overridden) {
    cfg["seed"] = ctx.seed;
    return ctx.seed;
  }
  if (!cfg.contains("seed")) throw SchemaError("config: missing key 'seed'");
  const json& v = cfg.at("seed");
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<int64_t>() >= 0))
    throw SchemaError("config: 'seed' must be a non-negative integer");
  return v.get<uint64_t>();
}

// ---------------------------------------------------------------------------
// model sub-config

NoiseLaw noise_from(const std::string& s, const std::string& where) {
  if (s == "gaussian") return NoiseLaw::Gaussian;
  if (s == "rademacher") return NoiseLaw::Rademacher;
  if (s == "shifted_mixture") return NoiseLaw::ShiftedMixture;
  throw SchemaError(where + ": unknown noise law '" + s + "'");
}

SymmetryClass class_from(const std::string& s, const std::string& where) {
  if (s == "complex") return SymmetryClass::ComplexHermitian;
  if (s == "real") return SymmetryClass::RealSymmetric;
  throw SchemaError(where + ": unknown symmetry class '" + s + "'");
}

// validates the model object in place (filling defaults) and builds it
Model resolve_model(json& mj, const std::string& where) {
  if (!mj.is_object()) throw SchemaError(where + ": expected an object");
  if (!mj.contains("type")) throw SchemaError(where + ": missing key 'type'");
  const std::string type = mj.at("type").get<std::string>();
  SymmetryClass cls =
      class_from(opt_str(mj, where, "class", "complex"), where);
  if (type == "wigner") {
    check_keys(mj, where, {"type", "n"}, {"class"});
    int n = req_int(mj, where, "n");
    return wigner_model(cls, n);
  }
  if (type == "two_level") {
    check_keys(mj, where, {"type", "n", "d"}, {"class"});
    return two_level_model(cls, req_int(mj, where, "n"),
                           req_num(mj, where, "d"));
  }
  if (type == "variance_profile") {
    check_keys(mj, where, {"type", "n"}, {"class", "amp"});
    return variance_profile_model(cls, req_int(mj, where, "n"),
                                  opt_num(mj, where, "amp", 0.5));
  }
  if (type == "filter") {
    check_keys(mj, where, {"type", "n"}, {"class", "noise"});
    return filter_model(cls, req_int(mj, where, "n"),
                        noise_from(opt_str(mj, where, "noise", "gaussian"), where));
  }
  if (type == "metric_decay") {
    check_keys(mj, where, {"type", "n"}, {"class", "s_exp"});
    return metric_decay_model(cls, req_int(mj, where, "n"),
                              opt_num(mj, where, "s_exp", 3.0));
  }
  if (type == "dense") {
    // dense gaussian with a reproducible non-trivial four-tensor covariance:
    // (1 - mix) * gauss reference + mix * seeded random PSD part. The
    // construction seed is fixed so the ensemble is a model constant, not a
    // function of the sampling seed.
    check_keys(mj, where, {"type", "n"}, {"class", "mix"});
    int n = req_int(mj, where, "n");
    double mix = opt_num(mj, where, "mix", 0.4);
    if (mix < 0.0 || mix >= 1.0)
      throw SchemaError(where + ": 'mix' must lie in [0, 1)");
    auto gauss = CovarianceTensor::gauss_reference(n, cls);
    const int dim = gauss.dim();
    std::mt19937_64 rng = make_rng(0xd1ce, 7);
    std::normal_distribution<double> nd;
    RMatrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) g(i, j) = nd(rng);
    RMatrix p = g * g.transpose();
    p *= gauss.cov().trace() / p.trace();  // match overall scale
    RMatrix cov = (1.0 - mix) * gauss.cov() + mix * p;
    return dense_tensor_model(cls, n, std::make_shared<const RMatrix>(cov));
  }
  throw SchemaError(where + ": unknown model type '" + type + "'");
}

// energy range wide enough to hold the whole spectrum of m
void default_scan_range(json& cfg, const std::string& where, const Model& m,
                        double* e_min, double* e_max) {
  double bound = m.a.op_norm_bound() + 2.0 * std::sqrt(kappa2_norm(m)) + 0.5;
  *e_min = opt_num(cfg, where, "e_min", -bound);
  *e_max = opt_num(cfg, where, "e_max", bound);
  if (!(*e_min < *e_max)) throw SchemaError(where + ": empty energy range");
}

// ---------------------------------------------------------------------------
// report plumbing

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
  return buf;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read back artifact " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class Report {
 public:
  Report(std::string command, const json& resolved, const RunContext& ctx)
      : ctx_(ctx), command_(std::move(command)) {
    rep_["command"] = command_;
    rep_["config"] = resolved;
    rep_["config_hash"] = hex64(fnv1a64(resolved.dump()));
    rep_["mode"] = ctx.check ? "check" : "measure";
    rep_["artifacts"] = json::object();
    rep_["metrics"] = json::object();
    rep_["checks"] = json::array();
    std::filesystem::create_directories(ctx.out);
  }

  void metric(const std::string& name, const json& v) {
    rep_["metrics"][name] = v;
  }

  void check(const std::string& name, bool pass, double value, double gate) {
    rep_["checks"].push_back(
        {{"name", name}, {"pass", pass}, {"value", value}, {"gate", gate}});
    if (!pass) ++failed_;
    std::printf("  [%s] %-32s value=%.6g gate=%.6g\n", pass ? "PASS" : "FAIL",
                name.c_str(), value, gate);
  }

  void csv(const std::string& name, const CsvWriter& w) {
    auto p = ctx_.out / name;
    w.write(p);
    artifact(p);
  }

  void json_artifact(const std::string& name, const json& j) {
    auto p = ctx_.out / name;
    std::string text = j.dump(2) + "\n";
    std::ofstream f(p, std::ios::binary);
    f << text;
    f.close();
    artifact(p);
  }

  void plot(const std::string& name, const std::string& csv_name,
            const std::string& xcol, const std::string& ycol,
            const std::string& title, bool logscale = false) {
    write_plot_script(ctx_.out, name, csv_name, xcol, ycol, title, logscale);
    artifact(ctx_.out / (name + ".gp"));
  }

  // writes report.json; returns the count of failed checks in check mode
  // (measure mode always reports success to the caller)
  int finish() {
    rep_["failed_checks"] = failed_;
    auto p = ctx_.out / "report.json";
    std::ofstream f(p, std::ios::binary);
    f << rep_.dump(2) << "\n";
    f.close();
    std::printf("[%s] %s: %d check(s) failed -> %s\n", command_.c_str(),
                ctx_.check ? "check" : "measure", failed_, p.string().c_str());
    return ctx_.check ? failed_ : 0;
  }

 private:
  void artifact(const std::filesystem::path& p) {
    rep_["artifacts"][p.filename().string()] = hex64(fnv1a64(read_file(p)));
  }

  json rep_;
  RunContext ctx_;
  std::string command_;
  int failed_ = 0;
};

}  // namespace

Model parse_model_json(const std::string& json_text) {
  json mj = parse_strict(json_text);
  return resolve_model(mj, "model");
}

// ---------------------------------------------------------------------------
// density: self-consistent density / stability scan over an energy grid

int cmd_density(const std::string& config_json, const RunContext& ctx) {
  json cfg = parse_strict(config_json);
  check_keys(cfg, "density", {"seed", "model"},
             {"e_min", "e_max", "points", "eta", "mass_tol"});
  resolve_seed(cfg, ctx);
  Model m = resolve_model(cfg.at("model"), "density.model");
  double e_min, e_max;
  default_scan_range(cfg, "density", m, &e_min, &e_max);
  int points = opt_int(cfg, "density", "points", 241);
  double eta = opt_num(cfg, "density", "eta", 1e-6);
  double mass_tol = opt_num(cfg, "density", "mass_tol", 1e-4);
  if (points < 2) throw SchemaError("density: 'points' must be at least 2");
  if (eta <= 0.0) throw SchemaError("density: 'eta' must be positive");

  Report rep("density", cfg, ctx);
  MdeSolver solver(m);

  std::vector<double> es(points), rho(points), immin(points), sig(points),
      bet(points), res(points);
  MdeSolution warm;
  for (int i = 0; i < points; ++i) {
    double e = e_min + (e_max - e_min) * i / (points - 1);
    cd z(e, eta);
    MdeSolution sol = warm.empty() ? solver.solve(z) : solver.solve(z, warm);
    es[i] = e;
    rho[i] = sol.rho();
    immin[i] = sol.im_min();
    sig[i] = solver.sigma(sol);
    bet[i] = solver.beta(sol);
    res[i] = sol.residual;
    warm = sol;
  }

  CsvWriter w;
  w.col("energy", es).col("rho", rho).col("im_min", immin);
  w.col("sigma", sig).col("beta", bet).col("residual", res);
  rep.csv("density.csv", w);
  rep.plot("density", "density.csv", "energy", "rho", "self-consistent density");

  SupportScan scan = scan_support(
      solver, ScanOptions{.e_min = e_min, .e_max = e_max, .eta = eta});
  json bands = json::array();
  for (const auto& b : scan.bands)
    bands.push_back({{"lo", b.lo}, {"hi", b.hi}, {"mass", b.mass}});
  rep.json_artifact("support.json",
                    {{"bands", bands},
                     {"gaps", scan.gaps},
                     {"total_mass", scan.total_mass},
                     {"eta", scan.eta}});

  double max_res = *std::max_element(res.begin(), res.end());
  double min_im = *std::min_element(immin.begin(), immin.end());
  rep.metric("max_residual", max_res);
  rep.metric("min_im", min_im);
  rep.metric("total_mass", scan.total_mass);
  rep.metric("bands", (int)scan.bands.size());
  rep.check("solver_converged", max_res <= 1e-10, max_res, 1e-10);
  rep.check("imaginary_part_positive", min_im > 0.0, min_im, 0.0);
  rep.check("mass_normalized", std::abs(scan.total_mass - 1.0) <= mass_tol,
            std::abs(scan.total_mass - 1.0), mass_tol);
  return rep.finish();
}

// ---------------------------------------------------------------------------
// flow: characteristic trajectories, conservation residuals, domain nesting

int cmd_flow(const std::string& config_json, const RunContext& ctx) {
  json cfg = parse_strict(config_json);
  check_keys(cfg, "flow", {"seed", "model"},
             {"horizon", "chars", "t_start", "eta0", "res_tol", "audit",
              "audit_points", "e_min", "e_max"});
  resolve_seed(cfg, ctx);
  Model m = resolve_model(cfg.at("model"), "flow.model");
  double horizon = opt_num(cfg, "flow", "horizon", 0.3);
  int chars = opt_int(cfg, "flow", "chars", 20);
  double t_start = opt_num(cfg, "flow", "t_start", 0.0);
  double eta0 = opt_num(cfg, "flow", "eta0", 0.5);
  double res_tol = opt_num(cfg, "flow", "res_tol", 1e-5);
  bool audit = opt_bool(cfg, "flow", "audit", true);
  int audit_points = opt_int(cfg, "flow", "audit_points", 12);
  double e_min, e_max;
  default_scan_range(cfg, "flow", m, &e_min, &e_max);
  if (chars < 1) throw SchemaError("flow: 'chars' must be positive");
  if (horizon <= 0.0) throw SchemaError("flow: 'horizon' must be positive");
  if (t_start < 0.0 || t_start > horizon)
    throw SchemaError("flow: 't_start' must lie in [0, horizon]");
  if (eta0 <= 0.0) throw SchemaError("flow: 'eta0' must be positive");

  FlowFamily fam{m, horizon};
  if (horizon > fam.max_horizon())
    throw SchemaError("flow: horizon exceeds the admissible backward horizon");

  Report rep("flow", cfg, ctx);

  std::vector<int> cid;
  std::vector<double> ct, ce, ceta, crho;
  std::vector<int> rid, rexit;
  std::vector<double> rlevel, rmass;
  double worst_level = 0.0, worst_mass = 0.0;
  for (int j = 0; j < chars; ++j) {
    double e = chars == 1 ? 0.5 * (e_min + e_max)
                          : e_min + (e_max - e_min) * j / (chars - 1);
    FlowTrajectory tr =
        integrate_characteristic(fam, cd(e, eta0), t_start, horizon);
    for (const auto& p : tr.points) {
      cid.push_back(j);
      ct.push_back(p.t);
      ce.push_back(p.z.real());
      ceta.push_back(p.z.imag());
      crho.push_back(p.rho);
    }
    ConservationReport cr = conservation_residuals(fam, tr);
    rid.push_back(j);
    rlevel.push_back(cr.res_level);
    rmass.push_back(cr.res_mass);
    rexit.push_back(tr.exited ? 1 : 0);
    worst_level = std::max(worst_level, cr.res_level);
    worst_mass = std::max(worst_mass, cr.res_mass);
  }

  CsvWriter w;
  w.col("char", cid).col("t", ct).col("energy", ce).col("eta", ceta);
  w.col("rho", crho);
  rep.csv("trajectories.csv", w);
  CsvWriter wc;
  wc.col("char", rid).col("res_level", rlevel).col("res_mass", rmass);
  wc.col("exited", rexit);
  rep.csv("conservation.csv", wc);
  rep.plot("trajectories", "trajectories.csv", "energy", "eta",
           "characteristic trajectories");

  rep.metric("worst_res_level", worst_level);
  rep.metric("worst_res_mass", worst_mass);
  rep.check("conservation_level", worst_level <= res_tol, worst_level, res_tol);
  rep.check("conservation_mass", worst_mass <= res_tol, worst_mass, res_tol);

  if (audit) {
    // domain nesting along the characteristic flow: a point inside the
    // above-scale domain at a later time, transported backward, must land
    // inside the earlier domain. Memberships are scored with a small margin
    // slack so grid-edge points do not flip on rounding.
    MdeSolver solver(m);
    SupportScan scan = scan_support(
        solver, ScanOptions{.e_min = e_min, .e_max = e_max});
    std::vector<double> tg = flow_time_grid(m.n, horizon);
    if (tg.size() > 5) {
      std::vector<double> sub;
      for (size_t i = 0; i < tg.size(); i += tg.size() / 5) sub.push_back(tg[i]);
      sub.push_back(tg.back());
      tg.swap(sub);
    }
    int violations = 0, audited = 0;
    for (int j = 0; j < audit_points; ++j) {
      double e = e_min + (e_max - e_min) * (j + 0.5) / audit_points;
      double h = 0.02 * std::pow(10.0, 1.2 * j / audit_points);
      cd z(e, h);
      for (size_t k = 1; k < tg.size(); ++k) {
        DomainCheck late = domain_above(fam, z, tg[k]);
        if (!late.member || late.margin < 0.02) continue;
        FlowTrajectory back = integrate_characteristic(fam, z, tg[k], tg[k - 1]);
        DomainCheck early = domain_above(fam, back.back().z, tg[k - 1]);
        ++audited;
        if (!early.member && early.margin < -0.02) ++violations;
      }
    }
    rep.metric("audited_pairs", audited);
    rep.metric("nesting_violations", violations);
    rep.check("domain_nesting", violations == 0, violations, 0.0);
  }
  return rep.finish();
}

// ---------------------------------------------------------------------------
// locallaw: resolvent error scaling study over sizes and spectral heights

int cmd_locallaw(const std::string& config_json, const RunContext& ctx) {
  json cfg = parse_strict(config_json);
  check_keys(cfg, "locallaw", {"seed", "model", "sizes", "trials"},
             {"energy", "eta_min_pow", "eta_max", "etas", "probes", "quant",
              "avg_tol", "iso_tol", "growth_tol"});
  uint64_t seed = resolve_seed(cfg, ctx);
  json& mj = cfg.at("model");
  resolve_model(mj, "locallaw.model");  // validate + fill defaults
  std::vector<int> sizes = req_int_list(cfg, "locallaw", "sizes");
  if (sizes.empty()) throw SchemaError("locallaw: 'sizes' must be non-empty");
  for (int s : sizes)
    if (s < 8) throw SchemaError("locallaw: sizes must be at least 8");

  LocalLawOptions opt;
  opt.trials = req_int(cfg, "locallaw", "trials");
  if (opt.trials < 1) throw SchemaError("locallaw: 'trials' must be positive");
  opt.energy = opt_num(cfg, "locallaw", "energy", 0.0);
  opt.eta_min_pow = opt_num(cfg, "locallaw", "eta_min_pow", 0.9);
  opt.eta_max = opt_num(cfg, "locallaw", "eta_max", 0.1);
  opt.etas = opt_int(cfg, "locallaw", "etas", 12);
  opt.probes = opt_int(cfg, "locallaw", "probes", 4);
  opt.quant = opt_num(cfg, "locallaw", "quant", 0.9);
  opt.seed = seed;
  double avg_tol = opt_num(cfg, "locallaw", "avg_tol", 0.15);
  double iso_tol = opt_num(cfg, "locallaw", "iso_tol", 0.1);
  double growth_tol = opt_num(cfg, "locallaw", "growth_tol", 0.1);

  Report rep("locallaw", cfg, ctx);

  json mres = mj;  // resolved copy reused per size
  auto family = [&mres](int n) {
    json c = mres;
    c["n"] = n;
    return resolve_model(c, "locallaw.model");
  };
  ScalingStudy st = scaling_study(family, sizes, opt);

  std::vector<int> cn;
  std::vector<double> ceta, cavg, ciso, cavgn, cison;
  std::vector<int> sn;
  std::vector<double> savg, savgr2, siso, sisor2;
  for (const auto& run : st.runs) {
    for (const auto& p : run.points) {
      cn.push_back(run.n);
      ceta.push_back(p.eta);
      cavg.push_back(p.avg);
      ciso.push_back(p.iso);
      cavgn.push_back(p.avg_norm);
      cison.push_back(p.iso_norm);
    }
    sn.push_back(run.n);
    savg.push_back(run.avg_fit.slope);
    savgr2.push_back(run.avg_fit.r2);
    siso.push_back(run.iso_fit.slope);
    sisor2.push_back(run.iso_fit.r2);
  }
  CsvWriter w;
  w.col("n", cn).col("eta", ceta).col("avg", cavg).col("iso", ciso);
  w.col("avg_norm", cavgn).col("iso_norm", cison);
  rep.csv("locallaw.csv", w);
  CsvWriter ws;
  ws.col("n", sn).col("avg_slope", savg).col("avg_r2", savgr2);
  ws.col("iso_slope", siso).col("iso_r2", sisor2);
  rep.csv("slopes.csv", ws);
  rep.plot("locallaw", "locallaw.csv", "eta", "avg",
           "averaged local-law error vs eta", /*logscale=*/true);

  for (const auto& run : st.runs) {
    rep.check("avg_slope_n" + std::to_string(run.n),
              std::abs(run.avg_fit.slope + 1.0) <= avg_tol, run.avg_fit.slope,
              avg_tol);
    rep.check("iso_slope_n" + std::to_string(run.n),
              std::abs(run.iso_fit.slope + 0.5) <= iso_tol, run.iso_fit.slope,
              iso_tol);
  }
  rep.metric("avg_size_slope", st.avg_size_fit.slope);
  rep.metric("iso_size_slope", st.iso_size_fit.slope);
  if (sizes.size() > 1) {
    rep.check("avg_normalized_growth", st.avg_size_fit.slope <= growth_tol,
              st.avg_size_fit.slope, growth_tol);
    rep.check("iso_normalized_growth", st.iso_size_fit.slope <= growth_tol,
              st.iso_size_fit.slope, growth_tol);
  }
  return rep.finish();
}

// ---------------------------------------------------------------------------
// rigidity: eigenvalue location vs classical location, plus band masses

int cmd_rigidity(const std::string& config_json, const RunContext& ctx) {
  json cfg = parse_strict(config_json);
  check_keys(cfg, "rigidity", {"seed", "model", "trials"},
             {"k_lo_frac", "k_hi_frac", "k_stride", "p99_pow", "band_mass",
              "band_pass", "e_min", "e_max"});
  uint64_t seed = resolve_seed(cfg, ctx);
  Model m = resolve_model(cfg.at("model"), "rigidity.model");
  int trials = req_int(cfg, "rigidity", "trials");
  if (trials < 1) throw SchemaError("rigidity: 'trials' must be positive");
  double klo = opt_num(cfg, "rigidity", "k_lo_frac", 0.1);
  double khi = opt_num(cfg, "rigidity", "k_hi_frac", 0.9);
  int stride = opt_int(cfg, "rigidity", "k_stride",
                       std::max(1, m.n / 128));
  double p99_pow = opt_num(cfg, "rigidity", "p99_pow", 0.15);
  bool band_mass = opt_bool(cfg, "rigidity", "band_mass", true);
  double band_pass = opt_num(cfg, "rigidity", "band_pass", 0.99);
  if (!(0.0 <= klo && klo < khi && khi <= 1.0))
    throw SchemaError("rigidity: need 0 <= k_lo_frac < k_hi_frac <= 1");
  double e_min, e_max;
  default_scan_range(cfg, "rigidity", m, &e_min, &e_max);

  Report rep("rigidity", cfg, ctx);
  MdeSolver solver(m);
  SupportScan scan =
      scan_support(solver, ScanOptions{.e_min = e_min, .e_max = e_max});

  std::vector<int> ks;
  for (int k = std::max(1, (int)std::ceil(klo * m.n));
       k <= std::min(m.n, (int)std::floor(khi * m.n)); k += stride)
    ks.push_back(k);
  if (ks.empty()) throw SchemaError("rigidity: empty index window");

  RigidityReport rr = rigidity_check(m, solver, scan, trials, ks, seed);
  CsvWriter w;
  w.col("k", rr.ks).col("gamma", rr.gamma);
  rep.csv("rigidity.csv", w);
  rep.plot("rigidity", "rigidity.csv", "k", "gamma", "classical locations");

  double gate = std::pow((double)m.n, p99_pow);
  rep.metric("worst_units", rr.worst_units);
  rep.metric("mean_units", rr.mean_units);
  rep.metric("p99_units", rr.p99_units);
  rep.check("rigidity_p99", rr.p99_units <= gate, rr.p99_units, gate);

  if (band_mass && scan.bands.size() >= 2) {
    BandMassReport br = band_mass_check(m, scan, trials, seed);
    rep.metric("band_mass_max_dev", br.max_dev);
    rep.metric("band_mass_exact_trials", br.exact_trials);
    double need = std::ceil(band_pass * trials);
    rep.check("band_mass_exact", br.exact_trials >= need, br.exact_trials,
              need);
  }
  return rep.finish();
}

// ---------------------------------------------------------------------------
// exclusion: no eigenvalue intrudes deep into a spectral gap

int cmd_exclusion(const std::string& config_json, const RunContext& ctx) {
  json cfg = parse_strict(config_json);
  check_keys(cfg, "exclusion", {"seed", "model", "trials"},
             {"margin_pow", "pass_frac", "gap_index", "e_min", "e_max"});
  uint64_t seed = resolve_seed(cfg, ctx);
  Model m = resolve_model(cfg.at("model"), "exclusion.model");
  int trials = req_int(cfg, "exclusion", "trials");
  if (trials < 1) throw SchemaError("exclusion: 'trials' must be positive");
  double margin_pow = opt_num(cfg, "exclusion", "margin_pow", 0.1);
  double pass_frac = opt_num(cfg, "exclusion", "pass_frac", 0.99);
  int gap_index = opt_int(cfg, "exclusion", "gap_index", -1);
  double e_min, e_max;
  default_scan_range(cfg, "exclusion", m, &e_min, &e_max);

  Report rep("exclusion", cfg, ctx);
  MdeSolver solver(m);
  SupportScan scan =
      scan_support(solver, ScanOptions{.e_min = e_min, .e_max = e_max});
  if (scan.bands.size() < 2)
    throw SchemaError("exclusion: model has no interior spectral gap");
  if (gap_index < 0) {
    gap_index = 0;
    for (size_t i = 1; i < scan.gaps.size(); ++i)
      if (scan.gaps[i] > scan.gaps[gap_index]) gap_index = (int)i;
    cfg["gap_index"] = gap_index;
  }
  if (gap_index >= (int)scan.gaps.size())
    throw SchemaError("exclusion: gap_index out of range");
  double gap_lo = scan.bands[gap_index].hi;
  double gap_hi = scan.bands[gap_index + 1].lo;

  double margin_units = std::pow((double)m.n, margin_pow);
  GapExclusionReport gr = gap_exclusion_check(m, gap_lo, gap_hi, margin_units,
                                              solver, scan, trials, seed);
  CsvWriter w;
  w.col("gap_lo", std::vector<double>{gr.gap_lo});
  w.col("gap_hi", std::vector<double>{gr.gap_hi});
  w.col("margin", std::vector<double>{gr.margin});
  w.col("closest_approach", std::vector<double>{gr.closest_approach});
  w.col("intrusions", std::vector<int>{gr.intrusions});
  w.col("clean_trials", std::vector<int>{gr.clean_trials});
  w.col("trials", std::vector<int>{gr.trials});
  rep.csv("exclusion.csv", w);

  rep.metric("gap_lo", gr.gap_lo);
  rep.metric("gap_hi", gr.gap_hi);
  rep.metric("margin", gr.margin);
  rep.metric("closest_approach", gr.closest_approach);
  rep.metric("intrusions", gr.intrusions);
  double need = std::ceil(pass_frac * trials);
  rep.check("gap_clean", gr.clean_trials >= need, gr.clean_trials, need);
  return rep.finish();
}

// ---------------------------------------------------------------------------
// deloc: eigenvector overlap bounds against fixed and random probes

int cmd_deloc(const std::string& config_json, const RunContext& ctx) {
  json cfg = parse_strict(config_json);
  check_keys(cfg, "deloc", {"seed", "model", "trials"},
             {"gate_pow", "pass_frac", "probes", "log_power", "win_lo",
              "win_hi"});
  uint64_t seed = resolve_seed(cfg, ctx);
  Model m = resolve_model(cfg.at("model"), "deloc.model");
  int trials = req_int(cfg, "deloc", "trials");
  if (trials < 1) throw SchemaError("deloc: 'trials' must be positive");
  double gate_pow = opt_num(cfg, "deloc", "gate_pow", 0.15);
  double pass_frac = opt_num(cfg, "deloc", "pass_frac", 0.99);
  int probes = opt_int(cfg, "deloc", "probes", 10);
  double log_power = opt_num(cfg, "deloc", "log_power", 1.0);
  double win_lo = opt_num(cfg, "deloc", "win_lo", -1e300);
  double win_hi = opt_num(cfg, "deloc", "win_hi", 1e300);

  Report rep("deloc", cfg, ctx);
  DelocalizationReport dr = delocalization_check(m, trials, log_power, seed,
                                                 probes, win_lo, win_hi);
  double gate = std::pow((double)m.n, gate_pow);
  std::vector<int> tid(dr.per_trial.size());
  std::vector<double> val(dr.per_trial.size()), root(dr.per_trial.size());
  int ok = 0;
  for (size_t t = 0; t < dr.per_trial.size(); ++t) {
    tid[t] = (int)t;
    val[t] = dr.per_trial[t];
    root[t] = std::sqrt(std::max(0.0, dr.per_trial[t]));
    if (root[t] <= gate) ++ok;
  }
  CsvWriter w;
  w.col("trial", tid).col("overlap_sq_n", val).col("overlap_root", root);
  rep.csv("deloc.csv", w);
  rep.plot("deloc", "deloc.csv", "trial", "overlap_root",
           "scaled eigenvector overlaps");

  rep.metric("worst", dr.worst);
  rep.metric("worst_ratio", dr.worst_ratio);
  rep.metric("pass_trials", ok);
  double need = std::ceil(pass_frac * trials);
  rep.check("deloc_quantile", ok >= need, ok, need);
  return rep.finish();
}

// ---------------------------------------------------------------------------
// cusp: critical coupling search, kernel tables, empirical comparison

int cmd_cusp(const std::string& config_json, const RunContext& ctx) {
  json cfg = parse_strict(config_json);
  check_keys(cfg, "cusp", {"seed", "n"},
             {"class", "d_lo", "d_hi", "search_tol", "merge_eta", "table",
              "empirical"});
  uint64_t seed = resolve_seed(cfg, ctx);
  SymmetryClass cls =
      class_from(opt_str(cfg, "cusp", "class", "complex"), "cusp");
  int n = req_int(cfg, "cusp", "n");
  if (n < 8) throw SchemaError("cusp: 'n' must be at least 8");
  double d_lo = opt_num(cfg, "cusp", "d_lo", 0.5);
  double d_hi = opt_num(cfg, "cusp", "d_hi", 1.5);
  double search_tol = opt_num(cfg, "cusp", "search_tol", 1e-6);
  double merge_eta = opt_num(cfg, "cusp", "merge_eta", 1e-8);
  json& tj = cfg["table"];
  if (tj.is_null()) tj = json::object();
  check_keys(tj, "cusp.table", {}, {"x_min", "x_max", "points", "alpha"});
  double x_min = opt_num(tj, "cusp.table", "x_min", -4.0);
  double x_max = opt_num(tj, "cusp.table", "x_max", 4.0);
  int tpoints = opt_int(tj, "cusp.table", "points", 81);
  double alpha = opt_num(tj, "cusp.table", "alpha", 0.0);
  if (!(x_min < x_max) || tpoints < 2)
    throw SchemaError("cusp.table: empty grid");

  bool do_emp = cfg.contains("empirical") && !cfg.at("empirical").is_null();
  int emp_n = 0, emp_trials = 0;
  double emp_window = 5.0, emp_bin = 0.5, emp_xmax = 3.0, sup_frac = 0.1;
  if (do_emp) {
    json& ej = cfg.at("empirical");
    check_keys(ej, "cusp.empirical", {"n", "trials"},
               {"window", "bin", "x_max", "sup_frac"});
    emp_n = req_int(ej, "cusp.empirical", "n");
    emp_trials = req_int(ej, "cusp.empirical", "trials");
    emp_window = opt_num(ej, "cusp.empirical", "window", 5.0);
    emp_bin = opt_num(ej, "cusp.empirical", "bin", 0.5);
    emp_xmax = opt_num(ej, "cusp.empirical", "x_max", 3.0);
    sup_frac = opt_num(ej, "cusp.empirical", "sup_frac", 0.1);
  }

  Report rep("cusp", cfg, ctx);

  // deterministic critical-coupling search on the two-level family: the gap
  // is read off the self-consistent density, so no Monte Carlo enters and
  // repeated runs (any seed) give the same value
  auto gap_of = [&](double d) {
    Model md = two_level_model(cls, n, d);
    MdeSolver solver(md);
    if (solver.scdos(0.0, merge_eta) > 1e-5) return 0.0;  // bands merged
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 40; ++i) {
      double mid = 0.5 * (lo + hi);
      (solver.scdos(mid, 1e-7) > 1e-5 ? hi : lo) = mid;
    }
    return lo + hi;  // symmetric spectrum: gap = 2 x inner edge
  };
  double d_cusp = critical_coupling_search(gap_of, d_lo, d_hi, search_tol);
  rep.metric("d_cusp", d_cusp);

  Model mc = two_level_model(cls, n, d_cusp);
  MdeSolver solver(mc);
  SupportScan scan = scan_support(solver);
  CuspPoint cp = locate_cusp(solver, scan, 0.0);
  rep.metric("cusp_location", cp.location);
  rep.metric("cusp_coeff", cp.coeff);
  rep.metric("gamma_hat", cp.gamma_hat);
  rep.metric("cusp_fit_r2", cp.fit_r2);
  rep.check("cusp_fit_quality", cp.fit_r2 >= 0.99, cp.fit_r2, 0.99);

  PearceyOptions popt;
  popt.alpha = alpha;
  PearceyKernel kernel(popt);
  std::vector<double> xs(tpoints), kd(tpoints), ke(tpoints);
  for (int i = 0; i < tpoints; ++i) {
    xs[i] = x_min + (x_max - x_min) * i / (tpoints - 1);
    kd[i] = kernel.diagonal(xs[i]);
    ke[i] = kernel.refine_error(xs[i], xs[i]);
  }
  CsvWriter w;
  w.col("x", xs).col("k_diag", kd).col("refine_err", ke);
  rep.csv("pearcey.csv", w);
  rep.plot("pearcey", "pearcey.csv", "x", "k_diag",
           "extended cusp kernel diagonal");
  double worst_ref = *std::max_element(ke.begin(), ke.end());
  rep.metric("kernel_self_convergence", worst_ref);
  rep.check("kernel_self_convergence", worst_ref <= 1e-6, worst_ref, 1e-6);

  if (do_emp) {
    Model me = two_level_model(cls, emp_n, d_cusp);
    CuspHistogram hist = empirical_cusp_statistics(me, cp, emp_trials,
                                                   emp_window, emp_bin, seed);
    std::vector<double> hc(hist.centers.begin(), hist.centers.end());
    std::vector<double> hd(hist.density.begin(), hist.density.end());
    std::vector<double> hk(hc.size());
    for (size_t i = 0; i < hc.size(); ++i) hk[i] = kernel.diagonal(hc[i]);
    CsvWriter we;
    we.col("u", hc).col("density", hd).col("kernel", hk);
    rep.csv("empirical.csv", we);
    rep.plot("empirical", "empirical.csv", "u", "density",
             "rescaled eigenvalue density at the cusp");

    double sup = sup_distance(hist, kernel, emp_xmax);
    double supk = 0.0;
    for (size_t i = 0; i < hc.size(); ++i)
      if (std::abs(hc[i]) <= emp_xmax) supk = std::max(supk, hk[i]);
    rep.metric("samples_in_window", hist.total_in_window);
    rep.metric("sup_distance", sup);
    rep.metric("sup_kernel", supk);
    rep.check("empirical_sup_distance", sup <= sup_frac * supk, sup,
              sup_frac * supk);
  }
  return rep.finish();
}

// ---------------------------------------------------------------------------
// zigzag: Ornstein-Uhlenbeck flow identities and covariance audits

int cmd_zigzag(const std::string& config_json, const RunContext& ctx) {
  json cfg = parse_strict(config_json);
  check_keys(cfg, "zigzag", {"seed", "model"},
             {"times", "c_frac", "mc_trials", "probes", "identity_tol",
              "mc_sigmas"});
  uint64_t seed = resolve_seed(cfg, ctx);
  Model m = resolve_model(cfg.at("model"), "zigzag.model");
  std::vector<double> times =
      opt_num_list(cfg, "zigzag", "times", {0.25, 0.75, 1.5});
  double c_frac = opt_num(cfg, "zigzag", "c_frac", 0.8);
  int mc_trials = opt_int(cfg, "zigzag", "mc_trials", 2000);
  int probes = opt_int(cfg, "zigzag", "probes", 6);
  double identity_tol = opt_num(cfg, "zigzag", "identity_tol", 1e-10);
  double mc_sigmas = opt_num(cfg, "zigzag", "mc_sigmas", 3.0);
  if (times.empty()) throw SchemaError("zigzag: 'times' must be non-empty");
  if (mc_trials < 16) throw SchemaError("zigzag: 'mc_trials' too small");
  if (!(c_frac > 0.0 && c_frac <= 1.0))
    throw SchemaError("zigzag: 'c_frac' must lie in (0, 1]");

  Report rep("zigzag", cfg, ctx);

  // exact time identities of the matched flow clock
  double worst_c1 = 0.0, worst_pair = 0.0;
  for (double t : {0.1, 0.5, 1.0, 2.0, 5.0})
    worst_c1 = std::max(worst_c1, std::abs(ou_time(1.0, t) - t));
  for (double c : {0.25, 0.5, 0.9}) {
    double tmax = -std::log1p(-c);
    for (double f : {0.2, 0.6, 0.95}) {
      double s = ou_time(c, f * tmax);
      worst_pair = std::max(
          worst_pair, std::abs(c * (-std::expm1(-s)) - (-std::expm1(-f * tmax))));
    }
  }
  rep.check("clock_identity_c1", worst_c1 <= 1e-12, worst_c1, 1e-12);
  rep.check("clock_pair_identity", worst_pair <= 1e-12, worst_pair, 1e-12);

  auto covH = CovarianceTensor::of_model(m);
  auto covG = CovarianceTensor::gauss_reference(m.n, m.cls);
  double chat = covH.fullness() / covG.fullness();
  double c = c_frac * std::min(1.0, chat);
  rep.metric("fullness_ratio", chat);
  rep.metric("c", c);
  double t_cap = c < 1.0 ? -std::log1p(-c) : 1e300;

  RMatrix thin_cov = covH.cov() - c * covG.cov();
  CovarianceTensor thin(covH.basis(), thin_cov);
  rep.check("thin_noise_psd", thin.psd(), thin.psd() ? 1.0 : 0.0, 1.0);

  Matrix mean = m.a.materialize(m.n);
  std::mt19937_64 prng = make_rng(seed, 0x9b0b);
  std::normal_distribution<double> nd;
  std::vector<Matrix> pmats;
  std::vector<RVector> pcoords;
  for (int k = 0; k < probes; ++k) {
    RVector v(covH.dim());
    for (int i = 0; i < v.size(); ++i) v[i] = nd(prng);
    v /= v.norm();
    pcoords.push_back(v);
    pmats.push_back(covH.basis().assemble(v));
  }

  std::vector<double> col_t, col_s, col_dev, col_z;
  double worst_dev = 0.0, worst_z = 0.0;
  for (double t : times) {
    if (t <= 0.0) throw SchemaError("zigzag: times must be positive");
    double tt = std::min(t, 0.95 * t_cap);
    double s = ou_time(c, tt);

    // the fat preimage covariance, pushed through the zig flow, must equal
    // the model covariance (the zag flow preserves it exactly)
    RMatrix cov_fat = std::exp(tt) * (std::exp(-s) * covH.cov() +
                                      (-std::expm1(-s)) * thin_cov);
    CovarianceTensor fat_t(covH.basis(), cov_fat);
    double dev =
        (zig_covariance(fat_t, covG, tt).cov() - covH.cov()).cwiseAbs().maxCoeff();
    worst_dev = std::max(worst_dev, dev);

    // closed-form marginal variance along probe directions vs Monte Carlo
    RMatrix sig_t = zig_covariance(covH, covG, tt).cov();
    std::vector<double> pred(probes), acc(probes, 0.0);
    for (int k = 0; k < probes; ++k)
      pred[k] = pcoords[k].dot(sig_t * pcoords[k]);
    std::mt19937_64 rng = make_rng(seed, 0x51a0 + (uint64_t)(1000 * t));
    double decay = std::exp(-0.5 * tt);
    for (int it = 0; it < mc_trials; ++it) {
      Matrix ht = zig_step(sample_matrix(m, rng), covG, tt, rng);
      Matrix cent = ht - decay * mean;
      for (int k = 0; k < probes; ++k) {
        double v = std::real((pmats[k].adjoint() * cent).trace());
        acc[k] += v * v;
      }
    }
    double zworst = 0.0;
    for (int k = 0; k < probes; ++k) {
      double mc = acc[k] / mc_trials;
      double se = pred[k] * std::sqrt(2.0 / (mc_trials - 1));
      zworst = std::max(zworst, std::abs(mc - pred[k]) / se);
    }
    worst_z = std::max(worst_z, zworst);
    col_t.push_back(tt);
    col_s.push_back(s);
    col_dev.push_back(dev);
    col_z.push_back(zworst);
  }

  CsvWriter w;
  w.col("t", col_t).col("s", col_s).col("cov_identity_dev", col_dev);
  w.col("mc_worst_z", col_z);
  rep.csv("zigzag.csv", w);
  rep.plot("zigzag", "zigzag.csv", "t", "s", "matched flow clock");

  rep.metric("worst_cov_identity_dev", worst_dev);
  rep.metric("worst_mc_z", worst_z);
  rep.check("zig_zag_covariance_identity", worst_dev <= identity_tol,
            worst_dev, identity_tol);
  rep.check("flow_variance_vs_mc", worst_z <= mc_sigmas, worst_z, mc_sigmas);
  return rep.finish();
}

}  // namespace mdelab
