// gaussroots command-line driver. Every subcommand writes its tables under --out and prints one
// JSON manifest line (paths, schemas, summary values) as the last line on stdout.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gaussroots/experiments.hpp"
#include "gaussroots/gaussalg.hpp"
#include "gaussroots/lattice.hpp"
#include "gaussroots/sampler.hpp"
#include "gaussroots/spectral.hpp"
#include "gaussroots/zeros.hpp"

using namespace gaussroots;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string model = "gaussian";
  std::string out;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string config;
};

class Output {
 public:
  Output(std::string command, const Common& c) : dir_(c.out) {
    manifest_ = {{"command", std::move(command)}, {"version", kVersion}, {"model", c.model}, {"seed", c.seed},
                 {"out", c.out}, {"outputs", json::array()}};
  }

  // Opens <out>/<name> for writing and records it with its column list.
  std::ofstream csv(const std::string& name, const std::vector<std::string>& columns) {
    fs::create_directories(dir_);
    const std::string path = (fs::path(dir_) / name).string();
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << std::setprecision(17);
    for (std::size_t i = 0; i < columns.size(); ++i) f << (i ? "," : "") << columns[i];
    f << '\n';
    record(path, columns);
    return f;
  }

  void record(const std::string& path, const json& schema) {
    manifest_["outputs"].push_back({{"path", path}, {"schema", schema}});
  }

  json& operator[](const char* key) { return manifest_[key]; }
  const std::string& dir() const { return dir_; }

  void emit() const { std::cout << manifest_.dump() << std::endl; }

 private:
  std::string dir_;
  json manifest_;
};

std::string default_out() {
  const char* env = std::getenv("GAUSSROOTS_OUT");
  return env && *env ? env : "gaussroots_out";
}

LatticeDensity lattice_density(const std::string& name) {
  if (name == "raised-cosine") return [](double l) { return (1.0 + std::cos(l)) / (2.0 * std::numbers::pi); };
  if (name == "flat") return [](double) { return 1.0 / (2.0 * std::numbers::pi); };
  throw ValidationError("unknown lattice density '" + name + "' (raised-cosine, flat)");
}

// Values from --config replace whatever the flags set.
void apply_config(CLI::App& app, CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) opt = app.get_option_no_throw("--" + key);
    if (!opt) throw ValidationError("config: unknown key '" + key + "' for " + sub.get_name());
    opt->clear();
    auto add = [&](const json& v) {
      if (v.is_string()) opt->add_result(v.get<std::string>());
      else if (v.is_boolean()) opt->add_result(v.get<bool>() ? "true" : "false");
      else opt->add_result(v.dump());
    };
    if (value.is_array())
      for (const auto& v : value) add(v);
    else
      add(value);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zeros of stationary Gaussian processes: diagnostics and Monte Carlo studies"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kVersion));
  Common c;
  c.out = default_out();
  app.add_option("--model", c.model, "gaussian | bilateral_exponential | band(K) | csv:path");
  app.add_option("--out", c.out, "output directory (default $GAUSSROOTS_OUT or ./gaussroots_out)");
  app.add_option("--seed", c.seed, "master seed");
  app.add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--config", c.config, "JSON object whose keys override flags");

  // kac-rice
  auto* kac = app.add_subcommand("kac-rice", "Kac-Rice constant and spectral moments");

  // covariance
  double cov_tmax = 10.0, cov_kappa_o = 0.0, cov_y = 0.0;
  int cov_n = 201;
  auto* cov = app.add_subcommand("covariance", "r(t), r(t; kappa_o) and r_ell(t; y) tables");
  cov->add_option("--t-max", cov_tmax);
  cov->add_option("--n", cov_n)->check(CLI::Range(2, 1000000));
  cov->add_option("--kappa-o", cov_kappa_o);
  cov->add_option("--y", cov_y);

  // assumption-a
  double a_xstar = 1.0, a_kp = 0.2, a_threshold = 0.1;
  int a_horizon = 20, a_ygrid = 21;
  auto* asum = app.add_subcommand("assumption-a", "lattice summability check");
  asum->add_option("--xstar", a_xstar);
  asum->add_option("--kappa-prime", a_kp);
  asum->add_option("--horizon", a_horizon);
  asum->add_option("--y-grid", a_ygrid);
  asum->add_option("--threshold", a_threshold);

  // omega
  double o_xstar = 1.0, o_kp = 0.2;
  int o_horizon = 200, o_ygrid = 21;
  std::string o_norm = "euclidean";
  auto* om = app.add_subcommand("omega", "omega(k) and omega-star tables");
  om->add_option("--xstar", o_xstar);
  om->add_option("--kappa-prime", o_kp);
  om->add_option("--horizon", o_horizon);
  om->add_option("--y-grid", o_ygrid);
  om->add_option("--norm", o_norm)->check(CLI::IsMember({"euclidean", "l1"}));

  // simulate
  double s_T = 20.0, s_dt = 0.0;
  std::vector<double> s_y;
  int s_field_n = 201;
  auto* sim = app.add_subcommand("simulate", "sample a path, optionally the strip field on lines x + iy");
  sim->add_option("--T", s_T);
  sim->add_option("--dt", s_dt, "0 picks the default step");
  sim->add_option("--strip-y", s_y, "imaginary parts of the field lines");
  sim->add_option("--field-n", s_field_n);

  // zeros
  double z_T = 100.0, z_dt = 0.0;
  int z_refine = 40;
  auto* zer = app.add_subcommand("zeros", "real zeros of one sampled path");
  zer->add_option("--T", z_T);
  zer->add_option("--dt", z_dt);
  zer->add_option("--refine", z_refine);

  // jensen
  double j_x = 3.0, j_delta = 0.2, j_beta = 0.3, j_T = 20.0;
  std::size_t j_seeds = 100;
  auto* jen = app.add_subcommand("jensen", "Jensen sandwich and cover count over a seed batch");
  jen->add_option("--seeds", j_seeds);
  jen->add_option("--x", j_x, "ball centre on the real axis");
  jen->add_option("--delta", j_delta);
  jen->add_option("--beta", j_beta);
  jen->add_option("--T", j_T, "interval for the cover count");

  // split
  std::vector<int> sp_m = {2, 4, 8, 16, 32};
  std::string sp_density = "raised-cosine";
  auto* spl = app.add_subcommand("split", "m-dependent split of a lattice spectral density");
  spl->add_option("--m", sp_m);
  spl->add_option("--density", sp_density, "raised-cosine | flat");

  // moments
  double m_y = 0.2, m_eps = 0.3, m_xstar = 1.0;
  int m_k = 4, m_m = 3;
  std::size_t m_reps = 100000;
  bool m_negative = false;
  auto* mom = app.add_subcommand("moments", "Wick second moments and fractional moments on x*kZ + iy");
  mom->add_option("--y", m_y);
  mom->add_option("--k", m_k);
  mom->add_option("--m", m_m);
  mom->add_option("--eps", m_eps);
  mom->add_option("--reps", m_reps);
  mom->add_option("--xstar", m_xstar);
  mom->add_flag("--negative", m_negative);

  // tail
  TailConfig tc;
  tc.T = {25, 50, 100, 200};
  tc.eta = {0.05};
  std::string t_replay;
  auto* tail = app.add_subcommand("tail", "tail probabilities of the zero count");
  tail->add_option("--T", tc.T);
  tail->add_option("--eta", tc.eta);
  tail->add_option("--replicates", tc.replicates);
  tail->add_option("--dt", tc.dt);
  tail->add_option("--replay", t_replay, "rerun the study recorded in a manifest");

  // mean
  double mn_T = 100.0;
  std::size_t mn_reps = 2000;
  auto* mean = app.add_subcommand("mean", "Monte Carlo mean of N/T against the Kac-Rice constant");
  mean->add_option("--T", mn_T);
  mean->add_option("--replicates", mn_reps);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!c.config.empty()) apply_config(app, *sub, c.config);
    Output out(sub->get_name(), c);

    if (sub == kac) {
      const SpectralModel model = parse_model(c.model);
      const auto m = kac_rice_alpha(model);
      std::cout << "alpha = " << std::fixed << std::setprecision(6) << m.alpha << std::defaultfloat << '\n';
      out["alpha"] = m.alpha;
      out["second_moment"] = m.second_moment;
      out["second_moment_quadrature"] = m.second_moment_quadrature;
      out["minus_r2_fd"] = m.minus_r2_fd;
    } else if (sub == cov) {
      const SpectralModel model = parse_model(c.model);
      auto f = out.csv("covariance.csv", {"t", "r", "r_kappa", "r1", "r2"});
      for (int i = 0; i < cov_n; ++i) {
        const double t = cov_tmax * i / (cov_n - 1);
        f << t << ',' << covariance(model, t) << ',' << covariance_kappa(model, t, cov_kappa_o) << ','
          << r_ell(model, t, cov_y, 1).real() << ',' << r_ell(model, t, cov_y, 2).real() << '\n';
      }
      out["kappa_o"] = cov_kappa_o;
      out["y"] = cov_y;
    } else if (sub == asum) {
      const SpectralModel model = parse_model(c.model);
      AssumptionAOptions opt;
      opt.horizon = a_horizon;
      opt.y_grid = a_ygrid;
      opt.threshold = a_threshold;
      const auto r = omega_star(model, a_xstar, a_kp, opt);
      std::cout << "verdict: " << r.verdict_string() << '\n';
      auto f = out.csv("assumption_a.csv", {"k", "omega_star", "tail_r", "tail_r1prime", "tail_r2second"});
      for (std::size_t i = 0; i < r.omega_star_table.size(); ++i)
        f << r.omega_star_table[i].k << ',' << r.omega_star_table[i].omega_star << ',' << r.terms[0].tail[i] << ','
          << r.terms[1].tail[i] << ',' << r.terms[2].tail[i] << '\n';
      out["verdict"] = r.verdict_string();
      out["x_star"] = r.x_star;
      out["kappa_prime"] = r.kappa_prime;
      out["j_max"] = r.j_max;
      json terms = json::array();
      for (const auto& t : r.terms)
        terms.push_back({{"term", to_string(t.term)},
                         {"last_increment", t.last_increment},
                         {"truncation_ok", t.truncation_ok},
                         {"first_k_below", t.first_k_below ? json(*t.first_k_below) : json(nullptr)}});
      out["terms"] = terms;
    } else if (sub == om) {
      const SpectralModel model = parse_model(c.model);
      const auto t = omega_table(model, o_xstar, o_kp, o_horizon, o_ygrid,
                                 o_norm == "l1" ? CorrNorm::l1 : CorrNorm::euclidean);
      auto f = out.csv("omega.csv", {"k", "omega", "omega_hat0", "omega_hat1", "omega_hat2"});
      for (int k = 1; k <= t.horizon; ++k) {
        const double w = t.at(k);
        const double h = w < 1.0 ? 1.0 / (1.0 - w) : kInf;
        f << k << ',' << w << ',' << h << ',' << w * h << ',' << w * w * h << '\n';
      }
      AssumptionAOptions opt;
      opt.y_grid = o_ygrid;
      const auto star = omega_star(model, o_xstar, o_kp, opt);
      auto g = out.csv("omega_star.csv", {"k", "omega_star"});
      for (const auto& row : star.omega_star_table) g << row.k << ',' << row.omega_star << '\n';
      out["truncation_increment"] = t.truncation_increment;
      const auto k3 = first_k_below(t, 1.0 / 3.0);
      out["first_k_below_third"] = k3 ? json(*k3) : json(nullptr);
      out["assumption_a"] = star.verdict_string();
    } else if (sub == sim) {
      const SpectralModel model = parse_model(c.model);
      const auto scheme = build_synthesis_auto(model, s_T);
      const double dt = s_dt > 0.0 ? s_dt : default_dt(scheme);
      const auto path = sample_real_path(scheme, s_T, dt, c.seed);
      const std::string p = (fs::path(out.dir()) / "path.csv").string();
      fs::create_directories(out.dir());
      path.write_csv(p);
      out.record(p, {"t", "value"});
      if (!s_y.empty()) {
        std::vector<cplx> pts;
        for (double y : s_y)
          for (int i = 0; i < s_field_n; ++i) pts.emplace_back(s_T * i / std::max(1, s_field_n - 1), y);
        const auto field = sample_strip_field(scheme, pts, c.seed);
        const std::string q = (fs::path(out.dir()) / "field.csv").string();
        field.write_csv(q);
        out.record(q, {"re_z", "im_z", "re_f", "im_f"});
      }
      out["dt"] = dt;
      out["nodes"] = scheme.size();
      out["sup_error"] = scheme.sup_error;
    } else if (sub == zer) {
      const SpectralModel model = parse_model(c.model);
      const auto scheme = build_synthesis_auto(model, z_T);
      const double dt = z_dt > 0.0 ? z_dt : default_dt(scheme);
      const auto path = sample_real_path(scheme, z_T, dt, c.seed);
      const Realization x(scheme, c.seed);
      const auto rep = count_zeros_real(path, z_refine, x);
      auto f = out.csv("zeros.csv", {"index", "location"});
      for (std::size_t i = 0; i < rep.locations.size(); ++i) f << i << ',' << rep.locations[i] << '\n';
      out["count"] = rep.count;
      out["expected"] = kac_rice_alpha(model).alpha * z_T;
      out["flags"] = rep.flags;
      out["dt"] = dt;
    } else if (sub == jen) {
      const SpectralModel model = parse_model(c.model);
      const auto scheme = build_synthesis_auto(model, std::max(j_T, j_x) + 1.0);
      auto f = out.csv("jensen.csv", {"replicate", "lower", "mid", "upper", "tolerance", "holds", "cover_total",
                                      "real_zeros"});
      const double dt = default_dt(scheme);
      std::size_t holds = 0, cover_ok = 0;
      for (std::size_t r = 0; r < j_seeds; ++r) {
        const std::uint64_t s = derive_seed(c.seed, r);
        const Realization fr(scheme, s);
        const auto t = jensen_sandwich(fr, j_x, j_delta, j_beta, {}, {}, 0.5 * scheme.kappa);
        const auto cover = cover_count(fr, j_T, j_delta, {}, 0.5 * scheme.kappa);
        const int real = zero_counts(fr, {j_T}, dt)[0];
        holds += t.holds();
        cover_ok += real <= cover.total;
        f << r << ',' << t.lower << ',' << t.mid << ',' << t.upper << ',' << t.tolerance << ',' << t.holds() << ','
          << cover.total << ',' << real << '\n';
      }
      out["sandwich_fraction"] = static_cast<double>(holds) / static_cast<double>(j_seeds);
      out["cover_fraction"] = static_cast<double>(cover_ok) / static_cast<double>(j_seeds);
    } else if (sub == spl) {
      const auto p = lattice_density(sp_density);
      auto f = out.csv("split.csv", {"m", "eps_m", "dependence_range"});
      json rows = json::array();
      for (int m : sp_m) {
        const auto s = m_dependent_split(p, m);
        f << m << ',' << s.eps_m << ',' << s.dependence_range << '\n';
        rows.push_back({{"m", m}, {"eps_m", s.eps_m}, {"dependence_range", s.dependence_range}});
      }
      out["density"] = sp_density;
      out["rows"] = rows;
    } else if (sub == mom) {
      const SpectralModel model = parse_model(c.model);
      std::vector<cplx> pts;
      for (int j = 0; j < m_m; ++j) pts.emplace_back(j * m_k * m_xstar, m_y);
      auto [K, P] = strip_covariance(model, pts);
      const auto w = wick_second_moment(K, P);
      FracMomentOptions opt;
      opt.x_star = m_xstar;
      opt.negative = m_negative;
      opt.workers = c.workers;
      const auto fm = frac_moment_mc(model, m_y, m_k, m_m, m_eps, m_reps, c.seed, opt);
      auto f = out.csv("moments.csv", {"quantity", "value", "se"});
      f << "wick_second_moment," << w.moment << ",0\n";
      f << "permanent_K," << permanent(K).real() << ",0\n";
      f << "row_sum_bound," << w.bound << ",0\n";
      f << "frac_positive," << fm.positive.mean << ',' << fm.positive.se << '\n';
      f << "frac_reference_positive," << fm.reference_positive << ",0\n";
      if (fm.negative) {
        f << "frac_negative," << fm.negative->mean << ',' << fm.negative->se << '\n';
        f << "frac_reference_negative," << fm.reference_negative << ",0\n";
      }
      out["wick_second_moment"] = w.moment;
      out["ratio_positive"] = fm.ratio_positive();
      if (fm.negative) out["ratio_negative"] = *fm.ratio_negative();
    } else if (sub == tail) {
      TailStudy st;
      if (!t_replay.empty()) {
        st = replay(t_replay, app.get_option("--workers")->count() ? std::optional<unsigned>(c.workers)
                                                                    : std::nullopt);
      } else {
        tc.model = c.model;
        tc.seed = c.seed;
        tc.workers = c.workers;
        st = run_tail_study(tc);
      }
      const auto files = persist(st, out.dir());
      out.record(files.csv, json(std::string(kTailHeader)));
      out.record(files.manifest, "study manifest (config, alpha, sup_error, fits)");
      auto f = out.csv("tail_plot.csv", {"series", "x", "y", "ci_lo", "ci_hi"});
      for (const auto& cell : st.cells)
        for (auto side : {TailSide::two_sided, TailSide::lower, TailSide::upper, TailSide::upper_3eta}) {
          const auto& s = cell.at(side);
          f << to_string(side) << "_eta" << format_double(cell.eta) << ',' << cell.T << ',' << s.p_hat << ','
            << s.ci.lo << ',' << s.ci.hi << '\n';
        }
      json fits = json::array();
      for (const auto& fit : st.fits) fits.push_back(to_json(fit));
      out["fits"] = fits;
      out["alpha"] = st.alpha;
      out["sup_error"] = st.sup_error;
    } else if (sub == mean) {
      const SpectralModel model = parse_model(c.model);
      const auto r = run_mean_study(model, mn_T, mn_reps, c.seed, c.workers);
      auto f = out.csv("mean.csv", {"x", "y", "ci_lo", "ci_hi", "alpha"});
      f << r.T << ',' << r.mean << ',' << r.mean - 1.96 * r.se << ',' << r.mean + 1.96 * r.se << ',' << r.alpha
        << '\n';
      out["mean"] = r.mean;
      out["se"] = r.se;
      out["alpha"] = r.alpha;
      out["z"] = r.se > 0.0 ? (r.mean - r.alpha) / r.se : 0.0;
      out["nodes"] = r.nodes;
      out["sup_error"] = r.sup_error;
    }
    out.emit();
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n' << sub->help();
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n' << sub->help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 1;
  }
}
