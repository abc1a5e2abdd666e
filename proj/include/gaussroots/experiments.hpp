#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/beta.hpp>

#include "json.hpp"

#include "gaussroots/error.hpp"
#include "gaussroots/lattice.hpp"
#include "gaussroots/parallel.hpp"
#include "gaussroots/rng.hpp"
#include "gaussroots/sampler.hpp"
#include "gaussroots/spectral.hpp"
#include "gaussroots/zeros.hpp"

namespace gaussroots {

inline constexpr const char* kVersion = "0.1.0";

struct Interval {
  double lo = 0;
  double hi = 1;
};

// Exact (Clopper-Pearson) two-sided interval for a binomial proportion.
inline Interval clopper_pearson(std::size_t hits, std::size_t n, double level = 0.95) {
  if (n == 0) throw ValidationError("clopper_pearson: no trials");
  if (hits > n) throw ValidationError("clopper_pearson: hits exceed trials");
  const double a = 0.5 * (1.0 - level);
  const auto h = static_cast<double>(hits);
  const auto m = static_cast<double>(n);
  Interval ci;
  ci.lo = hits == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<>(h, m - h + 1.0), a);
  ci.hi = hits == n ? 1.0 : boost::math::quantile(boost::math::beta_distribution<>(h + 1.0, m - h), 1.0 - a);
  return ci;
}

// Zeros of one realization on [0, T] for several T, from a single grid on [0, max T]. The
// partial cell past the last grid point below T is closed with an exact evaluation at T.
inline std::vector<int> zero_counts(const Realization& x, const std::vector<double>& T, double dt) {
  const double t_max = *std::max_element(T.begin(), T.end());
  const std::size_t n = grid_steps(t_max, dt);
  const double h = t_max / static_cast<double>(n);
  const auto v = x.grid_values(0.0, h, n);
  std::vector<int> prefix(v.size(), 0);
  for (std::size_t k = 1; k < v.size(); ++k) prefix[k] = prefix[k - 1] + (v[k - 1] * v[k] < 0.0 ? 1 : 0);
  std::vector<int> out;
  for (double t : T) {
    auto k = static_cast<std::size_t>(std::floor(t / h + 1e-9));
    k = std::min(k, n);
    int c = prefix[k];
    if (std::abs(t - h * static_cast<double>(k)) > 1e-9 * h && v[k] * x(t) < 0.0) ++c;
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mean study

struct MeanResult {
  double T = 0;
  std::size_t reps = 0;
  double mean = 0;         // mean of N/T
  double se = 0;
  double alpha = 0;        // exact model
  double alpha_synth = 0;  // synthesized covariance
  double dt = 0;
  std::size_t nodes = 0;
  double sup_error = 0;
};

inline MeanResult run_mean_study(const SynthesisScheme& scheme, double alpha, double T, std::size_t reps,
                                 std::uint64_t seed, unsigned workers = 1, double dt = 0.0) {
  if (!(T > 0.0)) throw ValidationError("run_mean_study: T must be positive");
  if (reps < 2) throw ValidationError("run_mean_study: need at least 2 replicates");
  if (dt == 0.0) dt = default_dt(scheme);
  check_nyquist(scheme, dt);
  std::vector<int> counts(reps, 0);
  parallel_for(reps, workers, [&](std::size_t r) {
    const Realization x(scheme, derive_seed(seed, r));
    counts[r] = zero_counts(x, {T}, dt)[0];
  });
  MeanResult out;
  out.T = T;
  out.reps = reps;
  // moments of the integer counts first, then scale by 1/T
  double s = 0.0;
  for (int c : counts) s += c;
  const double mc = s / static_cast<double>(reps);
  double ss = 0.0;
  for (int c : counts) ss += (c - mc) * (c - mc);
  out.mean = mc / T;
  out.se = std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps)) / T;
  out.alpha = alpha;
  out.alpha_synth = scheme.alpha();
  out.dt = dt;
  out.nodes = scheme.size();
  out.sup_error = scheme.sup_error;
  return out;
}

inline MeanResult run_mean_study(const SpectralModel& model, double T, std::size_t reps, std::uint64_t seed,
                                 unsigned workers = 1) {
  const SynthesisScheme scheme = build_synthesis_auto(model, T);
  return run_mean_study(scheme, kac_rice_alpha(model).alpha, T, reps, seed, workers);
}

// ---------------------------------------------------------------------------
// Tail studies

struct TailConfig {
  std::string model = "gaussian";  // parse_model spec
  std::vector<double> T;
  std::vector<double> eta;
  std::size_t replicates = 1000;
  double dt = 0.0;                 // 0: min(π/(4λ_max), 0.05)
  std::uint64_t seed = 1;
  unsigned workers = 1;

  void validate() const {
    if (T.empty() || eta.empty()) throw ValidationError("tail study: T and eta lists must be non-empty");
    for (double t : T)
      if (!(t > 0.0)) throw ValidationError("tail study: T must be positive");
    for (double e : eta)
      if (!(e > 0.0)) throw ValidationError("tail study: eta must be positive");
    if (replicates < 100) throw ValidationError("tail study: need at least 100 replicates");
    if (dt < 0.0) throw ValidationError("tail study: dt must be >= 0");
  }
};

enum class TailSide { two_sided, lower, upper, upper_3eta };

inline std::string to_string(TailSide s) {
  switch (s) {
    case TailSide::two_sided: return "two_sided";
    case TailSide::lower: return "lower";
    case TailSide::upper: return "upper";
    case TailSide::upper_3eta: return "upper_3eta";
  }
  return "unknown";
}

inline TailSide tail_side_from_string(const std::string& s) {
  for (auto side : {TailSide::two_sided, TailSide::lower, TailSide::upper, TailSide::upper_3eta})
    if (to_string(side) == s) return side;
  throw ValidationError("unknown tail side: " + s);
}

struct TailCount {
  std::size_t hits = 0;
  double p_hat = 0;
  Interval ci;
};

// N − center ≥ ηT (upper), ≤ −ηT (lower), either (two-sided), ≥ 3ηT (upper_3eta).
struct TailResult {
  double T = 0;
  double eta = 0;
  std::size_t replicates = 0;
  double center = 0;                  // αT or E N⋆
  std::array<TailCount, 4> side;      // indexed by TailSide

  const TailCount& at(TailSide s) const { return side[static_cast<std::size_t>(s)]; }
  TailCount& at(TailSide s) { return side[static_cast<std::size_t>(s)]; }

  bool operator==(const TailResult& o) const {
    if (T != o.T || eta != o.eta || replicates != o.replicates || center != o.center) return false;
    for (std::size_t i = 0; i < 4; ++i)
      if (side[i].hits != o.side[i].hits || side[i].p_hat != o.side[i].p_hat || side[i].ci.lo != o.side[i].ci.lo ||
          side[i].ci.hi != o.side[i].ci.hi)
        return false;
    return true;
  }
};

struct RateFit {
  double eta = 0;
  bool valid = false;           // at least 3 cells with nonzero p̂
  double slope = 0;             // ĉ(η)
  double intercept = 0;
  double r2 = 0;
  double T_min = 0, T_max = 0;
  std::size_t points = 0;
  std::size_t censored = 0;     // zero-hit cells left out
};

// Least squares of −log p̂ (two-sided) against T.
inline RateFit fit_rate(const std::vector<TailResult>& cells, double eta) {
  RateFit f;
  f.eta = eta;
  std::vector<double> xs, ys;
  for (const auto& c : cells) {
    if (c.eta != eta) continue;
    const auto& t = c.at(TailSide::two_sided);
    if (t.hits == 0) {
      ++f.censored;
      continue;
    }
    xs.push_back(c.T);
    ys.push_back(-std::log(t.p_hat));
  }
  f.points = xs.size();
  if (xs.size() < 3) return f;
  f.T_min = *std::min_element(xs.begin(), xs.end());
  f.T_max = *std::max_element(xs.begin(), xs.end());
  const auto n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) return f;
  f.valid = true;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

namespace detail {

// counts[r][t] for replicate r and T index t.
inline std::vector<TailResult> tabulate_tails(const std::vector<std::vector<int>>& counts,
                                              const std::vector<double>& T, const std::vector<double>& eta,
                                              const std::vector<double>& center) {
  std::vector<TailResult> out;
  const std::size_t reps = counts.size();
  for (std::size_t t = 0; t < T.size(); ++t) {
    for (double e : eta) {
      TailResult c;
      c.T = T[t];
      c.eta = e;
      c.replicates = reps;
      c.center = center[t];
      const double band = e * T[t];
      for (const auto& row : counts) {
        const double d = row[t] - center[t];
        const bool lo = d <= -band, up = d >= band;
        if (lo || up) ++c.at(TailSide::two_sided).hits;
        if (lo) ++c.at(TailSide::lower).hits;
        if (up) ++c.at(TailSide::upper).hits;
        if (d >= 3.0 * band) ++c.at(TailSide::upper_3eta).hits;
      }
      for (auto& s : c.side) {
        s.p_hat = static_cast<double>(s.hits) / static_cast<double>(reps);
        s.ci = clopper_pearson(s.hits, reps);
      }
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace detail

struct TailStudy {
  TailConfig config;
  std::vector<TailResult> cells;  // T-major, then η in config order
  std::vector<RateFit> fits;      // one per η
  double alpha = 0;
  double alpha_synth = 0;
  double sup_error = 0;
  std::size_t nodes = 0;
  double dt = 0;
};

inline TailStudy run_tail_study(const TailConfig& config) {
  config.validate();
  const SpectralModel model = parse_model(config.model);
  const double t_max = *std::max_element(config.T.begin(), config.T.end());
  const SynthesisScheme scheme = build_synthesis_auto(model, t_max);
  TailStudy out;
  out.config = config;
  out.alpha = kac_rice_alpha(model).alpha;
  out.alpha_synth = scheme.alpha();
  out.sup_error = scheme.sup_error;
  out.nodes = scheme.size();
  out.dt = config.dt > 0.0 ? config.dt : default_dt(scheme);
  check_nyquist(scheme, out.dt);

  std::vector<std::vector<int>> counts(config.replicates);
  parallel_for(config.replicates, config.workers, [&](std::size_t r) {
    const Realization x(scheme, derive_seed(config.seed, r));
    counts[r] = zero_counts(x, config.T, out.dt);
  });
  std::vector<double> center;
  for (double t : config.T) center.push_back(out.alpha * t);
  out.cells = detail::tabulate_tails(counts, config.T, config.eta, center);
  for (double e : config.eta) out.fits.push_back(fit_rate(out.cells, e));
  return out;
}

// Sign changes N⋆_Y(T) = #{0 ≤ k < T : Y_k Y_{k+1} < 0} of the discrete process with density p_Y.
struct SignChangeConfig {
  std::vector<int> T;
  std::vector<double> eta;
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  int truncation = 256;
};

struct SignChangeStudy {
  std::vector<TailResult> cells;
  double rho1 = 0;                  // lag-one correlation of the moving average
  std::vector<double> hoeffding;    // 2 exp(−2η²T) per cell
};

inline SignChangeStudy run_sign_change_study(const LatticeDensity& p_y, const SignChangeConfig& config) {
  if (config.T.empty() || config.eta.empty()) throw ValidationError("sign-change study: empty T or eta list");
  if (config.replicates < 100) throw ValidationError("sign-change study: need at least 100 replicates");
  for (int t : config.T)
    if (t < 1) throw ValidationError("sign-change study: T must be >= 1");
  const MovingAverage ma = build_moving_average(p_y, config.truncation);
  double g0 = 0.0, g1 = 0.0;
  for (std::size_t i = 0; i < ma.a.size(); ++i) {
    g0 += ma.a[i] * ma.a[i];
    if (i + 1 < ma.a.size()) g1 += ma.a[i] * ma.a[i + 1];
  }
  SignChangeStudy out;
  out.rho1 = g1 / g0;
  const double p = std::acos(std::clamp(out.rho1, -1.0, 1.0)) / std::numbers::pi;
  const int t_max = *std::max_element(config.T.begin(), config.T.end());
  std::vector<std::vector<int>> counts(config.replicates);
  parallel_for(config.replicates, config.workers, [&](std::size_t r) {
    const DiscretePath path = ma.sample(t_max, derive_seed(config.seed, r));
    std::vector<int> prefix(path.values.size(), 0);
    for (std::size_t k = 1; k < path.values.size(); ++k)
      prefix[k] = prefix[k - 1] + (path.values[k - 1] * path.values[k] < 0.0 ? 1 : 0);
    for (int t : config.T) counts[r].push_back(prefix[static_cast<std::size_t>(t)]);
  });
  std::vector<double> T, center;
  for (int t : config.T) {
    T.push_back(t);
    center.push_back(p * t);
  }
  out.cells = detail::tabulate_tails(counts, T, config.eta, center);
  for (const auto& c : out.cells) out.hoeffding.push_back(2.0 * std::exp(-2.0 * c.eta * c.eta * c.T));
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline const char* kTailHeader = "T,eta,side,replicates,center,hits,p_hat,ci_lo,ci_hi";

inline void write_tail_csv(const std::vector<TailResult>& cells, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kTailHeader << '\n';
  for (const auto& c : cells)
    for (auto s : {TailSide::two_sided, TailSide::lower, TailSide::upper, TailSide::upper_3eta}) {
      const auto& t = c.at(s);
      out << format_double(c.T) << ',' << format_double(c.eta) << ',' << to_string(s) << ',' << c.replicates << ','
          << format_double(c.center) << ',' << t.hits << ',' << format_double(t.p_hat) << ','
          << format_double(t.ci.lo) << ',' << format_double(t.ci.hi) << '\n';
    }
}

inline std::vector<TailResult> read_tail_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != kTailHeader) throw ValidationError("unexpected tail CSV header in " + path);
  std::vector<TailResult> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    if (f.size() != 9) throw ValidationError("malformed tail CSV row: " + line);
    const double T = std::stod(f[0]), eta = std::stod(f[1]);
    if (cells.empty() || cells.back().T != T || cells.back().eta != eta) {
      cells.emplace_back();
      cells.back().T = T;
      cells.back().eta = eta;
      cells.back().replicates = std::stoull(f[3]);
      cells.back().center = std::stod(f[4]);
    }
    auto& t = cells.back().at(tail_side_from_string(f[2]));
    t.hits = std::stoull(f[5]);
    t.p_hat = std::stod(f[6]);
    t.ci = {std::stod(f[7]), std::stod(f[8])};
  }
  return cells;
}

inline nlohmann::json to_json(const TailConfig& c) {
  return {{"model", c.model}, {"T", c.T},       {"eta", c.eta},         {"replicates", c.replicates},
          {"dt", c.dt},       {"seed", c.seed}, {"workers", c.workers}};
}

inline TailConfig tail_config_from_json(const nlohmann::json& j) {
  TailConfig c;
  c.model = j.at("model").get<std::string>();
  c.T = j.at("T").get<std::vector<double>>();
  c.eta = j.at("eta").get<std::vector<double>>();
  c.replicates = j.at("replicates").get<std::size_t>();
  c.dt = j.value("dt", 0.0);
  c.seed = j.at("seed").get<std::uint64_t>();
  c.workers = j.value("workers", 1u);
  c.validate();
  return c;
}

inline nlohmann::json to_json(const RateFit& f) {
  return {{"eta", f.eta},   {"valid", f.valid}, {"slope", f.slope},   {"intercept", f.intercept}, {"r2", f.r2},
          {"T_min", f.T_min}, {"T_max", f.T_max}, {"points", f.points}, {"censored", f.censored}};
}

struct PersistedFiles {
  std::string csv;
  std::string manifest;
};

// Writes <dir>/<stem>.csv and <dir>/<stem>.json.
inline PersistedFiles persist(const TailStudy& study, const std::string& dir, const std::string& stem = "tail") {
  std::filesystem::create_directories(dir);
  PersistedFiles files{(std::filesystem::path(dir) / (stem + ".csv")).string(),
                       (std::filesystem::path(dir) / (stem + ".json")).string()};
  write_tail_csv(study.cells, files.csv);
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : study.fits) fits.push_back(to_json(f));
  const nlohmann::json m = {{"kind", "tail"},
                            {"version", kVersion},
                            {"config", to_json(study.config)},
                            {"alpha", study.alpha},
                            {"alpha_synth", study.alpha_synth},
                            {"sup_error", study.sup_error},
                            {"nodes", study.nodes},
                            {"dt", study.dt},
                            {"csv", std::filesystem::path(files.csv).filename().string()},
                            {"fits", fits}};
  std::ofstream out(files.manifest);
  if (!out) throw std::runtime_error("cannot write " + files.manifest);
  out << m.dump(2) << '\n';
  return files;
}

inline nlohmann::json read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return nlohmann::json::parse(in);
}

// Reruns the study recorded in a manifest; `workers` overrides the recorded worker count.
inline TailStudy replay(const std::string& manifest_path, std::optional<unsigned> workers = std::nullopt) {
  TailConfig c = tail_config_from_json(read_manifest(manifest_path).at("config"));
  if (workers) c.workers = *workers;
  return run_tail_study(c);
}

}  // namespace gaussroots
