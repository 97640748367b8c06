#include "hyplab/lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include <openssl/sha.h>

#include "hyplab/cover.hpp"
#include "hyplab/detail/parallel.hpp"
#include "hyplab/group.hpp"
#include "hyplab/hyperbolic.hpp"
#include "hyplab/kernels.hpp"
#include "hyplab/orbit.hpp"
#include "hyplab/rng.hpp"
#include "hyplab/strong_conv.hpp"
#include "hyplab/trace_gap.hpp"

namespace hyplab::lab {

namespace {

const std::map<std::string, std::set<std::string>>& allowed_params() {
  static const std::map<std::string, std::set<std::string>> m{
      {"model-build", {"fit_length"}},
      {"enum-ball", {"model", "R", "L"}},
      {"census", {"model", "ball", "R", "step", "fit_lo", "calib_max", "rate_lo"}},
      {"kernel-table", {"D"}},
      {"kernel-checks", {"calibration"}},
      {"sample-covers", {"n", "samples", "trials", "trial_budget"}},
      {"fn-stats", {"n", "samples", "words", "words_np", "trial_budget"}},
      {"graph-gap", {"n", "samples", "eps", "fraction", "trial_budget"}},
      {"heat-trace", {"model", "ball", "n", "t", "R", "mc_points", "samples", "trial_budget"}},
      {"gap-witness", {"model", "ball", "n", "t", "R", "mc_points", "trial_budget"}},
      {"np-bound", {"model", "ball", "R", "t_grid", "radii", "mc_points"}},
      {"strong-conv", {"model", "ball", "R", "n_list", "samples", "L", "iterations", "T_list", "heat_T", "heat_n", "grid_res",
                       "trial_budget"}},
  };
  return m;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Check make_check(std::string name, bool passed, double value, double bound, std::string relation, std::string calibration = "none") {
  return Check{std::move(name), passed, value, bound, std::move(relation), std::move(calibration)};
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

double stddev_of(const std::vector<double>& v) {
  double s = 0, ss = 0;
  for (double x : v) s += x;
  const double mean = s / static_cast<double>(v.size());
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Shared state of one run: the config plus every input file that went into the hash.
struct Context {
  const RunConfig& cfg;
  ExperimentReport& report;
  std::vector<std::pair<std::string, std::string>> inputs;

  std::filesystem::path out_path(const std::string& name) const { return std::filesystem::path(cfg.out) / name; }

  std::string input(const std::string& path) {
    std::string content = read_file(path);
    inputs.emplace_back(path, content);
    return content;
  }

  FuchsianModel model() {
    if (cfg.has("model")) {
      FuchsianModel m = model_from_text(input(cfg.get_string("model", "")));
      if (m.genus() != cfg.genus) throw UsageError("model file genus differs from the configured genus");
      return m;
    }
    return build_model(cfg.genus);
  }

  OrbitBall ball(const FuchsianModel& m, double R) {
    if (cfg.has("ball")) {
      OrbitBall b = ball_from_text(input(cfg.get_string("ball", "")));
      if (b.genus != cfg.genus) throw UsageError("ball file genus differs from the configured genus");
      if (b.radius < R) throw UsageError("ball file radius " + fmt(b.radius) + " is below the required " + fmt(R));
      return b;
    }
    return enumerate_ball(m, R);
  }

  CoverHom cover(std::size_t n, std::uint64_t stream) const {
    if (n == 1) return trivial_hom(cfg.genus, 1);
    SampleOptions so;
    so.trial_budget = static_cast<std::uint64_t>(cfg.get_int("trial_budget", static_cast<long long>(so.trial_budget)));
    return sample_hom(cfg.genus, n, derive_seed(cfg.seed, stream), so).hom;
  }
};

// ---------------------------------------------------------------------------------------

void run_model_build(Context& ctx) {
  ModelOptions mo;
  mo.fit_length = static_cast<int>(ctx.cfg.get_int("fit_length", 6));
  const FuchsianModel m = build_model(ctx.cfg.genus, mo);
  const Mat2 r = evaluate(m, m.presentation.relator());
  double residual = 1e300;
  for (double s : {1.0, -1.0})
    residual = std::min(residual, std::max({std::abs(r.a - s), std::abs(r.b), std::abs(r.c), std::abs(r.d - s)}));

  auto& rep = ctx.report;
  rep.summary = {{"genus", m.genus()},
                 {"relator_residual", residual},
                 {"systole", m.systole},
                 {"inradius", m.inradius},
                 {"domain_radius", m.domain_radius},
                 {"area", m.area},
                 {"kappa1", m.svarc_milnor.kappa1},
                 {"kappa2", m.svarc_milnor.kappa2},
                 {"svarc_milnor_complete_radius", m.svarc_milnor.complete_radius}};
  rep.checks.push_back(make_check("model.relator_identity", residual <= 1e-9, residual, 1e-9, "<="));
  if (m.genus() == 2) {
    const double expected = 2 * std::acosh(1 + std::numbers::sqrt2);
    rep.summary["systole_expected"] = expected;
    rep.checks.push_back(make_check("model.systole", std::abs(m.systole - expected) <= 1e-6, m.systole, expected, "within 1e-6 of"));
  } else {
    rep.warnings.push_back("no closed-form systole reference for genus " + std::to_string(m.genus()));
  }
  if (!ctx.cfg.out.empty()) save_model(m, ctx.out_path("model.txt"));
}

void run_enum_ball(Context& ctx) {
  const FuchsianModel m = ctx.model();
  const double R = ctx.cfg.get_double("R", 10.0);
  const OrbitBall b = enumerate_ball(m, R);
  auto& rep = ctx.report;
  rep.summary = {{"R", R}, {"size", b.size()}, {"complete", b.complete}};
  // Inverse symmetry: the multiset of displacements pairs g with g^{-1}.
  std::size_t missing_inverse = 0;
  {
    std::vector<double> d;
    for (const auto& e : b.entries) d.push_back(e.displacement);
    for (const auto& e : b.entries) {
      const double di = displacement(inverse(e.matrix));
      auto it = std::lower_bound(d.begin(), d.end(), di - 1e-9);
      if (it == d.end() || *it > di + 1e-9) ++missing_inverse;
    }
  }
  rep.checks.push_back(make_check("ball.inverse_closed", missing_inverse == 0, static_cast<double>(missing_inverse), 0, "=="));
  const int L = static_cast<int>(ctx.cfg.get_int("L", 0));
  if (L > 0) {
    const CayleyBall cb = enumerate_cayley_ball(m, L);
    rep.summary["cayley_sphere_sizes"] = cb.sphere_sizes;
  }
  if (!ctx.cfg.out.empty()) save_ball(b, ctx.out_path("ball.txt"));
}

void run_census(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const double R = cfg.get_double("R", 12.0);
  const double step = cfg.get_double("step", 0.5);
  const double fit_lo = cfg.get_double("fit_lo", 6.0);
  const double calib_max = cfg.get_double("calib_max", 8.0);
  const double rate_lo = cfg.get_double("rate_lo", 8.0);
  const FuchsianModel m = ctx.model();
  const OrbitBall b = ctx.ball(m, R);
  const auto shells = count_nonprimitive(b, census_radii(R, step));
  auto& rep = ctx.report;
  rep.csv_header = {"R", "N", "N_np", "N_primitive"};

  std::vector<double> gx, gy, nx, ny;
  double C = 0;
  for (const auto& s : shells) {
    rep.records.push_back({{"R", s.radius}, {"N", s.total}, {"N_np", s.nonprimitive}, {"N_primitive", s.primitive}});
    rep.csv_rows.push_back({s.radius, static_cast<double>(s.total), static_cast<double>(s.nonprimitive), static_cast<double>(s.primitive)});
    if (s.radius >= fit_lo - 1e-12) {
      gx.push_back(s.radius);
      gy.push_back(static_cast<double>(s.total));
    }
    if (s.radius >= rate_lo - 1e-12 && s.nonprimitive > 0) {
      nx.push_back(s.radius);
      ny.push_back(static_cast<double>(s.nonprimitive));
    }
    if (s.radius <= calib_max + 1e-12)
      C = std::max(C, static_cast<double>(s.nonprimitive) / (std::pow(s.radius, 3) * std::exp(s.radius / 2)));
  }
  const double slope = gx.size() >= 2 ? fit_log_slope(gx, gy) : std::nan("");
  const double np_rate = nx.size() >= 2 ? fit_log_slope(nx, ny) : std::nan("");
  double worst = 0;
  bool np_ok = C > 0;
  std::size_t verified = 0;
  for (const auto& s : shells) {
    if (s.radius <= calib_max + 1e-12) continue;
    const double ratio = static_cast<double>(s.nonprimitive) / (std::pow(s.radius, 3) * std::exp(s.radius / 2));
    worst = std::max(worst, ratio);
    np_ok = np_ok && ratio <= C;
    ++verified;
  }
  double first_np = -1;
  for (const auto& e : b.entries)
    if (e.primitive_power >= 2) {
      first_np = e.displacement;
      break;
    }
  rep.summary = {{"R", R},           {"size", b.size()},      {"growth_slope", slope}, {"np_rate", np_rate},
                 {"np_constant", C}, {"np_worst_ratio", worst}, {"first_nonprimitive_displacement", first_np},
                 {"counting_constant", counting_constant(b)}};
  for (std::size_t i = 0; i + 2 < shells.size(); ++i) {
    if (shells[i].radius < 8 || shells[i].total == 0) continue;
    const auto j = i + static_cast<std::size_t>(std::lround(1.0 / step));
    if (j >= shells.size()) break;
    const double ratio = static_cast<double>(shells[j].total) / static_cast<double>(shells[i].total);
    if (std::abs(ratio / std::numbers::e - 1) > 0.25)
      rep.warnings.push_back("N(R+1)/N(R) = " + fmt(ratio) + " at R = " + fmt(shells[i].radius) + " is more than 25% from e");
  }
  if (gx.size() >= 2)
    rep.checks.push_back(make_check("census.growth_slope", slope >= 0.85 && slope <= 1.15, slope, 1.0, "in [0.85, 1.15]"));
  else
    rep.warnings.push_back("growth slope needs shells beyond R = " + fmt(fit_lo));
  if (verified > 0)
    rep.checks.push_back(make_check("census.nonprimitive_bound", np_ok, worst, C, "<=",
                                    "max of N_np / (R^3 e^{R/2}) over R <= " + fmt(calib_max)));
  else
    rep.warnings.push_back("non-primitive bound needs shells beyond R = " + fmt(calib_max));
  if (nx.size() >= 2)
    rep.checks.push_back(make_check("census.nonprimitive_rate", np_rate >= 0.35 && np_rate <= 0.65, np_rate, 0.5,
                                    "in [0.35, 0.65], fit over R >= " + fmt(rate_lo)));
  else
    rep.warnings.push_back("non-primitive rate needs two non-empty shells beyond R = " + fmt(rate_lo));
}

void run_kernel_table(Context& ctx) {
  const double D = ctx.cfg.get_double("D", 4.5);
  if (!(D > 4)) throw UsageError("kernel-table: D must exceed 4");
  const HeatBounds hb = calibrate_heat_bounds(calibration_grid(), D);
  std::vector<double> gd;
  for (double d = kGreenDMin; d <= 30 + 1e-9; d += 0.05) gd.push_back(d);
  const KernelTable kt = build_kernel_table(calibration_grid(), gd, hb);
  auto& rep = ctx.report;
  rep.summary = {{"D", hb.D},
                 {"c_gauss", hb.c_gauss},
                 {"c_hyp", hb.c_hyp},
                 {"t_points", kt.t_grid.size()},
                 {"d_points", kt.d_grid.size()},
                 {"green_points", kt.green_d_grid.size()}};
  if (!ctx.cfg.out.empty()) {
    save_heat_bounds(hb, ctx.out_path("calibration.txt"));
    save_kernel_table(kt, ctx.out_path("kernels.txt"));
  }
}

void run_kernel_checks(Context& ctx) {
  const std::string path =
      ctx.cfg.get_string("calibration", ctx.cfg.out.empty() ? std::string("calibration.txt") : ctx.out_path("calibration.txt").string());
  if (!std::filesystem::exists(path))
    throw UsageError("kernel-checks: calibration sidecar " + path + " is missing; run kernel-table first");
  const HeatBounds hb = heat_bounds_from_text(ctx.input(path));
  auto& rep = ctx.report;
  const std::string calib = "sidecar " + std::filesystem::path(path).filename().string() + " (calibration grid)";

  double worst_mass = 0;
  for (double t : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    const double e = std::abs(heat_mass(t) - 1);
    rep.records.push_back({{"kind", "heat_mass"}, {"t", t}, {"error", e}});
    worst_mass = std::max(worst_mass, e);
  }
  rep.checks.push_back(make_check("heat.normalization", worst_mass <= 1e-4, worst_mass, 1e-4, "<="));
  double worst_semi = 0;
  for (auto [t, d] : std::vector<std::pair<double, double>>{{0.5, 0.0}, {0.5, 1.0}, {1.0, 2.0}}) {
    const double e = semigroup_residual(t, d);
    rep.records.push_back({{"kind", "semigroup"}, {"t", t}, {"d", d}, {"residual", e}});
    worst_semi = std::max(worst_semi, e);
  }
  rep.checks.push_back(make_check("heat.semigroup", worst_semi <= 1e-4, worst_semi, 1e-4, "<="));

  const DominationReport dr = verify_heat_bounds(hb, verification_grid());
  rep.records.push_back({{"kind", "domination"},
                         {"points", dr.points},
                         {"max_log_ratio_gauss", dr.max_log_ratio_gauss},
                         {"worst_gauss", {dr.worst_gauss.first, dr.worst_gauss.second}},
                         {"max_log_ratio_hyp", dr.max_log_ratio_hyp},
                         {"worst_hyp", {dr.worst_hyp.first, dr.worst_hyp.second}},
                         {"sharper_points", dr.sharper_points},
                         {"sharper_candidates", dr.sharper_candidates},
                         {"sharper_fail_max_d", dr.sharper_fail_max_d}});
  rep.checks.push_back(make_check("heat.gauss_bound_dominates", dr.max_log_ratio_gauss <= 0, dr.max_log_ratio_gauss, 0, "max log(H/bound) <=", calib));
  rep.checks.push_back(make_check("heat.hyp_bound_dominates", dr.max_log_ratio_hyp <= 0, dr.max_log_ratio_hyp, 0, "max log(H/bound) <=", calib));
  rep.checks.push_back(make_check("heat.hyp_sharper_far", dr.sharper_fail_max_d < 5, dr.sharper_fail_max_d, 5,
                                  "largest d >= 2t where the refined bound is not sharper <", calib));

  double worst_g0 = 0;
  for (double d : {0.1, 1.0, 3.0, 10.0}) worst_g0 = std::max(worst_g0, std::abs(green_kernel(0, d) / green_zero_closed_form(d) - 1));
  rep.checks.push_back(make_check("green.lambda0_closed_form", worst_g0 <= 1e-6, worst_g0, 1e-6, "relative error <="));

  std::vector<double> rx, ry;
  for (double R = 5; R <= 30 + 1e-9; R += 1) {
    rx.push_back(R);
    ry.push_back(sphere_l2_mass(kLambda0, R));
    rep.records.push_back({{"kind", "sphere_l2_mass"}, {"R", R}, {"mass", ry.back()}});
  }
  const double flat = fit_log_slope(rx, ry);
  rep.checks.push_back(make_check("green.sphere_mass_flat", std::abs(flat) <= 0.05, flat, 0.05, "|slope of log| <="));

  const std::vector<std::pair<double, double>> seg{{1, 1}, {1, 3}, {2, 2}, {2, 5}, {3, 3}, {4, 6}};
  std::vector<std::pair<double, double>> seg2;
  for (auto [a, b] : seg) seg2.emplace_back(2 * a, 2 * b);
  const AnconaResult a1 = ancona_check_distances(kLambda0, seg), a2 = ancona_check_distances(kLambda0, seg2);
  rep.records.push_back({{"kind", "ancona"}, {"c_easy", a1.c_easy}, {"c_hard", a1.c_hard}, {"c_easy_doubled", a2.c_easy}, {"c_hard_doubled", a2.c_hard}});
  const double drift = std::max(std::abs(a2.c_easy / a1.c_easy - 1), std::abs(a2.c_hard / a1.c_hard - 1));
  const bool finite = std::isfinite(a1.c_easy) && std::isfinite(a1.c_hard) && std::isfinite(a2.c_easy) && std::isfinite(a2.c_hard);
  rep.checks.push_back(make_check("green.ancona_stable", finite && drift <= 0.1, drift, 0.1, "relative change under doubling <="));

  std::vector<double> hx, hy;
  for (double d = 15; d <= 30 + 1e-9; d += 1) {
    hx.push_back(d);
    hy.push_back(green_kernel(kLambda0, d));
  }
  const double decay = -fit_log_slope(hx, hy);
  rep.checks.push_back(make_check("green.harnack_slope", std::abs(decay - 0.5) <= 0.05, decay, 0.5, "within 0.05 of"));
  rep.summary = {{"calibration", {{"D", hb.D}, {"c_gauss", hb.c_gauss}, {"c_hyp", hb.c_hyp}}},
                 {"sphere_mass_slope", flat},
                 {"ancona_drift", drift},
                 {"green_decay_rate", decay}};
}

void run_sample_covers(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto n = static_cast<std::size_t>(cfg.get_int("n", 3));
  const auto samples = static_cast<std::size_t>(cfg.get_int("samples", 100));
  auto& rep = ctx.report;
  std::vector<HomSample> hs(samples);
  SampleOptions so;
  so.trial_budget = static_cast<std::uint64_t>(cfg.get_int("trial_budget", static_cast<long long>(so.trial_budget)));
  detail::parallel_for(samples, cfg.threads, [&](std::size_t i) { hs[i] = sample_hom(cfg.genus, n, derive_seed(cfg.seed, i), so); });
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    nlohmann::json j = to_json(hs[i].hom);
    j["index"] = i;
    j["trials"] = hs[i].trials;
    rep.records.push_back(std::move(j));
    total += hs[i].trials;
  }
  rep.summary = {{"n", n}, {"samples", samples}, {"trials", total}};

  const long long trials = cfg.get_int("trials", 100000);
  double factorial = 1;
  for (std::size_t i = 2; i <= n; ++i) factorial *= static_cast<double>(i);
  const double tuples = std::pow(factorial, 2.0 * cfg.genus);
  if (trials > 0 && tuples <= 2e7) {
    const std::size_t hom_count = enumerate_homs(cfg.genus, n).size();
    const double p = static_cast<double>(hom_count) / tuples;
    const std::uint64_t acc = count_accepted(cfg.genus, n, static_cast<std::uint64_t>(trials), derive_seed(cfg.seed, 1ULL << 40));
    const double rate = static_cast<double>(acc) / static_cast<double>(trials);
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(trials));
    rep.summary["hom_count"] = hom_count;
    rep.summary["tuples"] = tuples;
    rep.summary["acceptance_exact"] = p;
    rep.summary["acceptance_observed"] = rate;
    if (p == 1.0)
      rep.checks.push_back(make_check("cover.acceptance_exact_one", acc == static_cast<std::uint64_t>(trials), rate, 1.0, "=="));
    else
      rep.checks.push_back(make_check("cover.acceptance_matches_exhaustive", std::abs(rate - p) <= 3 * sigma, std::abs(rate - p), 3 * sigma,
                                      "|observed - |Hom|/(n!)^{2g}| <= 3 sigma", "exhaustive enumeration of all tuples"));
  }
}

std::vector<Word> parse_word_list(const std::string& text, const Presentation& p) {
  std::vector<Word> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (item.find_first_not_of(' ') != std::string::npos) out.push_back(parse_word(item, p));
  return out;
}

const char* kDefaultPrimitiveWords = "a1,b2,a1 b1,a1 B2,a1 a1 b1,a1 b1 a2,a1 b1 A1 B1,a1 a2 b1 b2,a1 b1 b1 a2 B2,a1 b1 a2 b2 A1 B2";

void run_fn_stats(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Presentation pres(cfg.genus);
  const auto n = static_cast<std::size_t>(cfg.get_int("n", 8));
  const auto samples = static_cast<std::size_t>(cfg.get_int("samples", 2000));
  const auto prim = parse_word_list(cfg.get_string("words", kDefaultPrimitiveWords), pres);
  const auto np = parse_word_list(cfg.get_string("words_np", ""), pres);
  for (const Word& w : prim) {
    if (!is_cyclically_reduced(w) || w.empty() || primitive_decompose(w).power != 1 || is_trivial(w, pres))
      throw UsageError("fn-stats: '" + to_string(w) + "' is not a cyclically reduced primitive word");
  }
  std::vector<Word> all = prim;
  all.insert(all.end(), np.begin(), np.end());
  SampleOptions so;
  so.trial_budget = static_cast<std::uint64_t>(cfg.get_int("trial_budget", static_cast<long long>(so.trial_budget)));
  const FnStatistics st = estimate_fixed_point_means(cfg.genus, all, n, samples, cfg.seed, cfg.threads, so);
  auto& rep = ctx.report;
  rep.csv_header = {"index", "mean", "stderr"};
  bool ok = true;
  double worst = -1e300;
  for (std::size_t k = 0; k < all.size(); ++k) {
    const auto& e = st.estimates[k];
    const bool primitive = k < prim.size();
    const double slack = std::abs(e.mean - 1) - (3 * e.stderr_ + 0.1);
    rep.records.push_back({{"word", to_string(e.word)}, {"primitive", primitive}, {"mean", e.mean}, {"stderr", e.stderr_}});
    rep.csv_rows.push_back({static_cast<double>(k), e.mean, e.stderr_});
    if (primitive) {
      ok = ok && slack <= 0;
      worst = std::max(worst, slack);
    }
  }
  rep.summary = {{"n", n}, {"samples", samples}, {"trials", st.trials}, {"words", prim.size()}, {"nonprimitive_words", np.size()}};
  rep.checks.push_back(make_check("cover.primitive_means_near_one", ok, worst, 0, "max of |mean - 1| - (3 stderr + 0.1) <="));
}

void run_graph_gap(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto n = static_cast<std::size_t>(cfg.get_int("n", 10));
  const auto samples = static_cast<std::size_t>(cfg.get_int("samples", 50));
  const double eps = cfg.get_double("eps", 0.5);
  const double fraction = cfg.get_double("fraction", 0.9);
  if (n < 2) throw UsageError("graph-gap: n must be at least 2");
  std::vector<double> lam(samples);
  std::vector<char> conn(samples);
  detail::parallel_for(samples, cfg.threads, [&](std::size_t i) {
    const CoverHom h = ctx.cover(n, i);
    lam[i] = graph_lambda1(h);
    conn[i] = is_transitive(h);
  });
  auto& rep = ctx.report;
  std::size_t good = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    rep.records.push_back({{"index", i}, {"connected", conn[i] != 0}, {"lambda1", lam[i]}});
    good += conn[i] && lam[i] >= eps;
  }
  const double width = 0.5, top = 4.0 * cfg.genus * 2;
  std::vector<std::size_t> hist(static_cast<std::size_t>(top / width) + 1, 0);
  for (double l : lam) ++hist[std::min(hist.size() - 1, static_cast<std::size_t>(l / width))];
  rep.csv_header = {"bin_lo", "count"};
  for (std::size_t b = 0; b < hist.size(); ++b) rep.csv_rows.push_back({width * static_cast<double>(b), static_cast<double>(hist[b])});
  const double frac = static_cast<double>(good) / static_cast<double>(samples);
  rep.summary = {{"n", n}, {"samples", samples}, {"eps", eps}, {"histogram_width", width}, {"histogram", hist}, {"fraction", frac}};
  rep.checks.push_back(make_check("cover.expander_fraction", frac >= fraction, frac, fraction, ">=", "eps fixed at " + fmt(eps)));
}

void run_heat_trace(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto n = static_cast<std::size_t>(cfg.get_int("n", 8));
  const double t = cfg.get_double("t", 2.0);
  const double R = cfg.get_double("R", 10.0);
  const auto mc = static_cast<std::size_t>(cfg.get_int("mc_points", 2000));
  const auto samples = static_cast<std::size_t>(cfg.get_int("samples", 30));
  const FuchsianModel m = ctx.model();
  const OrbitBall b = ctx.ball(m, R);
  const auto pts = sample_fundamental_domain(m, mc, derive_seed(cfg.seed, 1ULL << 41));
  const OrbitWeights w = compute_orbit_weights(m, b, t, pts);
  auto& rep = ctx.report;

  std::vector<double> ones(b.size(), 1.0);
  const double base = w.combine(ones), base_se = w.combine_stderr(ones);
  const TraceReport triv = trace_report(trivial_hom(cfg.genus, n), m, b, w);
  const TraceReport one = trace_report(trivial_hom(cfg.genus, 1), m, b, w);
  const double lin = std::abs(triv.cover_trace - static_cast<double>(n) * base);
  rep.checks.push_back(make_check("trace.trivial_linearity", lin <= 3 * static_cast<double>(n) * base_se, lin, 3 * static_cast<double>(n) * base_se,
                                  "|cover - n base| <= 3 sigma"));
  rep.checks.push_back(make_check("trace.degree_one_exact", one.cover_trace == base, std::abs(one.cover_trace - base), 0, "=="));

  std::vector<TraceReport> reps(samples);
  std::vector<CoverHom> homs(samples);
  detail::parallel_for(samples, cfg.threads, [&](std::size_t i) { homs[i] = ctx.cover(n, i); });
  for (std::size_t i = 0; i < samples; ++i) reps[i] = trace_report(homs[i], m, b, w);

  double worst_acc = 0, mean_prim = 0, mean_id = 0;
  rep.csv_header = {"index", "t", "term_id", "term_primitive", "term_nonprimitive", "tail_bound"};
  auto account = [&](const TraceReport& r) {
    const double acc = std::abs(r.term_id + r.term_primitive + r.term_nonprimitive - (r.cover_trace - r.base_trace));
    worst_acc = std::max(worst_acc, acc / std::max(1.0, std::abs(r.cover_trace)));
  };
  account(triv);
  account(one);
  for (std::size_t i = 0; i < samples; ++i) {
    nlohmann::json j = to_json(reps[i]);
    j["index"] = i;
    rep.records.push_back(std::move(j));
    rep.csv_rows.push_back({static_cast<double>(i), t, reps[i].term_id, reps[i].term_primitive, reps[i].term_nonprimitive, reps[i].tail_bound});
    account(reps[i]);
    mean_prim += reps[i].term_primitive;
    mean_id += reps[i].term_id;
  }
  rep.checks.push_back(make_check("trace.term_accounting", worst_acc <= 1e-12, worst_acc, 1e-12, "relative <="));
  rep.summary = {{"n", n}, {"t", t}, {"R", b.radius}, {"mc_points", pts.size()}, {"base_trace", base}, {"base_stderr", base_se},
                 {"tail_bound", truncation_tail_bound(m, b, t)}, {"samples", samples}};
  if (samples > 0) {
    mean_prim /= static_cast<double>(samples);
    mean_id /= static_cast<double>(samples);
    rep.summary["mean_term_primitive"] = mean_prim;
    rep.summary["mean_term_id"] = mean_id;
  }
  if (samples >= 30) {
    const double bound = 0.05 * mean_id / static_cast<double>(n);
    rep.checks.push_back(make_check("trace.primitive_attenuation", mean_prim <= bound, mean_prim, bound, "mean primitive term <= 0.05 mean id term / n"));
  }
}

void run_gap_witness(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto n = static_cast<std::size_t>(cfg.get_int("n", 8));
  const double t = cfg.get_double("t", 2.0);
  const double R = cfg.get_double("R", 10.0);
  const auto mc = static_cast<std::size_t>(cfg.get_int("mc_points", 2000));
  const FuchsianModel m = ctx.model();
  const OrbitBall b = ctx.ball(m, R);
  const CoverHom h = ctx.cover(n, 0);
  const TraceReport r = new_eigenvalue_witness(h, m, b, t, mc, derive_seed(cfg.seed, 1ULL << 41));
  auto& rep = ctx.report;
  nlohmann::json j = to_json(r);
  j["cover"] = to_json(h);
  rep.records.push_back(std::move(j));
  rep.summary = {{"n", n}, {"t", t}, {"lambda1_witness", r.lambda1_witness}, {"floor_flag", r.floor_flag}, {"graph_connected", is_transitive(h)}};
  if (n == 1) rep.checks.push_back(make_check("witness.degree_one_floor", r.floor_flag, r.floor_flag ? 1 : 0, 1, "floor flag set"));
}

void run_np_bound(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto t_grid = cfg.get_list("t_grid", {1, 2, 3, 4, 5, 6});
  const auto radii = cfg.get_list("radii", {6, 8, 10});
  const double R = cfg.get_double("R", 12.0);
  const auto mc = static_cast<std::size_t>(cfg.get_int("mc_points", 2000));
  const FuchsianModel m = ctx.model();
  const OrbitBall b = ctx.ball(m, R);
  const std::uint64_t seed = derive_seed(cfg.seed, 1ULL << 42);
  const NonPrimitiveBound np = nonprimitive_trace_bound(m, b, t_grid, mc, seed);
  const GreenRoute gr = green_route_bound(m, b, radii, mc, seed);
  auto& rep = ctx.report;
  rep.csv_header = {"t", "sum", "stderr", "ratio"};
  double worst = 0;
  for (const auto& row : np.rows) {
    rep.records.push_back({{"kind", "heat"}, {"t", row.t}, {"sum", row.sum}, {"stderr", row.stderr_}, {"shape", row.shape}, {"ratio", row.ratio}, {"holds", row.holds}});
    rep.csv_rows.push_back({row.t, row.sum, row.stderr_, row.ratio});
    if (row.t != t_grid.front()) worst = std::max(worst, row.ratio);
  }
  double worst_g = 0;
  for (const auto& row : gr.rows) {
    rep.records.push_back({{"kind", "green"}, {"R", row.R}, {"sum", row.sum}, {"shape", row.shape}, {"ratio", row.ratio}, {"holds", row.holds}});
    if (row.R != gr.calibration_R) worst_g = std::max(worst_g, row.ratio);
  }
  rep.summary = {{"R", b.radius}, {"heat_constant", np.constant}, {"green_constant", gr.constant}, {"green_calibration_R", gr.calibration_R}};
  rep.checks.push_back(make_check("trace.nonprimitive_heat_bound", np.holds(), worst, np.constant, "ratio to t^3 e^{-t/4} <=",
                                  "ratio at t = " + fmt(t_grid.front())));
  rep.checks.push_back(make_check("trace.nonprimitive_green_bound", gr.holds(), worst_g, gr.constant, "ratio to R^3 <=",
                                  "ratio at R = " + fmt(gr.calibration_R)));
}

void run_strong_conv(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto n_list = cfg.get_list("n_list", {4, 6, 8, 10});
  const auto samples = static_cast<std::size_t>(cfg.get_int("samples", 30));
  const int L = static_cast<int>(cfg.get_int("L", 8));
  const auto iterations = static_cast<std::size_t>(cfg.get_int("iterations", 2000));
  const auto T_list = cfg.get_list("T_list", {4, 6, 8});
  const double R = cfg.get_double("R", 10.0);
  const double heat_T = cfg.get_double("heat_T", 4.0);
  const auto heat_n = static_cast<std::size_t>(cfg.get_int("heat_n", 8));
  const int grid_res = static_cast<int>(cfg.get_int("grid_res", 8));
  if (samples < 2) throw UsageError("strong-conv: samples must be at least 2");
  const FuchsianModel m = ctx.model();
  const GroupRingElement z = markov_element(cfg.genus);
  const double k2 = z.l1_norm();
  auto& rep = ctx.report;

  const RegularNorm reg = regular_norm_lower(m, z, L);
  rep.csv_header = {"n", "median_rep_norm", "regular_lower"};
  std::vector<double> med, sig;
  std::size_t unconverged = 0;
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    const auto n = static_cast<std::size_t>(n_list[k]);
    std::vector<double> norms(samples);
    std::vector<char> conv(samples);
    detail::parallel_for(samples, cfg.threads, [&](std::size_t i) {
      const RepNorm r = rep_norm(ctx.cover(n, (static_cast<std::uint64_t>(n) << 32) + i), z, iterations);
      norms[i] = r.norm;
      conv[i] = r.converged;
    });
    for (std::size_t i = 0; i < samples; ++i) {
      NormReport nr;
      nr.n = n;
      nr.rep_norm = norms[i];
      nr.rep_converged = conv[i] != 0;
      nr.regular_lower = reg.lower;
      nr.regular_upper = k2;
      nr.gap = norms[i] - reg.lower;
      nlohmann::json j = to_json(nr);
      j["index"] = i;
      rep.records.push_back(std::move(j));
      unconverged += conv[i] == 0;
    }
    med.push_back(median_of(norms));
    sig.push_back(1.2533 * stddev_of(norms) / std::sqrt(static_cast<double>(samples)));
    rep.csv_rows.push_back({static_cast<double>(n), med.back(), reg.lower});
  }
  if (unconverged) rep.warnings.push_back(std::to_string(unconverged) + " power iterations stopped at the iteration budget");
  bool trend = true;
  double worst_rise = -1e300;
  for (std::size_t k = 0; k + 1 < med.size(); ++k) {
    const double rise = med[k + 1] - med[k] - std::hypot(sig[k], sig[k + 1]);
    worst_rise = std::max(worst_rise, rise);
    trend = trend && rise <= 0;
  }
  bool bracket = true;
  double lowest = 1e300;
  for (double x : med) {
    bracket = bracket && x >= reg.lower && x <= k2;
    lowest = std::min(lowest, x);
  }
  rep.checks.push_back(make_check("strong.median_trend", trend, worst_rise, 0, "largest rise beyond 1 sigma <="));
  rep.checks.push_back(make_check("strong.median_bracket", bracket, lowest, reg.lower, "smallest median >= regular lower bound; all <= " + fmt(k2),
                                  "Cayley ball L = " + std::to_string(L)));

  const OrbitBall b = ctx.ball(m, std::max({R, heat_T, T_list.empty() ? 0.0 : *std::max_element(T_list.begin(), T_list.end())}));
  std::vector<double> tails;
  for (double T : T_list) {
    tails.push_back(schur_tail_majorant(m, b, T));
    rep.records.push_back({{"kind", "schur_tail"}, {"T", T}, {"tail", tails.back()}});
  }
  if (T_list.size() >= 3) {
    bool decreasing = true, gaussian = true;
    std::vector<double> rate_sq, rate_lin;
    for (std::size_t k = 0; k + 1 < tails.size(); ++k) {
      decreasing = decreasing && tails[k + 1] < tails[k];
      const double dl = std::log(tails[k]) - std::log(tails[k + 1]);
      rate_sq.push_back(dl / (T_list[k + 1] * T_list[k + 1] - T_list[k] * T_list[k]));
      rate_lin.push_back(dl / (T_list[k + 1] - T_list[k]));
    }
    for (std::size_t k = 0; k < rate_sq.size(); ++k) gaussian = gaussian && rate_sq[k] > 0;
    for (std::size_t k = 0; k + 1 < rate_lin.size(); ++k) gaussian = gaussian && rate_lin[k + 1] >= rate_lin[k];
    rep.summary["tail_rate_per_T2"] = rate_sq;
    rep.summary["tail_rate_per_T"] = rate_lin;
    rep.checks.push_back(make_check("heat.tail_decreasing", decreasing, tails.back(), tails.front(), "tail(T) strictly decreasing"));
    rep.checks.push_back(make_check("heat.tail_gaussian_rate", gaussian, rate_sq.back(), 0,
                                    "log-decrement per unit T^2 > 0 and per unit T non-decreasing"));
  }
  if (heat_n > 0) {
    const HeatOpNorm hn = heat_op_norm_experiment(ctx.cover(heat_n, 1ULL << 43), m, b, heat_T, grid_res);
    nlohmann::json j = to_json(hn);
    j["kind"] = "heat_operator";
    rep.records.push_back(std::move(j));
    rep.checks.push_back(make_check("heat.base_contraction", hn.base_norm <= 1 + 1e-9, hn.base_norm, 1, "<="));
    rep.checks.push_back(make_check("heat.norm_within_slack", hn.within, hn.norm, hn.reference + hn.tail + hn.slack,
                                    "norm <= e^{-1/4} + tail + slack"));
  }
  rep.summary["regular_lower"] = reg.lower;
  rep.summary["regular_ball_size"] = reg.ball_size;
  rep.summary["regular_L"] = L;
  rep.summary["medians"] = med;
  rep.summary["median_sigmas"] = sig;
  rep.summary["element"] = to_json(z);
}

const std::map<std::string, std::function<void(Context&)>>& handlers() {
  static const std::map<std::string, std::function<void(Context&)>> h{
      {"model-build", run_model_build}, {"enum-ball", run_enum_ball},         {"census", run_census},
      {"kernel-table", run_kernel_table}, {"kernel-checks", run_kernel_checks}, {"sample-covers", run_sample_covers},
      {"fn-stats", run_fn_stats},       {"graph-gap", run_graph_gap},         {"heat-trace", run_heat_trace},
      {"gap-witness", run_gap_witness}, {"np-bound", run_np_bound},           {"strong-conv", run_strong_conv},
  };
  return h;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"model-build", "enum-ball",  "census",      "kernel-table", "kernel-checks", "sample-covers",
                                          "fn-stats",    "graph-gap",  "heat-trace",  "gap-witness",  "np-bound",      "strong-conv"};
  return s;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(it->second, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != it->second.size() || pos == 0) throw UsageError("parameter " + key + " is not a number: '" + it->second + "'");
  return v;
}

long long RunConfig::get_int(const std::string& key, long long fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(it->second, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != it->second.size() || pos == 0) throw UsageError("parameter " + key + " is not an integer: '" + it->second + "'");
  if (v < 0) throw UsageError("parameter " + key + " must be non-negative");
  return v;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::vector<double> RunConfig::get_list(const std::string& key, const std::vector<double>& fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    try {
      out.push_back(std::stod(item, &pos));
    } catch (const std::exception&) {
      throw UsageError("parameter " + key + " is not a comma-separated list of numbers");
    }
  }
  if (out.empty()) throw UsageError("parameter " + key + " is empty");
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto to_u64 = [&](const std::string& v) {
    std::size_t pos = 0;
    unsigned long long x = 0;
    try {
      x = std::stoull(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != v.size() || v[0] == '-') throw UsageError(key + " must be a non-negative integer: '" + v + "'");
    return static_cast<std::uint64_t>(x);
  };
  if (key == "experiment")
    experiment = value;
  else if (key == "genus")
    genus = static_cast<int>(to_u64(value));
  else if (key == "seed")
    seed = to_u64(value);
  else if (key == "threads")
    threads = static_cast<int>(to_u64(value));
  else if (key == "out")
    out = value;
  else if (key == "csv")
    csv = value == "1" || value == "true";
  else if (key.empty())
    throw UsageError("empty key in configuration");
  else
    params[key] = value;
}

std::string config_to_text(const RunConfig& c) {
  std::ostringstream os;
  os << "experiment=" << c.experiment << '\n'
     << "genus=" << c.genus << '\n'
     << "seed=" << c.seed << '\n'
     << "threads=" << c.threads << '\n'
     << "out=" << c.out << '\n'
     << "csv=" << (c.csv ? 1 : 0) << '\n';
  for (const auto& [k, v] : c.params) os << k << '=' << v << '\n';
  return os.str();
}

RunConfig config_from_text(const std::string& text) {
  RunConfig c;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config line without '=': " + line);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t"), b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) { return config_from_text(read_file(path)); }

nlohmann::json to_json(const RunConfig& c) {
  return {{"experiment", c.experiment}, {"genus", c.genus}, {"seed", c.seed}, {"threads", c.threads},
          {"out", c.out},               {"csv", c.csv},     {"params", c.params}};
}

std::string default_out_dir() {
  const char* env = std::getenv(kOutEnv);
  return env && *env ? std::string(env) : std::string("hyplab-out");
}

nlohmann::json to_json(const Check& c) {
  return {{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"bound", c.bound}, {"relation", c.relation}, {"calibration", c.calibration}};
}

bool ExperimentReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const Check* ExperimentReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

std::string git_blob_sha1(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
  std::ostringstream os;
  for (unsigned char b : digest) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(b);
  return os.str();
}

ExperimentReport run(const RunConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& h = handlers();
  auto it = h.find(config.experiment);
  if (it == h.end()) throw UsageError("unknown subcommand '" + config.experiment + "'");
  const auto& allowed = allowed_params().at(config.experiment);
  for (const auto& [k, v] : config.params)
    if (!allowed.count(k)) throw UsageError("parameter '" + k + "' is not used by " + config.experiment);
  if (config.genus < 2) throw UsageError("genus must be at least 2");
  if (config.threads < 1) throw UsageError("threads must be at least 1");
  if (!config.out.empty()) std::filesystem::create_directories(config.out);

  ExperimentReport report;
  report.config = config;
  Context ctx{config, report, {}};
  it->second(ctx);

  std::string hashed = config_to_text(config);
  for (const auto& [path, content] : ctx.inputs) hashed += "\n--input " + path + "\n" + content;
  report.input_hash = git_blob_sha1(hashed);
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string report_to_jsonl(const ExperimentReport& r) {
  std::string s;
  auto line = [&](nlohmann::json j) {
    s += j.dump();
    s += '\n';
  };
  line({{"type", "config"}, {"config", to_json(r.config)}, {"input_hash", r.input_hash}});
  for (const auto& rec : r.records) line({{"type", "record"}, {"data", rec}});
  line({{"type", "summary"}, {"data", r.summary}});
  for (const auto& c : r.checks) line({{"type", "check"}, {"data", to_json(c)}});
  for (const auto& w : r.warnings) line({{"type", "warning"}, {"message", w}});
  line({{"type", "status"}, {"passed", r.passed()}});
  return s;
}

std::string report_to_csv(const ExperimentReport& r) {
  std::string s;
  for (std::size_t i = 0; i < r.csv_header.size(); ++i) s += (i ? "," : "") + r.csv_header[i];
  s += '\n';
  for (const auto& row : r.csv_rows) {
    for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + fmt(row[i]);
    s += '\n';
  }
  return s;
}

void write_report(const ExperimentReport& r) {
  if (r.config.out.empty()) return;
  const std::filesystem::path dir(r.config.out);
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw UsageError("cannot write " + (dir / name).string());
    out << content;
  };
  put(r.config.experiment + ".jsonl", report_to_jsonl(r));
  put(r.config.experiment + ".timing.json", nlohmann::json{{"wall_time_s", r.wall_time}}.dump() + "\n");
  if (r.config.csv && !r.csv_header.empty()) put(r.config.experiment + ".csv", report_to_csv(r));
}

int exit_code(const ExperimentReport& r) { return r.passed() ? 0 : 2; }

}  // namespace hyplab::lab
