// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "pplsim/detection.hpp"
#include "pplsim/geometry.hpp"
#include "pplsim/jsd.hpp"
#include "pplsim/scenario.hpp"
#include "pplsim/similarity.hpp"

using namespace pplsim;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void curvature_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  int checked = 0;
  double worst = 0.0;
  while (checked < 10000) {
    const Point a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
    const double longest = std::max({chord_length(a, b), chord_length(b, c), chord_length(a, c)});
    if (triangle_area(a, b, c) < 1e-3 * longest * longest) continue;
    const double r = oracle::circumradius(a.x, a.y, b.x, b.y, c.x, c.y);
    worst = std::max(worst, std::abs(menger_curvature(a, b, c) * r - 1.0));
    ++checked;
  }
  bool collinear_zero = true;
  std::uniform_int_distribution<int> small(-50, 50);
  for (int t = 0; t < 10000; ++t) {
    const int x0 = small(rng), m = small(rng), c = small(rng);
    int dx1 = 1 + std::abs(small(rng)), dx2 = 1 + std::abs(small(rng));
    const auto pt = [&](int x) { return Point{static_cast<double>(x), static_cast<double>(m * x + c)}; };
    if (menger_curvature(pt(x0), pt(x0 + dx1), pt(x0 + dx1 + dx2)) != 0.0) collinear_zero = false;
    // equally spaced dyadic values along a line
    const double y0 = small(rng) / 8.0, step = small(rng) / 16.0;
    if (menger_curvature({1, y0}, {2, y0 + step}, {3, y0 + 2 * step}) != 0.0) collinear_zero = false;
  }
  const double secs = seconds_since(t0);
  report(worst <= 1e-9 && collinear_zero && secs < 5.0, "curvature-oracle",
         fmt("10000 triples, max rel err %.2e (tol 1e-9); 20000 collinear exactly 0: %s; %.2fs (limit 5s)",
             worst, collinear_zero ? "yes" : "no", secs));
}

void area_identity() {
  std::mt19937_64 rng(8);
  double worst = 0.0;
  std::size_t points = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto c = oracle::random_curve(rng, 7 + rng() % 60, "c" + std::to_string(t));
    const SamplingPlan plan{1 + rng() % 3, rng()};
    for (const auto [x, z] : interior_points(c.sample_id, c.size(), plan)) {
      const auto tri = curve_triple(c, x, z);
      const double diff = triangle_area(tri.left, tri.mid, tri.right) -
                          std::abs(static_cast<double>(z) * perplexity_change(c, x, z));
      worst = std::max(worst, std::abs(diff));
      ++points;
    }
  }
  report(worst <= 1e-12, "area-identity",
         fmt("1000 curves, %zu interior points, max |A - |z*dPPL|| = %.2e (tol 1e-12)", points, worst));
}

void metric_axioms() {
  std::mt19937_64 rng(99);
  bool identity = true, symmetry = true, triangle = true, bounded = true;
  double worst_gap = 0.0;
  int restricted = 0;
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n = 7 + rng() % 40;
    const auto u = oracle::random_curve(rng, n, "s", "U");
    const auto v = oracle::random_curve(rng, n, "s", "V");
    const auto w = oracle::random_curve(rng, n, "s", "W");
    const SamplingPlan plan{1 + rng() % 3, rng()};
    for (Metric m : {Metric::Curvature, Metric::SimApprox}) {
      const double uv = sequence_similarity(u, v, plan, m), vu = sequence_similarity(v, u, plan, m);
      const double vw = sequence_similarity(v, w, plan, m), uw = sequence_similarity(u, w, plan, m);
      identity = identity && sequence_similarity(u, u, plan, m) == 0.0;
      symmetry = symmetry && uv == vu;
      worst_gap = std::max(worst_gap, uw - (uv + vw));
      triangle = triangle && uw <= uv + vw + 1e-9;
    }
  }
  // corpus level, through compare_models
  for (int t = 0; t < 50; ++t) {
    std::vector<PerplexityCurve> cu, cv, cw;
    for (int i = 0; i < 10; ++i) {
      const std::string id = "s" + std::to_string(i);
      const std::size_t n = 7 + rng() % 20;
      cu.push_back(oracle::random_curve(rng, n, id, "U"));
      cv.push_back(oracle::random_curve(rng, n, id, "V"));
      cw.push_back(oracle::random_curve(rng, n, id, "W"));
    }
    const auto u = make_curve_set(cu), v = make_curve_set(cv), w = make_curve_set(cw);
    for (Metric m : {Metric::Curvature, Metric::SimApprox}) {
      const SamplingPlan plan{2, static_cast<std::uint64_t>(t)};
      const auto d = [&](const CurveSet& a, const CurveSet& b) { return compare_models(a, b, plan, m).corpus_value; };
      identity = identity && d(u, u) == 0.0;
      symmetry = symmetry && d(u, v) == d(v, u);
      triangle = triangle && d(u, w) <= d(u, v) + d(v, w) + 1e-9;
    }
  }
  // jsd: identity, symmetry, bounds, also across differing vocabularies
  for (int t = 0; t < 5000; ++t) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<double> p(n), q(n);
    double sp = 0, sq = 0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = (rng() % 4 == 0) ? 0.0 : oracle::random_curve(rng, 1, "x").f[0];
      q[i] = (rng() % 4 == 0) ? 0.0 : oracle::random_curve(rng, 1, "x").f[0];
      sp += p[i];
      sq += q[i];
    }
    if (sp == 0 || sq == 0) continue;
    for (auto& x : p) x /= sp;
    for (auto& x : q) x /= sq;
    const double d = jsd_values(p, q);
    identity = identity && jsd_values(p, p) == 0.0;
    symmetry = symmetry && d == jsd_values(q, p);
    bounded = bounded && d >= 0.0 && d <= std::numbers::ln2;
    std::vector<std::string> va, vb;
    for (std::size_t i = 0; i < n; ++i) va.push_back("t" + std::to_string(i));
    for (std::size_t i = 0; i < n; ++i) vb.push_back("t" + std::to_string((i + 1) % (n + 1)));
    try {
      const auto [a1, b1] = restrict_to_shared({va, p}, {vb, q});
      const auto [b2, a2] = restrict_to_shared({vb, q}, {va, p});
      symmetry = symmetry && jsd(a1, b1) == jsd(a2, b2);
      ++restricted;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SupportMismatch) throw;
    }
  }
  report(identity && symmetry && triangle && bounded && restricted > 1000, "metric-axioms",
         fmt("identity %s, symmetry %s, triangle %s (max excess %.2e, tol 1e-9), jsd in [0, ln2] %s, %d shifted-vocabulary pairs",
             identity ? "exact" : "BROKEN", symmetry ? "exact" : "BROKEN", triangle ? "ok" : "BROKEN",
             std::max(0.0, worst_gap), bounded ? "ok" : "BROKEN", restricted));
}

void threshold_arithmetic() {
  struct Row {
    const char* name;
    double min_cross, max_noised;
    const char* expect;
  };
  const Row rows[] = {{"Wikipedia", 0.4114, 0.3173, "0.3644"},
                      {"Med", 0.3446, 0.299, "0.3218"},
                      {"Law", 0.5247, 0.4405, "0.4826"}};
  bool ok = true;
  std::string detail;
  for (const auto& r : rows) {
    const auto got = calibrate_values(r.min_cross, r.max_noised).display();
    ok = ok && got == r.expect;
    detail += fmt("%s %s (want %s); ", r.name, got.c_str(), r.expect);
  }
  report(ok, "threshold-arithmetic", detail);
}

struct Timed {
  ScenarioBundle bundle;
  double seconds;
};

Timed timed_run(const FixtureCorpora& fc, std::string_view name, const ScenarioOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioBundle b;
  if (name == "distribution-shift") b = run_distribution_shift(fc, opt);
  if (name == "structure-change") b = run_structure_change(fc, opt);
  if (name == "copy-noise") b = run_copy_noise(fc, opt);
  if (name == "baselines") b = run_baselines(fc, opt);
  return {std::move(b), seconds_since(t0)};
}

ScenarioOptions options(std::uint64_t seed, unsigned threads = 1) {
  ScenarioOptions o;
  o.fixtures = PPLSIM_DEFAULT_FIXTURES;
  o.seed = seed;
  o.threads = threads;
  return o;
}

void scenario_orderings(const FixtureCorpora& fc) {
  constexpr double kLimit = 120.0;
  {
    bool ok = true;
    double slowest = 0.0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto r = timed_run(fc, "distribution-shift", options(seed));
      const auto& b = r.bundle;
      const bool holds = b.findings["holds"].get<bool>();
      ok = ok && holds && r.seconds < kLimit;
      slowest = std::max(slowest, r.seconds);
      detail += fmt("s%llu %s (in %.3f/%.3f < cross %.3f); ", static_cast<unsigned long long>(seed),
                    holds ? "ok" : "NO", b.value("enc-a", "enc-b"), b.value("deb-a", "deb-b"),
                    std::min({b.value("enc-a", "deb-a"), b.value("enc-a", "deb-b"), b.value("enc-b", "deb-a"),
                              b.value("enc-b", "deb-b")}));
    }
    report(ok, "ordering-distribution-shift", detail + fmt("slowest %.1fs", slowest));
  }
  {
    bool ok = true;
    double slowest = 0.0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto r = timed_run(fc, "structure-change", options(seed));
      const auto& f = r.bundle.findings;
      const bool holds = f["holds"].get<bool>();
      ok = ok && holds && r.seconds < kLimit;
      slowest = std::max(slowest, r.seconds);
      detail += fmt("s%llu %s (order pair %.3f vs shifted %.3f); ", static_cast<unsigned long long>(seed),
                    holds ? "ok" : "NO", f["order_vs_shift"]["order_pair"].get<double>(),
                    std::min(f["order_vs_shift"]["o3_vs_shifted"].get<double>(),
                             f["order_vs_shift"]["o2_vs_shifted"].get<double>()));
    }
    report(ok, "ordering-structure-change", detail + fmt("slowest %.1fs", slowest));
  }
  {
    bool ok = true;
    double slowest = 0.0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto r = timed_run(fc, "copy-noise", options(seed));
      const auto& f = r.bundle.findings;
      const bool mono = f["sweep_non_decreasing"].get<bool>();
      const auto t = DetectionThreshold::from_json(f["threshold"]);
      ok = ok && mono && t.separable() && r.seconds < kLimit;
      slowest = std::max(slowest, r.seconds);
      detail += fmt("s%llu %s (max_noised %.4f < min_cross %.4f); ", static_cast<unsigned long long>(seed),
                    mono && t.separable() ? "ok" : "NO", t.max_noised, t.min_cross);
    }
    report(ok, "ordering-copy-noise", detail + fmt("slowest %.1fs", slowest));
  }
}

void baselines(const FixtureCorpora& fc) {
  bool concord_ok = true, stable_ok = true;
  std::string concord, stable;
  double slowest = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = timed_run(fc, "baselines", options(seed));
    slowest = std::max(slowest, r.seconds);
    const auto& c = r.bundle.findings["concordance"];
    const double rho = c["spearman_curvature_jsd"].get<double>();
    const bool agree = c["top1_agree"].get<bool>();
    concord_ok = concord_ok && rho >= 0.8 && agree && r.seconds < 120.0;
    concord += fmt("s%llu rho %.3f top1 %s; ", static_cast<unsigned long long>(seed), rho, agree ? "agree" : "DIFFER");
    const auto& s = r.bundle.findings["stability"];
    const auto steady = s["curvature_steadier"].get<std::size_t>();
    const auto total = s["total"].get<std::size_t>();
    stable_ok = stable_ok && total == 7 && steady >= 6;
    stable += fmt("s%llu %zu/%zu; ", static_cast<unsigned long long>(seed), steady, total);
    if (seed == 1) stable += "anchor " + s["anchor"].get<std::string>() + "; ";
  }
  report(concord_ok, "baseline-concordance",
         concord + fmt("need rho >= 0.8 and top-1 agreement; slowest %.1fs", slowest));
  report(stable_ok, "stability", stable + "need std(curvature) <= std(sim_approx) on >= 6 of 7 pairs");
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return out;
}

void determinism(const FixtureCorpora& fc) {
  const auto root = fs::temp_directory_path() / "pplsim_acceptance_determinism";
  fs::remove_all(root);
  bool ok = true;
  std::string detail;
  for (std::string_view name : kScenarioNames) {
    std::vector<std::map<std::string, std::string>> runs;
    int i = 0;
    for (unsigned threads : {1u, 1u, 4u}) {
      auto opt = options(11, threads);
      opt.eval_samples = 300;
      opt.noise_seeds = 2;
      const auto dir = root / std::string(name) / std::to_string(i++);
      timed_run(fc, name, opt).bundle.write(dir);
      runs.push_back(tree(dir));
    }
    const bool same = runs[0] == runs[1] && runs[0] == runs[2];
    ok = ok && same && !runs[0].empty();
    detail += fmt("%s %zu files %s; ", std::string(name).c_str(), runs[0].size(), same ? "identical" : "DIFFER");
  }
  fs::remove_all(root);
  report(ok, "determinism", detail + "(rerun and 1 vs 4 threads)");
}

}  // namespace

int main() {
  std::printf("pplsim %s acceptance\n", kToolkitVersion);
  const auto guarded = [](const char* name, auto fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(false, name, e.what());
    }
  };
  guarded("curvature-oracle", curvature_oracle);
  guarded("area-identity", area_identity);
  guarded("metric-axioms", metric_axioms);
  guarded("threshold-arithmetic", threshold_arithmetic);
  try {
    const auto fc = FixtureCorpora::load(PPLSIM_DEFAULT_FIXTURES);
    scenario_orderings(fc);
    baselines(fc);
    determinism(fc);
  } catch (const std::exception& e) {
    report(false, "scenarios", e.what());
  }
  std::printf("%s: %d criterion/criteria failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
