// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Runs from ctest as `acceptance`; a single criterion can be
// selected with `acceptance 5`.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "clmvs/experiments.hpp"
#include "clmvs/gradcheck.hpp"
#include "clmvs/io.hpp"
#include "clmvs/losses.hpp"
#include "clmvs/planesweep.hpp"

#ifndef CLMVS_CLI_PATH
#error "CLMVS_CLI_PATH must point at the clmvs executable"
#endif

using namespace clmvs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1 ---------------------------------------------------------------------

Outcome gradient_audit() {
  const AuditConfig cfg;  // 16 configurations of 32x40
  std::string detail;
  bool ok = true;
  for (const TermAudit& t : audit_gradients(cfg)) {
    ok = ok && t.checked > 0 && t.pass_fraction() >= 0.99;
    detail += fmt("%s %.4f; ", t.term.c_str(), t.pass_fraction());
  }
  return {ok, detail + "need >= 0.99 each at rel < 1e-3"};
}

// ---- 2 ---------------------------------------------------------------------

Outcome norm_behaviour() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> len(2, 64);
  std::uniform_real_distribution<double> val(0.01, 1.0);
  int bad[3] = {0, 0, 0};
  const double thetas[3] = {0.5, 1.0, 2.0};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> e(static_cast<std::size_t>(len(rng)));
    for (double& x : e) x = val(rng);
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, e.size() - 1)(rng);
    std::vector<double> sweep(8);
    for (double& x : sweep) x = val(rng);
    std::sort(sweep.begin(), sweep.end());
    sweep.erase(std::unique(sweep.begin(), sweep.end()), sweep.end());
    for (int t = 0; t < 3; ++t) {
      NormKind kind;
      kind.theta = thetas[t];
      double prev = 0.0;
      for (std::size_t k = 0; k < sweep.size(); ++k) {
        e[i] = sweep[k];
        const double g = norm_value_grad(e, kind).grad[i];
        if (k > 0) {
          const bool ok = t == 0 ? g < prev : t == 1 ? g == prev : g > prev;
          if (!ok) {
            ++bad[t];
            break;
          }
        }
        prev = g;
      }
    }
  }
  return {bad[0] + bad[1] + bad[2] == 0,
          fmt("violations over 1000 vectors: l0.5 %d, l1 %d, l2 %d", bad[0], bad[1], bad[2])};
}

// ---- 3 ---------------------------------------------------------------------

FeatureVolume random_volume(int ch, int nd, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureVolume v{ch, nd, h, w, -1, std::vector<double>(static_cast<std::size_t>(ch) * nd * h * w)};
  for (double& x : v.data) x = n(rng);
  return v;
}

Outcome correlation_oracle() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const FeatureVolume ref = random_volume(8, 4, 16, 16, 10 + s);
    const std::vector<FeatureVolume> srcs{random_volume(8, 4, 16, 16, 20 + s),
                                          random_volume(8, 4, 16, 16, 30 + s)};
    for (int groups : {1, 2, 4, 8}) {
      const CostVolume got = groupwise_correlation(ref, srcs, groups);
      const int gs = 8 / groups;
      for (int g = 0; g < groups; ++g)
        for (int d = 0; d < 4; ++d)
          for (int r = 0; r < 16; ++r)
            for (int c = 0; c < 16; ++c) {
              double acc = 0.0;
              for (const FeatureVolume& v : srcs)
                for (int k = 0; k < gs; ++k)
                  acc += ref.at(g * gs + k, d, r, c) * v.at(g * gs + k, d, r, c);
              acc /= static_cast<double>(srcs.size()) * gs;
              worst = std::max(worst, std::abs(acc - got.at(g, d, r, c)));
            }
    }
  }
  return {worst < 1e-6, fmt("max |cost - oracle| = %.3g (need < 1e-6)", worst)};
}

// ---- 4 ---------------------------------------------------------------------

Outcome planesweep_fidelity() {
  const SweepTrial t = planesweep_trial(0);
  SceneSpec spec;
  const Scene scene = gen_scene(spec);
  const ScalarField& gt = *scene.views[0].gt_depth;
  const auto perfect = depth_metrics(gt, gt, BinaryMask(gt.height(), gt.width(), 1));
  const bool ones = perfect == std::vector<double>{1.0, 1.0, 1.0};
  return {t.within_2mm >= 0.90 && ones,
          fmt("within 2 mm %.4f of %zu pixels (need >= 0.90); GT metrics (%g,%g,%g)",
              t.within_2mm, t.valid, perfect[0], perfect[1], perfect[2])};
}

// ---- 5, 6, 7 -----------------------------------------------------------------

Outcome icc_efficacy() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const BranchTrial off = icc_trial(s, 0.0), on = icc_trial(s, 0.01);
    wins += on.median_error < off.median_error;
    detail += fmt("seed %d %.3f->%.3f; ", static_cast<int>(s), off.median_error, on.median_error);
  }
  return {wins == 5, detail + fmt("%d/5 lower (need 5/5)", wins)};
}

Outcome scc_efficacy() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const BranchTrial off = scc_trial(s, 0.0), on = scc_trial(s, 0.01);
    wins += on.median_error < off.median_error;
    detail += fmt("seed %d %.3f->%.3f; ", static_cast<int>(s), off.median_error, on.median_error);
  }
  return {wins == 5, detail + fmt("%d/5 lower (need 5/5)", wins)};
}

Outcome accurate_points() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const double half = norm_trial(s, 0.5), one = norm_trial(s, 1.0);
    wins += half > one;
    detail += fmt("seed %d L0.5 %.4f vs L1 %.4f; ", static_cast<int>(s), half, one);
  }
  return {wins >= 4, detail + fmt("%d/5 higher (need >= 4/5)", wins)};
}

// ---- 8 ---------------------------------------------------------------------

Outcome fusion_integrity() {
  const FusionTrial t = fusion_trial(0);
  return {t.within_interval >= 0.95 && t.provenance_ok,
          fmt("%zu points, %.4f within %.3f mm (need >= 0.95); provenance %s",
              t.cloud.points.size(), t.within_interval, t.interval,
              t.provenance_ok ? "ok" : "BROKEN")};
}

// ---- 9, 10 -----------------------------------------------------------------

int run(const std::string& cmd, std::string* out = nullptr) {
  FILE* p = popen((cmd + " 2>&1").c_str(), "r");
  if (!p) return -1;
  std::string text;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) text.append(buf, n);
  const int status = pclose(p);
  if (out) *out = text;
  return status;
}

std::string pipeline(const fs::path& dir, std::string* eval_out = nullptr) {
  const std::string cli = std::string(CLMVS_CLI_PATH) + " --seed 7 --out " + dir.string() + " ";
  for (const char* step : {"gen-synth", "infer", "optimize --view 0", "fuse"}) {
    std::string log;
    if (run(cli + step, &log) != 0) return std::string(step) + " failed: " + log;
  }
  if (run(cli + "eval", eval_out) != 0) return "eval failed";
  return "";
}

bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files, std::string& why) {
  std::vector<fs::path> left;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) left.push_back(fs::relative(e.path(), a));
  std::size_t right = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) right += e.is_regular_file();
  files = left.size();
  if (left.size() != right) {
    why = "file counts differ";
    return false;
  }
  for (const fs::path& rel : left) {
    if (!fs::exists(b / rel) || read_file(a / rel) != read_file(b / rel)) {
      why = rel.string() + " differs";
      return false;
    }
  }
  return true;
}

fs::path work_dir() {
  const fs::path d = fs::temp_directory_path() / ("clmvs_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

Outcome determinism_and_formats() {
  const fs::path root = work_dir();
  std::string err = pipeline(root / "a");
  if (err.empty()) err = pipeline(root / "b");
  if (!err.empty()) return {false, err};
  std::size_t files = 0;
  std::string why;
  const bool same = same_tree(root / "a", root / "b", files, why);

  // Round trips on random content.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  bool formats = true;
  const SceneData scene = read_scene_dir(root / "a" / "scene");
  for (const CameraView& v : scene.views) {
    const Camera back = parse_cam(format_cam(v.camera));
    formats = formats && back.K == v.camera.K && back.pose == v.camera.pose &&
              back.depth_min == v.camera.depth_min && back.depth_max == v.camera.depth_max;
  }
  ScalarField f(13, 17);
  for (double& x : f.data()) x = static_cast<float>(600.0 + 300.0 * u(rng));
  const ScalarField fb = decode_pfm_field(encode_pfm(f));
  formats = formats && std::equal(f.data().begin(), f.data().end(), fb.data().begin());
  PointCloud cloud;
  for (int i = 0; i < 100; ++i) {
    CloudPoint p;
    for (float& x : p.xyz) x = static_cast<float>(500.0 * u(rng));
    for (auto& c : p.rgb) c = static_cast<std::uint8_t>(rng() & 0xff);
    cloud.points.push_back(p);
  }
  const PointCloud cb = decode_ply(encode_ply(cloud));
  formats = formats && cb.points.size() == cloud.points.size();
  for (std::size_t i = 0; formats && i < cb.points.size(); ++i)
    formats = cb.points[i].xyz == cloud.points[i].xyz && cb.points[i].rgb == cloud.points[i].rgb;
  const PointCloud fused = read_ply(root / "a" / "fused.ply");
  formats = formats && encode_ply(fused) == read_file(root / "a" / "fused.ply");

  fs::remove_all(root);
  return {same && formats,
          fmt("%zu files byte-identical across runs: %s; cam/PFM/PLY round trips %s", files,
              same ? "yes" : why.c_str(), formats ? "bit-exact" : "MISMATCH")};
}

Outcome caveat_disclosure() {
  const fs::path root = work_dir();
  std::string eval_out;
  const std::string err = pipeline(root / "a", &eval_out);
  fs::remove_all(root);
  if (!err.empty()) return {false, err};
  const bool t1 = eval_out.find("0.757/0.829/0.868") != std::string::npos;
  const bool t2 = eval_out.find("0.375/0.283/0.329") != std::string::npos;
  const bool nr = eval_out.find("NOT reproducible at desk scale") != std::string::npos;
  const bool table = eval_out.find("<=2mm") != std::string::npos;
  return {t1 && t2 && nr && table,
          fmt("eval prints table %s, Table 1 numbers %s, Table 2 numbers %s, caveat %s",
              table ? "yes" : "no", t1 ? "yes" : "no", t2 ? "yes" : "no", nr ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no stated limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "gradient audit", 120.0, gradient_audit},
      {2, "norm behaviour", 0.0, norm_behaviour},
      {3, "group-wise correlation oracle", 0.0, correlation_oracle},
      {4, "plane-sweep fidelity", 120.0, planesweep_fidelity},
      {5, "ICC efficacy", 300.0, icc_efficacy},
      {6, "SCC efficacy", 300.0, scc_efficacy},
      {7, "L0.5 vs L1 accurate points", 300.0, accurate_points},
      {8, "fusion integrity", 120.0, fusion_integrity},
      {9, "determinism and formats", 0.0, determinism_and_formats},
      {10, "benchmark-number disclosure", 0.0, caveat_disclosure},
  };
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  int failed = 0;
  for (const Criterion& c : all) {
    if (only && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += fmt(" [over the %.0f s budget]", c.budget_s);
    }
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
