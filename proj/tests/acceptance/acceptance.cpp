// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance [work_dir]

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "convboost/boost.hpp"
#include "convboost/channels.hpp"
#include "convboost/eval.hpp"
#include "convboost/geometry.hpp"
#include "convboost/io/manifest.hpp"
#include "convboost/io/proposals.hpp"
#include "convboost/io/report.hpp"
#include "convboost/io/voc.hpp"
#include "convboost/sampler.hpp"
#include "convboost/synth.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace convboost;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Runs the CLI; output goes to `log`.
bool cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CONVBOOST_CLI) + " " + args + " >> " + q(log) + " 2>&1";
  const int status = std::system(cmd.c_str());
  return status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

// ---------------------------------------------------------------------------

Outcome geometry_oracles() {
  convboost::Rng rng(1001);
  std::size_t iou_bad = 0;
  for (int t = 0; t < 10000; ++t) {
    const Box a = testing_support::random_int_box(rng, 48, 30), b = testing_support::random_int_box(rng, 48, 30);
    if (iou(a, b) != oracles::lattice_iou(a, b)) ++iou_bad;
  }
  std::size_t nms_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const int n = static_cast<int>(rng.uniform_int(0, 200));
    std::vector<ScoredBox> in;
    for (int i = 0; i < n; ++i)
      in.push_back({testing_support::random_int_box(rng, 300, 100), static_cast<double>(rng.uniform_int(0, 30))});
    const double th = rng.uniform(0.05, 1.0);
    if (nms_greedy(in, th) != oracles::reference_nms(in, th)) ++nms_bad;
  }
  return {iou_bad == 0 && nms_bad == 0,
          "iou mismatches " + std::to_string(iou_bad) + "/10000, nms mismatches " + std::to_string(nms_bad) + "/1000"};
}

// Descriptor set from synthetic scenes, as the trainer would build it.
WeightedSet scene_training_set() {
  synth::SceneOptions opt;
  std::vector<ImagePlanes> images;
  TrainingImages data;
  for (std::size_t i = 0; i < 12; ++i) {
    auto scene = synth::generate_scene(77, i, opt);
    std::vector<Box> boxes;
    for (const auto& o : scene.objects) boxes.push_back(o.box);
    data.annotations.push_back(boxes);
    data.sizes.emplace_back(scene.image.width(), scene.image.height());
    images.push_back(std::move(scene.image));
  }
  data.load = [&](std::size_t i) { return images[i]; };
  const auto bank = synth_filter_bank(1, 8, 5, 5, 3);
  const WindowParams p{8, 4, 8, 3, 0.0};
  SampleSpec spec;
  spec.neg_per_round = 600;
  spec.rng_seed = 3;
  const auto s = collect_initial_samples(data, bank, p, spec, 1);
  WeightedSet set(1, s.positives.dim());
  for (std::size_t i = 0; i < s.positives.size(); ++i) set.add(s.positives.row(i), 1);
  for (std::size_t i = 0; i < s.negatives.size(); ++i) set.add(s.negatives.row(i), -1);
  set.set_uniform_weights();
  return set;
}

Outcome boosting_oracle() {
  convboost::Rng rng(1002);
  std::size_t tree_bad = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(10, 200));
    const int features = static_cast<int>(rng.uniform_int(1, 32));
    const auto set = testing_support::random_weighted_set(rng, n, features);
    const auto fb = quantize_features(set, static_cast<int>(rng.uniform_int(2, 256)));
    const auto tree = train_depth2_tree(set, fb);
    std::vector<bool> all(n, true);
    const double got = oracles::split_impurity(set, all, tree.root.feature, tree.root.threshold);
    const double want = oracles::brute_force_min_impurity(set, fb, all);
    if (std::abs(got - want) > 1e-12 * std::max(1.0, want)) ++tree_bad;
  }

  std::size_t sep_bad = 0, sep_total = 0;
  for (int dims : {1, 2, 3, 5})
    for (std::size_t n : {6u, 20u, 50u})
      for (int trial = 0; trial < 10; ++trial) {
        const auto set = testing_support::separable_set(rng, dims, n, 0.1);
        TrainingHistory h;
        adaboost_train(set, quantize_features(set, 256), {5, 1}, &h);
        ++sep_total;
        if (h.train_error.back() != 0.0) ++sep_bad;
      }

  const auto set = scene_training_set();
  TrainingHistory h;
  adaboost_train(set, quantize_features(set, 256), {2048, 1}, &h);
  std::size_t rises = 0;
  for (std::size_t t = 1; t < h.log_exp_loss.size(); ++t)
    if (h.log_exp_loss[t] > h.log_exp_loss[t - 1]) ++rises;
  const bool ok = tree_bad == 0 && sep_bad == 0 && rises == 0 && h.log_exp_loss.size() == 2048;
  return {ok, "tree impurity mismatches " + std::to_string(tree_bad) + "/50, separable failures " +
                  std::to_string(sep_bad) + "/" + std::to_string(sep_total) + ", exp-loss rises " +
                  std::to_string(rises) + " over " + std::to_string(h.log_exp_loss.size()) + " rounds (n=" +
                  std::to_string(set.size()) + ", log loss " + fmt(h.log_exp_loss.front()) + " -> " +
                  fmt(h.log_exp_loss.back()) + ")"};
}

ImagePlanes random_image(convboost::Rng& rng, int w, int h) {
  ImagePlanes img(w, h, 3);
  for (auto& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

Outcome channel_properties() {
  convboost::Rng rng(1003);
  const auto bank = synth_filter_bank(4, 16, 7, 7, 3);

  double worst_lin = 0;
  for (int t = 0; t < 10; ++t) {
    const auto a = random_image(rng, 48, 40), b = random_image(rng, 48, 40);
    const double alpha = rng.uniform(-1, 1), beta = rng.uniform(-1, 1);
    ImagePlanes mix(48, 40, 3);
    for (std::size_t i = 0; i < mix.data().size(); ++i)
      mix.data()[i] = static_cast<float>(alpha * a.data()[i] + beta * b.data()[i]);
    const auto ca = convolve_linear(a, bank), cb = convolve_linear(b, bank), cm = convolve_linear(mix, bank);
    for (int f = 0; f < bank.filters; ++f) {
      double peak = 1e-3;
      for (float v : cm.plane(f)) peak = std::max(peak, std::abs(double(v)));
      for (std::size_t i = 0; i < cm.plane_size(); ++i)
        worst_lin = std::max(worst_lin, std::abs(cm.plane(f)[i] - (alpha * ca.plane(f)[i] + beta * cb.plane(f)[i])) / peak);
    }
  }

  std::size_t conservation_bad = 0;
  for (int s : {1, 2, 4, 8}) {
    ChannelStack st;
    st.channels = 3;
    st.width = 7 * s;
    st.height = 5 * s;
    for (std::size_t i = 0; i < 3 * st.plane_size(); ++i)
      st.data.push_back(static_cast<float>(rng.uniform_int(0, 255)) / 64.0f);
    const auto out = aggregate(st, s);
    for (int c = 0; c < 3; ++c) {
      double in_sum = 0, out_sum = 0;
      for (float v : st.plane(c)) in_sum += v;
      for (float v : out.plane(c)) out_sum += v;
      if (out_sum * s * s != in_sum) ++conservation_bad;
    }
  }

  std::size_t shift_bad = 0, shift_checked = 0;
  for (int s : {2, 4}) {
    const auto big = random_image(rng, 80 + s, 64 + s);
    ImagePlanes a(80, 64, 3), b(80, 64, 3);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 80; ++x) {
          a.at(c, y, x) = big.at(c, y + s, x + s);
          b.at(c, y, x) = big.at(c, y, x);
        }
    const auto ca = aggregate(convolve(a, bank), s), cb = aggregate(convolve(b, bank), s);
    const int ring = (bank.kh + 2 * s - 1) / (2 * s) + 1;
    for (int f = 0; f < bank.filters; ++f)
      for (int y = ring; y < ca.height - ring - 1; ++y)
        for (int x = ring; x < ca.width - ring - 1; ++x) {
          ++shift_checked;
          if (cb.at(f, y + 1, x + 1) != ca.at(f, y, x)) ++shift_bad;
        }
  }
  const bool ok = worst_lin <= 1e-5 && conservation_bad == 0 && shift_bad == 0 && shift_checked > 0;
  return {ok, "linearity max rel err " + fmt(worst_lin, 3) + ", conservation failures " +
                  std::to_string(conservation_bad) + "/12, shift mismatches " + std::to_string(shift_bad) + "/" +
                  std::to_string(shift_checked)};
}

// ---------------------------------------------------------------------------

struct Benchmark {
  fs::path dir;
  fs::path log;
  int threads = 1;
  bool data_ok = false;
};

fs::path data_dir(const fs::path& root) { return root / "data"; }

bool make_data(const fs::path& root) {
  const auto d = data_dir(root);
  const auto log = root / "data.log";
  return cli("demo-synth --out-dir " + q(d / "train") + " --images 200 --seed 11", log) &&
         cli("demo-synth --out-dir " + q(d / "test") + " --images 100 --seed 12", log) &&
         cli("synth-filters --seed 1 --count 8 --size 5 --out " + q(d / "bank.cfbk"), log);
}

std::vector<EvalImage> load_eval(const fs::path& proposals, const fs::path& manifest) {
  const auto pf = io::read_proposals(proposals);
  std::vector<EvalImage> out;
  for (const auto& e : io::read_manifest(manifest).entries) {
    EvalImage im;
    im.id = e.image_id;
    im.truths = io::load_voc_xml(e.annotation).boxes;
    if (const auto* b = pf.find(e.image_id)) im.proposals = *b;
    out.push_back(std::move(im));
  }
  return out;
}

// Mean over ground truths of the best IoU any proposal of its image reaches.
double mean_best_iou(const std::vector<EvalImage>& images) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& im : images)
    for (const auto& g : im.truths) {
      double best = 0;
      for (const auto& p : im.proposals) best = std::max(best, iou(p.box, g));
      sum += best;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

Outcome end_to_end(const fs::path& root, const fs::path& run, int threads) {
  const auto d = data_dir(root);
  const auto log = run / "run.log";
  const std::string th = " --threads " + std::to_string(threads);
  const std::string bank = " --bank " + q(d / "bank.cfbk");
  const bool ran =
      cli("train --manifest " + q(d / "train/manifest.txt") + bank + " --out-model " + q(run / "model.json") +
              " --d 25 --shrink 2 --S 8 --R 3 --trees 512 --neg 4000 --bootstrap 1 --seed 1" + th,
          log) &&
      cli("propose --manifest " + q(d / "test/manifest.txt") + bank + " --model " + q(run / "model.json") +
              " --S 8 --R 3 --U 0.63 --V 0.90 --max 1000 --out " + q(run / "proposals.txt") + th,
          log) &&
      cli("eval --proposals " + q(run / "proposals.txt") + " --manifest " + q(d / "test/manifest.txt") +
              " --budgets 10,100,1000 --out-csv " + q(run / "report.csv") + " --out-svg " + q(run / "report.svg") + th,
          log);
  if (!ran) return {false, "pipeline failed, see " + log.string()};
  const auto t = io::parse_report_csv(io::read_file(run / "report.csv"));
  auto at = [&](double th_) {
    for (const auto& [x, r] : t.curve)
      if (std::abs(x - th_) < 1e-9) return r;
    return -1.0;
  };
  const double r5 = at(0.5), r65 = at(0.65), r8 = at(0.8);
  const double a = std::stod(t.meta.get("auc").value_or("-1"));
  const bool ok = r5 >= 0.90 && r8 <= r65 && r65 <= r5 && a > 0 && a < 1;
  return {ok, "recall@0.5 " + fmt(r5) + ", @0.65 " + fmt(r65) + ", @0.8 " + fmt(r8) + ", AUC " + fmt(a)};
}

Outcome regression(const fs::path& root, const fs::path& run, int threads, double* gain = nullptr) {
  const auto d = data_dir(root);
  const auto log = run / "run.log";
  const std::string th = " --threads " + std::to_string(threads);
  const std::string bank = " --bank " + q(d / "bank.cfbk");
  const auto train = d / "train/manifest.txt", test = d / "test/manifest.txt";
  bool ran = cli("demo-jitter --manifest " + q(train) + " --out " + q(run / "jitter_train.txt") + " --seed 21", log) &&
             cli("demo-jitter --manifest " + q(test) + " --out " + q(run / "jitter_test.txt") + " --seed 22", log);
  for (const char* lambda : {"1000", "1e12"}) {
    const std::string tag = lambda;
    ran = ran &&
          cli("regress-fit --proposals " + q(run / "jitter_train.txt") + " --manifest " + q(train) + bank +
                  " --lambda " + tag + " --out " + q(run / ("regressor_" + tag + ".json")) + th,
              log) &&
          cli("refine --proposals " + q(run / "jitter_test.txt") + " --manifest " + q(test) + bank + " --regressor " +
                  q(run / ("regressor_" + tag + ".json")) + " --out " + q(run / ("refined_" + tag + ".txt")) + th,
              log);
  }
  if (!ran) return {false, "pipeline failed, see " + log.string()};
  const double before = mean_best_iou(load_eval(run / "jitter_test.txt", test));
  const double after = mean_best_iou(load_eval(run / "refined_1000.txt", test));
  const double limit = mean_best_iou(load_eval(run / "refined_1e12.txt", test));
  if (gain) *gain = after - before;
  const bool ok = after > before && std::abs(limit - before) < 0.01;
  return {ok, "mean best IoU " + fmt(before) + " -> " + fmt(after) + " (lambda 1000), " + fmt(limit) +
                  " (lambda 1e12, change " + fmt(limit - before, 3) + ")"};
}

Outcome eval_self_consistency() {
  convboost::Rng rng(1006);
  std::vector<EvalImage> images;
  for (int i = 0; i < 20; ++i) {
    EvalImage im;
    im.id = std::to_string(i);
    const int n = static_cast<int>(rng.uniform_int(1, 5));
    for (int k = 0; k < n; ++k) {
      const Box b = testing_support::random_int_box(rng, 300, 120);
      im.truths.push_back(b);
      im.proposals.push_back({b, rng.uniform()});
    }
    images.push_back(std::move(im));
  }
  const auto c = recall_curve(images, default_iou_grid());
  std::size_t not_one = 0;
  for (double r : c.recall)
    if (r != 1.0) ++not_one;
  const double a = auc(c);
  RecallCurve lin;
  lin.thresholds = default_iou_grid();
  for (double t : lin.thresholds) lin.recall.push_back(2.0 * (1.0 - t));
  const double al = auc(lin);
  const bool ok = c.recall.size() == 21 && not_one == 0 && std::abs(a - 1.0) <= 1e-12 && std::abs(al - 0.5) <= 1e-12;
  return {ok, "thresholds below 1.0 recall " + std::to_string(not_one) + "/" + std::to_string(c.recall.size()) +
                  ", GT AUC " + fmt(a, 17) + ", linear AUC " + fmt(al, 17)};
}

Outcome determinism(const fs::path& one, const fs::path& eight) {
  const char* files[] = {"model.json",        "proposals.txt",          "report.csv",         "report.svg",
                         "jitter_train.txt",  "jitter_test.txt",        "regressor_1000.json", "regressor_1e12.json",
                         "refined_1000.txt",  "refined_1e12.txt"};
  std::vector<std::string> differ;
  for (const char* f : files) {
    std::error_code ec;
    if (!fs::exists(one / f, ec) || !fs::exists(eight / f, ec) || io::read_file(one / f) != io::read_file(eight / f))
      differ.emplace_back(f);
  }
  std::string detail = std::to_string(std::size(files) - differ.size()) + "/" + std::to_string(std::size(files)) +
                       " files byte-identical at --threads 1 vs 8";
  for (const auto& f : differ) detail += "; differs: " + f;
  return {differ.empty(), detail};
}

Outcome budget_curve(const fs::path& root, const fs::path& run) {
  const auto t = io::parse_report_csv(io::read_file(run / "report.csv"));
  bool ok = !t.budgets.empty() && !t.curve.empty();
  for (std::size_t i = 1; i < t.budgets.size(); ++i) ok = ok && t.budgets[i].second >= t.budgets[i - 1].second;
  // Second route: recompute from the proposal file with the library.
  const auto images = load_eval(run / "proposals.txt", data_dir(root) / "test/manifest.txt");
  const std::vector<std::size_t> budgets{1, 10, 100, 300, 1000};
  const auto rc = recall_vs_count(images, budgets);
  for (std::size_t i = 1; i < rc.size(); ++i) ok = ok && rc[i].second >= rc[i - 1].second;
  const double full = recall_at(images, 0.5);
  ok = ok && rc.back().second == full && t.budgets.back().second == t.curve.front().second &&
       t.curve.front().second == full;
  std::string detail = "recall@0.5 by budget:";
  for (const auto& [b, r] : rc) detail += " " + std::to_string(b) + "=" + fmt(r);
  detail += ", full " + fmt(full);
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::create_directories(root);
  const fs::path run1 = root / "threads1", run8 = root / "threads8";
  fs::create_directories(run1);
  fs::create_directories(run8);
  set_log_sink([](LogLevel, std::string_view) {});

  int failures = 0;
  auto report = [&](int id, const char* name, double limit_s, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = o.pass;
    std::string time_note = fmt(secs, 3) + " s";
    if (limit_s > 0) {
      time_note += " (limit " + fmt(limit_s, 4) + " s)";
      if (secs >= limit_s) pass = false;
    }
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << o.detail << " ["
              << time_note << "]" << std::endl;
  };

  report(1, "geometry oracles", 10, geometry_oracles);
  report(2, "boosting oracle", 60, boosting_oracle);
  report(3, "channel properties", 30, channel_properties);

  const bool data_ok = make_data(root);
  if (!data_ok) std::cout << "note: synthetic data generation failed, see " << (root / "data.log").string() << "\n";
  report(4, "end-to-end synthetic benchmark", 15 * 60, [&] { return end_to_end(root, run1, 1); });
  report(5, "regression efficacy", 120, [&] { return regression(root, run1, 1); });
  report(6, "evaluation self-consistency", 0, eval_self_consistency);
  report(7, "determinism across thread counts", 0, [&] {
    const auto e = end_to_end(root, run8, 8);
    const auto r = regression(root, run8, 8);
    if (e.detail.find("failed") != std::string::npos || r.detail.find("failed") != std::string::npos)
      return Outcome{false, "threads 8 rerun failed: " + e.detail + "; " + r.detail};
    return determinism(run1, run8);
  });
  report(8, "budget curve", 0, [&] { return budget_curve(root, run1); });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
