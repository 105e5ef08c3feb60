// convboost command-line front end.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "convboost/convboost.hpp"

namespace fs = std::filesystem;
using namespace convboost;

namespace {

// Invalid flag combinations detected after parsing; exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kCommands[] = {"synth-filters", "train",     "propose",    "regress-fit",
                                     "refine",        "eval",      "demo-synth", "demo-jitter"};

// Reads "key = value" lines ('#' starts a comment) into "--key=value" args.
std::vector<std::string> config_args(const fs::path& path) {
  std::vector<std::string> out;
  const std::string doc = io::read_file(path);
  for (const auto& [no, raw] : io::text::lines(doc)) {
    auto line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = io::text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || io::text::trim(line.substr(0, eq)).empty())
      throw UsageError(path.string() + " line " + std::to_string(no) + ": expected key = value");
    std::string key(io::text::trim(line.substr(0, eq)));
    std::string value(io::text::trim(line.substr(eq + 1)));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.rfind("--", 0) != 0) key = "--" + key;
    out.push_back(key + "=" + value);
  }
  return out;
}

// Splices config-file settings in front of the command's own flags, so
// flags given on the command line take precedence.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::size_t cmd = args.size();
  for (std::size_t i = 1; i < args.size(); ++i)
    if (std::find(std::begin(kCommands), std::end(kCommands), args[i]) != std::end(kCommands)) {
      cmd = i;
      break;
    }
  if (cmd == args.size()) return args;
  std::optional<fs::path> config;
  for (std::size_t i = cmd + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (!config || !fs::is_regular_file(*config)) return args;  // CLI11 reports a missing file
  auto extra = config_args(*config);
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(cmd) + 1, extra.begin(), extra.end());
  return args;
}

std::string fingerprint_file(const fs::path& p) { return io::content_fingerprint(io::read_file(p)); }

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : io::text::split(s, ',')) {
    const auto t = io::text::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

io::Metadata base_meta(const std::string& command, std::uint64_t seed) {
  io::Metadata m;
  m.set("tool", io::kToolVersion);
  m.set("command", command);
  m.set("seed", std::to_string(seed));
  return m;
}

void require_images(const Dataset& ds, const fs::path& manifest) {
  if (ds.size() == 0) throw Error("no images in manifest " + manifest.string());
}

// ---------------------------------------------------------------------------

struct SynthFiltersArgs {
  std::uint64_t seed = 0;
  int count = 96;
  int size = 7;
  int channels = 3;
  fs::path out;
};

int run_synth_filters(const SynthFiltersArgs& a) {
  if (a.size % 2 == 0) throw UsageError("--size must be odd");
  const FilterBank bank = synth_filter_bank(a.seed, a.count, a.size, a.size, a.channels);
  io::save_filter_bank(bank, a.out);
  const FilterBank stored = io::load_filter_bank(a.out);
  std::cout << "wrote " << a.out.string() << ": F=" << stored.filters << " cin=" << stored.cin
            << " kernel=" << stored.kh << "x" << stored.kw << " fingerprint=" << io::bank_fingerprint(stored)
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  fs::path manifest, bank, out_model;
  int d = 25;
  int trees = 2048;
  std::size_t neg = 20000;
  int bootstrap = 3;
  std::uint64_t seed = 0;
  int shrink = 4;
  int S = 12;
  int R = 3;
  double band_margin = 0.0;
  double neg_max_side_frac = 1.0;
  bool exclude_difficult = false;
  int threads = 1;
};

int run_train(const TrainArgs& a) {
  if (a.R % 2 == 0) throw UsageError("--R must be odd");
  const FilterBank bank = io::load_filter_bank(a.bank);
  const Dataset ds = load_dataset(a.manifest, a.threads);
  require_images(ds, a.manifest);
  const TrainingImages data = training_images(ds, bank.cin, !a.exclude_difficult, a.threads);

  TrainOptions opt;
  opt.window = {a.d, a.shrink, a.S, a.R, a.band_margin};
  opt.sample.neg_per_round = a.neg;
  opt.sample.bootstrap_rounds = a.bootstrap;
  opt.sample.rng_seed = a.seed;
  opt.sample.max_side_frac = a.neg_max_side_frac;
  opt.trees = a.trees;
  opt.threads = a.threads;

  const BoostedModel model = train_detector(data, bank, opt, [](const TrainRoundReport& r) {
    std::cout << "round " << r.round << ": positives " << r.positives << ", negative pool " << r.negatives;
    if (r.round > 0) std::cout << " (+" << r.mined << " mined)";
    std::cout << ", training error " << percent(r.train_error) << "%" << std::endl;
  });

  io::Metadata meta = base_meta("train", a.seed);
  meta.set("bank", io::bank_fingerprint(bank));
  meta.set("manifest", fingerprint_file(a.manifest));
  meta.set("S", std::to_string(a.S));
  meta.set("R", std::to_string(a.R));
  io::save_model(model, a.out_model, meta);
  std::cout << "wrote " << a.out_model.string() << " (" << model.trees.size() << " trees)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ProposeArgs {
  fs::path manifest, bank, out;
  std::string models;
  int S = 12;
  int R = 3;
  double U = 0.63;
  double V = 0.90;
  std::size_t max = 10000;
  int stride = 1;
  int threads = 1;
};

int run_propose(const ProposeArgs& a) {
  if (a.R % 2 == 0) throw UsageError("--R must be odd");
  const auto model_paths = split_list(a.models);
  if (model_paths.empty()) throw UsageError("--model needs at least one path");
  for (const auto& p : model_paths)
    if (!fs::is_regular_file(p)) throw UsageError("--model: file does not exist: " + p);
  const FilterBank bank = io::load_filter_bank(a.bank);

  DetectorConfig cfg;
  cfg.S = a.S;
  cfg.R = a.R;
  cfg.U = a.U;
  cfg.V = a.V;
  cfg.max_proposals = a.max;
  cfg.stride_cells = a.stride;
  cfg.threads = 1;
  std::vector<std::string> model_fps;
  std::set<std::uint64_t> seeds;
  for (const auto& p : model_paths) {
    cfg.models.push_back(io::load_model(p));
    seeds.insert(cfg.models.back().meta.seed);
    model_fps.push_back(fingerprint_file(p));
  }
  cfg.validate();
  try {
    check_models_against_bank(cfg.models, bank);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + " (bank file " + a.bank.string() + ", models " + a.models + ")");
  }

  const Dataset ds = load_dataset(a.manifest, a.threads);
  require_images(ds, a.manifest);
  io::ProposalFile pf;
  pf.images.resize(ds.size());
  // Images run in parallel, each detected single-threaded; results keep
  // manifest order.
  parallel_for(ds.size(), a.threads, [&](std::size_t i) {
    pf.images[i] = {ds.id(i), propose(ds.image(i, bank.cin), bank, cfg)};
  });

  std::string seed_list;
  for (auto s : seeds) seed_list += (seed_list.empty() ? "" : ",") + std::to_string(s);
  pf.meta = base_meta("propose", seeds.empty() ? 0 : *seeds.begin());
  pf.meta.set("seed", seed_list);
  pf.meta.set("bank", io::bank_fingerprint(bank));
  std::string fps;
  for (const auto& f : model_fps) fps += (fps.empty() ? "" : ",") + f;
  pf.meta.set("models", fps);
  pf.meta.set("manifest", fingerprint_file(a.manifest));
  std::ostringstream params;
  params << "S=" << a.S << " R=" << a.R << " U=" << a.U << " V=" << a.V << " max=" << a.max
         << " stride=" << a.stride;
  pf.meta.set("params", params.str());
  io::write_proposals(pf, a.out);

  std::size_t total = 0;
  for (const auto& im : pf.images) total += im.boxes.size();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", static_cast<double>(total) / static_cast<double>(ds.size()));
  std::cout << "images " << ds.size() << ", average proposals per image " << buf << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

// Proposals of every manifest image, empty for images the file omits.
std::vector<std::vector<ScoredBox>> proposals_by_image(const io::ProposalFile& pf, const Dataset& ds) {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < ds.size(); ++i) ids.insert(ds.id(i));
  for (const auto& im : pf.images)
    if (!ids.count(im.image_id))
      throw Error("proposals reference image '" + im.image_id + "' which is not in the manifest");
  std::vector<std::vector<ScoredBox>> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (const auto* boxes = pf.find(ds.id(i))) out[i] = *boxes;
  return out;
}

struct RegressFitArgs {
  fs::path proposals, manifest, bank, out;
  double lambda = 1000.0;
  int d = 25;
  int shrink = 4;
  int S = 12;
  int R = 3;
  bool exclude_difficult = false;
  int threads = 1;
};

int run_regress_fit(const RegressFitArgs& a) {
  if (a.R % 2 == 0) throw UsageError("--R must be odd");
  const FilterBank bank = io::load_filter_bank(a.bank);
  const Dataset ds = load_dataset(a.manifest, a.threads);
  require_images(ds, a.manifest);
  const io::ProposalFile pf = io::read_proposals(a.proposals);
  const auto props = proposals_by_image(pf, ds);
  std::vector<std::vector<Box>> truths(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) truths[i] = ds.truths(i, !a.exclude_difficult);

  const auto selected = select_pairs(props, truths);
  if (selected.empty())
    throw Error("no proposal reaches IoU " + io::text::format_double(kRegressionMinIou) +
                " with any ground truth; rerun propose with a larger --max budget");

  const WindowParams wp{a.d, a.shrink, a.S, a.R, 0.0};
  const std::size_t dim = static_cast<std::size_t>(a.d) * a.d * bank.filters;
  std::vector<std::vector<std::size_t>> by_image(ds.size());
  for (std::size_t k = 0; k < selected.size(); ++k) by_image[selected[k].image].push_back(k);
  std::vector<RegressionPair> pairs(selected.size());
  std::vector<char> ok(selected.size(), 0);
  parallel_for(ds.size(), a.threads, [&](std::size_t i) {
    if (by_image[i].empty()) return;
    const ImagePlanes img = ds.image(i, bank.cin);
    LevelCache cache(img, bank, wp);
    for (auto k : by_image[i]) {
      auto& pr = pairs[k];
      pr.proposal = props[i][selected[k].proposal].box;
      pr.truth = truths[i][selected[k].truth];
      pr.phi.assign(dim, 0.0f);
      ok[k] = describe_box(cache, pr.proposal, wp, pr.phi) ? 1 : 0;
    }
  });
  std::vector<RegressionPair> usable;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (ok[k]) usable.push_back(std::move(pairs[k]));
  if (usable.empty()) throw Error("every selected proposal was too small to describe");

  RegressorModel model = fit_regressor(usable, a.lambda);
  model.d = a.d;
  model.channels = bank.filters;
  model.shrink = a.shrink;
  model.S = a.S;
  model.R = a.R;
  model.bank_fingerprint = io::bank_fingerprint(bank);

  io::Metadata meta = base_meta("regress-fit", 0);
  if (auto s = pf.meta.get("seed")) meta.set("seed", *s);
  meta.set("bank", model.bank_fingerprint);
  meta.set("proposals", fingerprint_file(a.proposals));
  meta.set("manifest", fingerprint_file(a.manifest));
  meta.set("pairs", std::to_string(usable.size()));
  io::save_regressor(model, a.out, meta);
  std::cout << "fitted on " << usable.size() << " pairs (lambda " << io::text::format_double(a.lambda)
            << "), wrote " << a.out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct RefineArgs {
  fs::path proposals, manifest, bank, regressor, out;
  int threads = 1;
};

int run_refine(const RefineArgs& a) {
  const FilterBank bank = io::load_filter_bank(a.bank);
  const RegressorModel reg = io::load_regressor(a.regressor);
  const std::string fp = io::bank_fingerprint(bank);
  if (reg.bank_fingerprint != fp || reg.channels != bank.filters) {
    std::ostringstream os;
    os << "regressor " << a.regressor.string() << " expects F=" << reg.channels << " bank "
       << reg.bank_fingerprint << " but bank " << a.bank.string() << " has F=" << bank.filters << " and is "
       << fp;
    throw ConfigError(os.str());
  }
  const Dataset ds = load_dataset(a.manifest, a.threads);
  require_images(ds, a.manifest);
  const io::ProposalFile in = io::read_proposals(a.proposals);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.size(); ++i) index[ds.id(i)] = i;
  for (const auto& im : in.images)
    if (!index.count(im.image_id))
      throw Error("proposals reference image '" + im.image_id + "' which is not in the manifest");

  const WindowParams wp{reg.d, reg.shrink, reg.S, reg.R, 0.0};
  io::ProposalFile out;
  out.images = in.images;
  parallel_for(out.images.size(), a.threads, [&](std::size_t k) {
    auto& im = out.images[k];
    const ImagePlanes img = ds.image(index.at(im.image_id), bank.cin);
    LevelCache cache(img, bank, wp);
    std::vector<float> phi(reg.dim());
    for (auto& sb : im.boxes) {
      if (!describe_box(cache, sb.box, wp, phi)) continue;
      const Box r = clip_box(apply_regressor(reg, sb.box, phi), img.width(), img.height());
      if (r.valid()) sb.box = r;
    }
  });
  out.meta = base_meta("refine", 0);
  if (auto s = in.meta.get("seed")) out.meta.set("seed", *s);
  out.meta.set("bank", fp);
  out.meta.set("regressor", fingerprint_file(a.regressor));
  out.meta.set("proposals", fingerprint_file(a.proposals));
  out.meta.set("manifest", fingerprint_file(a.manifest));
  io::write_proposals(out, a.out);
  std::cout << "refined " << out.images.size() << " images, wrote " << a.out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  fs::path proposals, manifest, blacklist, out_csv, out_svg;
  std::string budgets = "10,100,1000,10000";
  bool exclude_difficult = false;
  int threads = 1;
};

int run_eval(const EvalArgs& a) {
  std::vector<std::size_t> budgets;
  for (const auto& b : split_list(a.budgets)) {
    std::size_t v = 0;
    if (!io::text::parse_size(b, v) || v == 0) throw UsageError("--budgets must list positive integers");
    budgets.push_back(v);
  }
  const Dataset ds = load_dataset(a.manifest, a.threads);
  require_images(ds, a.manifest);
  const io::ProposalFile pf = io::read_proposals(a.proposals);
  const auto props = proposals_by_image(pf, ds);
  std::vector<EvalImage> images(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) images[i] = {ds.id(i), ds.truths(i, !a.exclude_difficult), props[i]};

  std::size_t removed = 0;
  io::Metadata meta = base_meta("eval", 0);
  if (auto s = pf.meta.get("seed")) meta.set("seed", *s);
  meta.set("proposals", fingerprint_file(a.proposals));
  meta.set("manifest", fingerprint_file(a.manifest));
  if (!a.blacklist.empty()) {
    auto res = apply_blacklist(std::move(images), io::read_blacklist(a.blacklist));
    images = std::move(res.images);
    removed = res.removed;
    meta.set("blacklist", fingerprint_file(a.blacklist));
  }
  const auto grid = default_iou_grid();
  const EvalReport report = evaluate(images, grid, budgets, removed);

  io::write_file(a.out_csv, io::format_report_csv(report, meta));
  if (!a.out_svg.empty()) io::write_file(a.out_svg, io::format_report_svg(report, meta));

  char line[160];
  std::printf("images %zu (blacklisted %zu), ground truths %zu, avg proposals/image %.1f\n",
              report.images_evaluated, report.images_blacklisted, report.ground_truths,
              report.avg_proposals_per_image);
  std::printf("%-8s %8s %8s %8s\n", "AUC", "R@0.5", "R@0.65", "R@0.8");
  std::snprintf(line, sizeof line, "%-8.3f %8s %8s %8s", report.auc, percent(recall_at(images, 0.5)).c_str(),
                percent(recall_at(images, 0.65)).c_str(), percent(recall_at(images, 0.8)).c_str());
  std::printf("%s\n", line);
  for (const auto& [b, r] : report.recall_vs_count) std::printf("recall@0.5 with %zu proposals: %s\n", b, percent(r).c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct DemoSynthArgs {
  fs::path out_dir;
  int images = 50;
  std::uint64_t seed = 0;
  int threads = 1;
};

int run_demo_synth(const DemoSynthArgs& a) {
  const synth::SceneOptions opt;
  io::DatasetManifest manifest;
  manifest.entries.resize(static_cast<std::size_t>(a.images));
  const std::string stamp = std::string(io::kToolVersion) + " demo-synth seed=" + std::to_string(a.seed);
  parallel_for(manifest.entries.size(), a.threads, [&](std::size_t i) {
    const synth::Scene scene = synth::generate_scene(a.seed, i, opt);
    char name[32];
    std::snprintf(name, sizeof name, "img_%05zu", i);
    auto& e = manifest.entries[i];
    e.image_id = name;
    e.image = a.out_dir / "images" / (e.image_id + ".ppm");
    e.annotation = a.out_dir / "annotations" / (e.image_id + ".xml");
    io::write_file(e.image, io::encode_pnm(scene.image, stamp));
    io::Annotation ann;
    ann.image_id = e.image_id;
    ann.filename = e.image_id + ".ppm";
    ann.width = scene.image.width();
    ann.height = scene.image.height();
    for (const auto& o : scene.objects) {
      ann.boxes.push_back(o.box);
      ann.class_names.emplace_back(o.shape == synth::Shape::kRectangle ? "rectangle" : "ellipse");
      ann.difficult.push_back(false);
    }
    io::write_file(e.annotation, io::write_voc_xml(ann, stamp));
  });
  io::Metadata meta = base_meta("demo-synth", a.seed);
  meta.set("images", std::to_string(a.images));
  io::write_file(a.out_dir / "manifest.txt",
                 io::text::metadata_lines(meta) + io::format_manifest(manifest, a.out_dir));
  std::cout << "wrote " << a.images << " images to " << a.out_dir.string() << "\n";
  return 0;
}

// Proposals jittered around the ground truth: center offsets ~ N(0, sigma_center)
// in units of the box size and log-size offsets ~ N(0, sigma_scale).
struct DemoJitterArgs {
  fs::path manifest, out;
  int per_box = 4;
  std::uint64_t seed = 0;
  double sigma_center = 0.08;
  double sigma_scale = 0.10;
};

int run_demo_jitter(const DemoJitterArgs& a) {
  const Dataset ds = load_dataset(a.manifest);
  require_images(ds, a.manifest);
  io::ProposalFile pf;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Rng rng(mix_seed(a.seed, i));
    const auto& ann = ds.annotations[i];
    io::ImageProposals im{ds.id(i), {}};
    for (const auto& g : ds.truths(i)) {
      for (int k = 0; k < a.per_box; ++k) {
        const double cx = g.center_x() + rng.normal(0, a.sigma_center) * g.width();
        const double cy = g.center_y() + rng.normal(0, a.sigma_center) * g.height();
        const double w = g.width() * std::exp(rng.normal(0, a.sigma_scale));
        const double h = g.height() * std::exp(rng.normal(0, a.sigma_scale));
        Box b{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
        if (ann.width > 0 && ann.height > 0) b = clip_box(b, ann.width, ann.height);
        if (!b.valid()) continue;
        im.boxes.push_back({b, rng.uniform()});
      }
    }
    std::stable_sort(im.boxes.begin(), im.boxes.end(),
                     [](const ScoredBox& x, const ScoredBox& y) { return x.score > y.score; });
    pf.images.push_back(std::move(im));
  }
  pf.meta = base_meta("demo-jitter", a.seed);
  pf.meta.set("manifest", fingerprint_file(a.manifest));
  std::ostringstream params;
  params << "per_box=" << a.per_box << " sigma_center=" << a.sigma_center << " sigma_scale=" << a.sigma_scale;
  pf.meta.set("params", params.str());
  io::write_proposals(pf, a.out);
  std::cout << "wrote jittered proposals for " << pf.images.size() << " images to " << a.out.string() << "\n";
  return 0;
}

void add_common(CLI::App* cmd, int& threads) {
  cmd->add_option("--threads", threads, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--config", "key = value file; command-line flags take precedence")
      ->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense object proposals from boosted convolutional channel features"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  const int default_threads = default_thread_count();
  const auto positive = CLI::PositiveNumber;

  SynthFiltersArgs sf;
  int sf_threads = default_threads;
  auto* c_sf = app.add_subcommand("synth-filters", "write a synthesized filter bank (CFBK)");
  c_sf->add_option("--seed", sf.seed, "generator seed");
  c_sf->add_option("--count", sf.count, "number of filters F")->check(CLI::Range(2, 100000));
  c_sf->add_option("--size", sf.size, "odd kernel size")->check(CLI::Range(3, 99));
  c_sf->add_option("--channels", sf.channels, "input planes (1 or 3)")->check(CLI::IsMember({1, 3}));
  c_sf->add_option("--out", sf.out, "output CFBK file")->required();
  add_common(c_sf, sf_threads);

  TrainArgs tr;
  tr.threads = default_threads;
  auto* c_tr = app.add_subcommand("train", "train a boosted window classifier");
  c_tr->add_option("--manifest", tr.manifest)->required()->check(CLI::ExistingFile);
  c_tr->add_option("--bank", tr.bank)->required()->check(CLI::ExistingFile);
  c_tr->add_option("--out-model", tr.out_model)->required();
  c_tr->add_option("--d", tr.d, "window side in cells")->check(positive);
  c_tr->add_option("--trees", tr.trees, "boosting rounds T")->check(positive);
  c_tr->add_option("--neg", tr.neg, "negatives per round")->check(positive);
  c_tr->add_option("--bootstrap", tr.bootstrap, "hard-negative rounds")->check(CLI::NonNegativeNumber);
  c_tr->add_option("--seed", tr.seed, "sampling seed");
  c_tr->add_option("--shrink", tr.shrink, "channel aggregation factor")->check(positive);
  c_tr->add_option("--S", tr.S, "pyramid scales")->check(positive);
  c_tr->add_option("--R", tr.R, "pyramid aspect ratios (odd)")->check(positive);
  c_tr->add_option("--band-margin", tr.band_margin, "inward shrink of positives")->check(CLI::Range(0.0, 0.45));
  c_tr->add_option("--neg-max-side-frac", tr.neg_max_side_frac, "largest random negative")->check(positive);
  c_tr->add_flag("--exclude-difficult", tr.exclude_difficult, "drop objects flagged difficult");
  add_common(c_tr, tr.threads);

  ProposeArgs pr;
  pr.threads = default_threads;
  auto* c_pr = app.add_subcommand("propose", "generate proposals for every manifest image");
  c_pr->add_option("--manifest", pr.manifest)->required()->check(CLI::ExistingFile);
  c_pr->add_option("--bank", pr.bank)->required()->check(CLI::ExistingFile);
  c_pr->add_option("--model", pr.models, "model file(s), comma-separated")->required();
  c_pr->add_option("--out", pr.out)->required();
  c_pr->add_option("--S", pr.S)->check(positive);
  c_pr->add_option("--R", pr.R)->check(positive);
  c_pr->add_option("--U", pr.U, "per-group NMS threshold")->check(CLI::Range(1e-9, 1.0));
  c_pr->add_option("--V", pr.V, "joint NMS threshold")->check(CLI::Range(1e-9, 1.0));
  c_pr->add_option("--max", pr.max, "proposals per image")->check(positive);
  c_pr->add_option("--stride", pr.stride, "window stride in cells")->check(positive);
  add_common(c_pr, pr.threads);

  RegressFitArgs rf;
  rf.threads = default_threads;
  auto* c_rf = app.add_subcommand("regress-fit", "fit the box regressor");
  c_rf->add_option("--proposals", rf.proposals)->required()->check(CLI::ExistingFile);
  c_rf->add_option("--manifest", rf.manifest)->required()->check(CLI::ExistingFile);
  c_rf->add_option("--bank", rf.bank)->required()->check(CLI::ExistingFile);
  c_rf->add_option("--out", rf.out)->required();
  c_rf->add_option("--lambda", rf.lambda, "ridge regularization")->check(positive);
  c_rf->add_option("--d", rf.d)->check(positive);
  c_rf->add_option("--shrink", rf.shrink)->check(positive);
  c_rf->add_option("--S", rf.S)->check(positive);
  c_rf->add_option("--R", rf.R)->check(positive);
  c_rf->add_flag("--exclude-difficult", rf.exclude_difficult);
  add_common(c_rf, rf.threads);

  RefineArgs rr;
  rr.threads = default_threads;
  auto* c_rr = app.add_subcommand("refine", "apply the box regressor to proposals");
  c_rr->add_option("--proposals", rr.proposals)->required()->check(CLI::ExistingFile);
  c_rr->add_option("--manifest", rr.manifest)->required()->check(CLI::ExistingFile);
  c_rr->add_option("--bank", rr.bank)->required()->check(CLI::ExistingFile);
  c_rr->add_option("--regressor", rr.regressor)->required()->check(CLI::ExistingFile);
  c_rr->add_option("--out", rr.out)->required();
  add_common(c_rr, rr.threads);

  EvalArgs ev;
  ev.threads = default_threads;
  auto* c_ev = app.add_subcommand("eval", "recall against ground truth");
  c_ev->add_option("--proposals", ev.proposals)->required()->check(CLI::ExistingFile);
  c_ev->add_option("--manifest", ev.manifest)->required()->check(CLI::ExistingFile);
  c_ev->add_option("--blacklist", ev.blacklist)->check(CLI::ExistingFile);
  c_ev->add_option("--out-csv", ev.out_csv)->required();
  c_ev->add_option("--out-svg", ev.out_svg);
  c_ev->add_option("--budgets", ev.budgets, "comma-separated proposal budgets");
  c_ev->add_flag("--exclude-difficult", ev.exclude_difficult);
  add_common(c_ev, ev.threads);

  DemoSynthArgs ds;
  ds.threads = default_threads;
  auto* c_ds = app.add_subcommand("demo-synth", "generate a synthetic annotated dataset");
  c_ds->add_option("--out-dir", ds.out_dir)->required();
  c_ds->add_option("--images", ds.images)->check(positive);
  c_ds->add_option("--seed", ds.seed);
  add_common(c_ds, ds.threads);

  DemoJitterArgs dj;
  int dj_threads = default_threads;
  auto* c_dj = app.add_subcommand("demo-jitter", "write proposals jittered around the ground truth");
  c_dj->add_option("--manifest", dj.manifest)->required()->check(CLI::ExistingFile);
  c_dj->add_option("--out", dj.out)->required();
  c_dj->add_option("--per-box", dj.per_box)->check(positive);
  c_dj->add_option("--seed", dj.seed);
  c_dj->add_option("--sigma-center", dj.sigma_center)->check(CLI::NonNegativeNumber);
  c_dj->add_option("--sigma-scale", dj.sigma_scale)->check(CLI::NonNegativeNumber);
  add_common(c_dj, dj_threads);

  try {
    std::vector<std::string> args;
    try {
      args = expand_config(argc, argv);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
    std::vector<const char*> cargs;
    for (const auto& s : args) cargs.push_back(s.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_sf) return run_synth_filters(sf);
    if (*c_tr) return run_train(tr);
    if (*c_pr) return run_propose(pr);
    if (*c_rf) return run_regress_fit(rf);
    if (*c_rr) return run_refine(rr);
    if (*c_ev) return run_eval(ev);
    if (*c_ds) return run_demo_synth(ds);
    if (*c_dj) return run_demo_jitter(dj);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
