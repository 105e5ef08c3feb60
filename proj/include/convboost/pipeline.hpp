#pragma once

#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "convboost/boost.hpp"
#include "convboost/channels.hpp"
#include "convboost/error.hpp"
#include "convboost/geometry.hpp"
#include "convboost/image.hpp"
#include "convboost/io/cfbk.hpp"
#include "convboost/io/manifest.hpp"
#include "convboost/io/pnm.hpp"
#include "convboost/io/voc.hpp"
#include "convboost/parallel.hpp"
#include "convboost/sampler.hpp"

namespace convboost {

// Converts between gray and color so the image matches the bank's input
// planes: gray is replicated, color is reduced to Rec. 601 luma.
inline ImagePlanes match_planes(ImagePlanes img, int cin) {
  if (img.channels() == cin) return img;
  ImagePlanes out(img.width(), img.height(), cin);
  if (cin == 3) {
    for (int c = 0; c < 3; ++c) std::copy(img.plane(0).begin(), img.plane(0).end(), out.plane(c).begin());
  } else {
    const auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
    auto y = out.plane(0);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
  }
  return out;
}

// A manifest with its annotations parsed up front.
struct Dataset {
  io::DatasetManifest manifest;
  std::vector<io::Annotation> annotations;

  std::size_t size() const { return manifest.entries.size(); }
  const std::string& id(std::size_t i) const { return manifest.entries[i].image_id; }

  // Loads image i, checks it against its annotation, and matches `cin` planes.
  ImagePlanes image(std::size_t i, int cin) const {
    const auto& e = manifest.entries[i];
    ImagePlanes img = io::load_image(e.image);
    const auto& a = annotations[i];
    if (a.width > 0 && a.height > 0 && (a.width != img.width() || a.height != img.height())) {
      std::ostringstream os;
      os << e.annotation.string() << ": declared size " << a.width << "x" << a.height
         << " differs from image " << e.image.string() << " (" << img.width() << "x" << img.height() << ")";
      throw FormatError(os.str());
    }
    return match_planes(std::move(img), cin);
  }

  std::vector<Box> truths(std::size_t i, bool include_difficult = true) const {
    return annotations[i].training_boxes(include_difficult);
  }
};

inline Dataset load_dataset(const std::filesystem::path& manifest_path, int threads = 1) {
  Dataset ds;
  ds.manifest = io::read_manifest(manifest_path);
  ds.annotations.resize(ds.manifest.entries.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    ds.annotations[i] = io::load_voc_xml(ds.manifest.entries[i].annotation);
  });
  return ds;
}

// Adapts a dataset to the sampler's on-demand image source. Annotations
// without a declared size are sized by decoding their image once.
inline TrainingImages training_images(const Dataset& ds, int cin, bool include_difficult,
                                      int threads = 1) {
  TrainingImages t;
  t.annotations.resize(ds.size());
  t.sizes.resize(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    t.annotations[i] = ds.truths(i, include_difficult);
    const auto& a = ds.annotations[i];
    if (a.width > 0 && a.height > 0) {
      t.sizes[i] = {a.width, a.height};
    } else {
      const auto img = ds.image(i, cin);
      t.sizes[i] = {img.width(), img.height()};
    }
  });
  t.load = [&ds, cin](std::size_t i) { return ds.image(i, cin); };
  return t;
}

struct TrainOptions {
  WindowParams window;
  SampleSpec sample;
  int trees = 2048;
  int threads = 1;
};

struct TrainRoundReport {
  int round = 0;  // 0 is the initial training, then one per bootstrap round
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t mined = 0;  // hard negatives added before this round
  double train_error = 0;
};

namespace detail {

inline WeightedSet labeled_set(const DescriptorList& pos, const DescriptorList& neg) {
  WeightedSet set(pos.d, pos.channels);
  set.data.reserve((pos.data.size() + neg.data.size()));
  for (std::size_t i = 0; i < pos.size(); ++i) set.add(pos.row(i), 1);
  for (std::size_t i = 0; i < neg.size(); ++i) set.add(neg.row(i), -1);
  set.set_uniform_weights();
  return set;
}

}  // namespace detail

// Random negatives, boosting, then `bootstrap_rounds` rounds of
// hard-negative mining and retraining from scratch on the grown pool.
inline BoostedModel train_detector(const TrainingImages& data, const FilterBank& bank,
                                   const TrainOptions& opt,
                                   const std::function<void(const TrainRoundReport&)>& on_round = {}) {
  opt.sample.validate();
  if (opt.trees < 1) throw ArgumentError("trees must be >= 1");
  if (data.size() == 0) throw ArgumentError("no training images");
  const auto initial = collect_initial_samples(data, bank, opt.window, opt.sample, opt.threads);
  if (initial.positives.size() == 0)
    throw TrainingError("no positive descriptors could be extracted from the annotations");
  if (initial.negatives.size() == 0) throw TrainingError("no negative descriptors were sampled");
  if (initial.skipped_positives > 0) {
    std::ostringstream os;
    os << initial.skipped_positives << " annotations were too small to describe and were skipped";
    log_warning(os.str());
  }

  DescriptorList negatives = initial.negatives;
  std::size_t mined = 0;
  BoostedModel model;
  for (int round = 0;; ++round) {
    const WeightedSet set = detail::labeled_set(initial.positives, negatives);
    const FeatureBins fb = quantize_features(set, 256, opt.threads);
    TrainingHistory hist;
    model = adaboost_train(set, fb, {opt.trees, opt.threads}, &hist);
    if (on_round)
      on_round({round, set.count(1), set.count(-1), mined, hist.train_error.back()});
    if (round == opt.sample.bootstrap_rounds) break;

    model.shrink = opt.window.shrink;
    const HardNegatives hard = mine_hard_negatives(model, data, bank, opt.window, opt.sample, opt.threads);
    mined = hard.windows.size();
    negatives.data.insert(negatives.data.end(), hard.descriptors.data.begin(), hard.descriptors.data.end());
  }
  model.shrink = opt.window.shrink;
  model.bank_fingerprint = io::bank_fingerprint(bank);
  model.meta.bootstrap_rounds = opt.sample.bootstrap_rounds;
  model.meta.seed = opt.sample.rng_seed;
  return model;
}

}  // namespace convboost
