#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "convboost/boost.hpp"
#include "convboost/error.hpp"
#include "convboost/io/files.hpp"
#include "convboost/io/metadata.hpp"
#include "convboost/regress.hpp"

// JSON documents for boosted models and box regressors. Doubles are written
// with shortest round-trip precision; float thresholds widen exactly.
namespace convboost::io {

inline constexpr int kModelVersion = 1;
inline constexpr int kRegressorVersion = 1;

namespace detail {

using Json = nlohmann::ordered_json;

inline Json metadata_json(const Metadata& meta) {
  Json j = Json::object();
  for (const auto& [k, v] : meta.entries) j[k] = v;
  return j;
}

inline Metadata metadata_from(const Json& j) {
  Metadata m;
  if (j.contains("meta") && j["meta"].is_object())
    for (const auto& [k, v] : j["meta"].items()) m.set(k, v.is_string() ? v.get<std::string>() : v.dump());
  return m;
}

inline Json parse_json(std::string_view doc, const char* kind) {
  try {
    return Json::parse(doc);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed ") + kind + " file: " + e.what());
  }
}

inline void check_kind(const Json& j, const char* format, int version, const char* kind) {
  if (!j.is_object() || !j.contains("format") || j["format"] != format)
    throw FormatError(std::string("not a ") + kind + " file (format tag missing or wrong)");
  if (j.value("version", -1) != version)
    throw FormatError(std::string("unsupported ") + kind + " file version");
}

template <class F>
auto guarded(const char* kind, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed ") + kind + " file: " + e.what());
  }
}

}  // namespace detail

inline std::string format_model(const BoostedModel& m, const Metadata& meta = {}) {
  detail::Json j;
  j["format"] = "convboost-model";
  j["version"] = kModelVersion;
  j["d"] = m.d;
  j["F"] = m.channels;
  j["shrink"] = m.shrink;
  j["bank_fingerprint"] = m.bank_fingerprint;
  j["training"] = {{"rounds", m.meta.rounds},
                   {"positives", m.meta.positives},
                   {"negatives", m.meta.negatives},
                   {"bootstrap_rounds", m.meta.bootstrap_rounds},
                   {"seed", m.meta.seed}};
  j["meta"] = detail::metadata_json(meta);
  j["tree_count"] = m.trees.size();
  auto trees = detail::Json::array();
  for (const auto& t : m.trees)
    trees.push_back({t.root.feature, static_cast<double>(t.root.threshold), t.left.feature,
                     static_cast<double>(t.left.threshold), t.right.feature,
                     static_cast<double>(t.right.threshold), t.leaves[0], t.leaves[1], t.leaves[2],
                     t.leaves[3]});
  j["trees"] = std::move(trees);
  return j.dump(1) + "\n";
}

inline BoostedModel parse_model(std::string_view doc, Metadata* meta = nullptr) {
  const auto j = detail::parse_json(doc, "model");
  detail::check_kind(j, "convboost-model", kModelVersion, "model");
  return detail::guarded("model", [&] {
    BoostedModel m;
    m.d = j.at("d").get<int>();
    m.channels = j.at("F").get<int>();
    m.shrink = j.at("shrink").get<int>();
    m.bank_fingerprint = j.at("bank_fingerprint").get<std::string>();
    if (m.d < 1 || m.channels < 1 || m.shrink < 1) throw FormatError("model has non-positive d, F or shrink");
    const auto& tr = j.at("training");
    m.meta.rounds = tr.at("rounds").get<int>();
    m.meta.positives = tr.at("positives").get<std::size_t>();
    m.meta.negatives = tr.at("negatives").get<std::size_t>();
    m.meta.bootstrap_rounds = tr.at("bootstrap_rounds").get<int>();
    m.meta.seed = tr.at("seed").get<std::uint64_t>();
    const auto& trees = j.at("trees");
    if (!trees.is_array() || trees.size() != j.at("tree_count").get<std::size_t>())
      throw FormatError("model tree_count does not match the tree array");
    const std::size_t dim = m.dim();
    for (std::size_t i = 0; i < trees.size(); ++i) {
      const auto& a = trees[i];
      if (!a.is_array() || a.size() != 10)
        throw FormatError("model tree " + std::to_string(i) + " must have 10 entries");
      DepthTwoTree t;
      Split* splits[3] = {&t.root, &t.left, &t.right};
      for (int s = 0; s < 3; ++s) {
        const auto f = a[static_cast<std::size_t>(2 * s)].get<std::uint64_t>();
        if (f >= dim) throw FormatError("model tree " + std::to_string(i) + " uses feature out of range");
        splits[s]->feature = static_cast<std::uint32_t>(f);
        const double thr = a[static_cast<std::size_t>(2 * s + 1)].get<double>();
        splits[s]->threshold = static_cast<float>(thr);
        if (static_cast<double>(splits[s]->threshold) != thr)
          throw FormatError("model tree " + std::to_string(i) + " threshold is not a float32 value");
      }
      for (int k = 0; k < 4; ++k) {
        t.leaves[static_cast<std::size_t>(k)] = a[static_cast<std::size_t>(6 + k)].get<double>();
        if (!std::isfinite(t.leaves[static_cast<std::size_t>(k)]))
          throw FormatError("model tree " + std::to_string(i) + " has a non-finite leaf");
      }
      m.trees.push_back(t);
    }
    if (meta) *meta = detail::metadata_from(j);
    return m;
  });
}

inline void save_model(const BoostedModel& m, const std::filesystem::path& path,
                       const Metadata& meta = {}) {
  write_file(path, format_model(m, meta));
}

inline BoostedModel load_model(const std::filesystem::path& path, Metadata* meta = nullptr) {
  try {
    return parse_model(read_file(path), meta);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline std::string format_regressor(const RegressorModel& r, const Metadata& meta = {}) {
  detail::Json j;
  j["format"] = "convboost-regressor";
  j["version"] = kRegressorVersion;
  j["lambda"] = r.lambda;
  j["d"] = r.d;
  j["F"] = r.channels;
  j["shrink"] = r.shrink;
  j["S"] = r.S;
  j["R"] = r.R;
  j["bank_fingerprint"] = r.bank_fingerprint;
  j["meta"] = detail::metadata_json(meta);
  j["mean"] = r.mean;
  j["scale"] = r.scale;
  j["bias"] = r.bias;
  j["weights"] = {r.weights[0], r.weights[1], r.weights[2], r.weights[3]};
  return j.dump() + "\n";
}

inline RegressorModel parse_regressor(std::string_view doc, Metadata* meta = nullptr) {
  const auto j = detail::parse_json(doc, "regressor");
  detail::check_kind(j, "convboost-regressor", kRegressorVersion, "regressor");
  return detail::guarded("regressor", [&] {
    RegressorModel r;
    r.lambda = j.at("lambda").get<double>();
    r.d = j.at("d").get<int>();
    r.channels = j.at("F").get<int>();
    r.shrink = j.at("shrink").get<int>();
    r.S = j.at("S").get<int>();
    r.R = j.at("R").get<int>();
    r.bank_fingerprint = j.at("bank_fingerprint").get<std::string>();
    r.mean = j.at("mean").get<std::vector<double>>();
    r.scale = j.at("scale").get<std::vector<double>>();
    const auto bias = j.at("bias").get<std::vector<double>>();
    const auto& w = j.at("weights");
    if (bias.size() != 4 || !w.is_array() || w.size() != 4)
      throw FormatError("regressor needs four bias values and four weight vectors");
    for (std::size_t k = 0; k < 4; ++k) {
      r.bias[k] = bias[k];
      r.weights[k] = w[k].get<std::vector<double>>();
      if (r.weights[k].size() != r.mean.size())
        throw FormatError("regressor weight vector length differs from the normalization vectors");
    }
    if (r.scale.size() != r.mean.size())
      throw FormatError("regressor mean and scale vectors differ in length");
    for (double s : r.scale)
      if (!(s > 0)) throw FormatError("regressor scale entries must be positive");
    if (meta) *meta = detail::metadata_from(j);
    return r;
  });
}

inline void save_regressor(const RegressorModel& r, const std::filesystem::path& path,
                           const Metadata& meta = {}) {
  write_file(path, format_regressor(r, meta));
}

inline RegressorModel load_regressor(const std::filesystem::path& path, Metadata* meta = nullptr) {
  try {
    return parse_regressor(read_file(path), meta);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace convboost::io
