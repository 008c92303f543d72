#include "saeda/dataset.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "saeda/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace saeda {

const char* split_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::source:
      return "source";
    case SplitTag::target_labeled:
      return "target_labeled";
    case SplitTag::target_unlabeled:
      return "target_unlabeled";
  }
  return "?";
}

SplitTag split_from_name(const std::string& name) {
  if (name == "source") return SplitTag::source;
  if (name == "target_labeled") return SplitTag::target_labeled;
  if (name == "target_unlabeled") return SplitTag::target_unlabeled;
  fail(ErrCode::bad_config, "unknown split tag '" + name + "'");
}

void Dataset::check() const {
  if ((size_t)n * dim() != samples.size())
    fail(ErrCode::size_mismatch, "dataset: sample buffer size disagrees with n * shape");
  if (has_labels() && (int)labels.size() != n)
    fail(ErrCode::size_mismatch, "dataset: label count disagrees with sample count");
  if (has_targets() && (int)targets.size() != n)
    fail(ErrCode::size_mismatch, "dataset: target count disagrees with sample count");
  for (float v : samples)
    if (!(v >= 0.f && v <= 1.f))
      fail(ErrCode::value_error, "dataset: sample value outside [0,1]");
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  dataset.check();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrCode::io_error, "save_dataset: cannot create " + dir);

  json manifest;
  manifest["format_version"] = 1;
  manifest["split"] = split_name(dataset.split);
  manifest["num_samples"] = dataset.n;
  manifest["shape"] = {dataset.shape.h, dataset.shape.w, dataset.shape.c};
  manifest["dtype"] = "f32le";
  manifest["labels"] = dataset.has_labels() ? json(dataset.labels) : json(nullptr);
  if (dataset.has_targets()) {
    // stored as doubles: float -> double -> float round-trips exactly
    json t = json::array();
    for (float v : dataset.targets) t.push_back((double)v);
    manifest["targets"] = t;
  } else {
    manifest["targets"] = nullptr;
  }
  manifest["class_names"] = dataset.class_names;

  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) fail(ErrCode::io_error, "save_dataset: cannot write manifest in " + dir);
  mf << manifest.dump(2) << "\n";
  mf.close();

  std::ofstream sf(fs::path(dir) / "samples.f32", std::ios::binary);
  if (!sf) fail(ErrCode::io_error, "save_dataset: cannot write samples.f32 in " + dir);
  sf.write(reinterpret_cast<const char*>(dataset.samples.data()),
           (std::streamsize)(dataset.samples.size() * sizeof(float)));
}

Dataset load_dataset(const std::string& dir) {
  fs::path mpath = fs::path(dir) / "manifest.json";
  if (!fs::exists(mpath))
    fail(ErrCode::missing_manifest, "load_dataset: no manifest.json in " + dir);
  std::ifstream mf(mpath);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    fail(ErrCode::io_error, std::string("load_dataset: manifest parse failure: ") + e.what());
  }
  if (manifest.value("format_version", -1) != 1)
    fail(ErrCode::bad_version, "load_dataset: unknown format_version in " + dir);
  if (manifest.value("dtype", "") != "f32le")
    fail(ErrCode::bad_version, "load_dataset: unsupported dtype '" +
                                   manifest.value("dtype", "") + "' (expected f32le)");

  Dataset d;
  d.split = split_from_name(manifest.at("split").get<std::string>());
  d.n = manifest.at("num_samples").get<int>();
  auto sh = manifest.at("shape");
  d.shape = {sh.at(0).get<int>(), sh.at(1).get<int>(), sh.at(2).get<int>()};
  if (!manifest.at("labels").is_null()) d.labels = manifest.at("labels").get<std::vector<int>>();
  if (!manifest.at("targets").is_null()) {
    for (const auto& v : manifest.at("targets")) d.targets.push_back((float)v.get<double>());
  }
  if (manifest.contains("class_names") && !manifest.at("class_names").is_null())
    d.class_names = manifest.at("class_names").get<std::vector<std::string>>();

  fs::path spath = fs::path(dir) / "samples.f32";
  if (!fs::exists(spath))
    fail(ErrCode::size_mismatch, "load_dataset: samples.f32 missing in " + dir);
  const size_t expect = (size_t)d.n * d.dim() * sizeof(float);
  if (fs::file_size(spath) != expect)
    fail(ErrCode::size_mismatch,
         "load_dataset: samples.f32 holds " + std::to_string(fs::file_size(spath)) +
             " bytes but the manifest declares " + std::to_string(expect));
  d.samples.resize((size_t)d.n * d.dim());
  std::ifstream sf(spath, std::ios::binary);
  sf.read(reinterpret_cast<char*>(d.samples.data()), (std::streamsize)expect);
  if (!sf) fail(ErrCode::io_error, "load_dataset: short read from samples.f32");

  d.check();
  return d;
}

} // namespace saeda
