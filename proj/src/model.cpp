#include "saeda/model.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "saeda/errors.hpp"
#include "saeda/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace saeda {

// ===================================================================== specs

void validate(const AutoencoderSpec& spec) {
  const auto& s = spec.input_shape;
  if (s.h < 4 || s.w < 4)
    fail(ErrCode::bad_config, "autoencoder spec: input height/width must be >= 4 "
                              "(two 2x2 pooling stages)");
  if (s.h % 4 || s.w % 4)
    fail(ErrCode::bad_config, "autoencoder spec: input height/width must be divisible by 4 "
                              "so the mirrored decoder reproduces the input shape exactly");
  if (s.c < 1) fail(ErrCode::bad_config, "autoencoder spec: channels must be >= 1");
  if (spec.bottleneck_size < 1) fail(ErrCode::bad_config, "autoencoder spec: bottleneck must be >= 1");
  if (spec.conv1_filters < 1 || spec.conv2_filters < 1 || spec.conv1_kernel < 1 ||
      spec.conv2_kernel < 1)
    fail(ErrCode::bad_config, "autoencoder spec: conv sizes must be positive");
}

void validate(const HeadSpec& spec) {
  if (spec.kind == HeadSpec::Kind::softmax_classifier && spec.output_size < 2)
    fail(ErrCode::bad_config, "head spec: classifier needs output_size >= 2");
  if (spec.kind == HeadSpec::Kind::linear_regressor && spec.output_size != 1)
    fail(ErrCode::bad_config, "head spec: regressor output_size must be 1");
  for (int wdt : spec.hidden)
    if (wdt < 1) fail(ErrCode::bad_config, "head spec: hidden widths must be positive");
}

// =============================================================== autoencoder

Autoencoder build_autoencoder(const AutoencoderSpec& spec, uint64_t seed) {
  validate(spec);
  Autoencoder ae;
  ae.spec = spec;
  const int h = spec.input_shape.h, w = spec.input_shape.w, c = spec.input_shape.c;
  const int f1 = spec.conv1_filters, f2 = spec.conv2_filters;
  const int k1 = spec.conv1_kernel, k2 = spec.conv2_kernel;

  // one stream consumed in fixed construction order => deterministic builds
  rng::Rng r(rng::derive(seed, rng::tag("autoencoder-init")));

  ae.enc_conv1.init(h, w, c, f1, k1, k1, Act::relu, r);
  ae.pool1.init(h, w, f1);
  ae.enc_conv2.init(h / 2, w / 2, f1, f2, k2, k2, Act::relu, r);
  ae.pool2.init(h / 2, w / 2, f2);
  const int flat = (h / 4) * (w / 4) * f2;
  ae.enc_dense.init(flat, spec.bottleneck_size, Act::relu, r);

  // decoder: exact mirror, pooling replaced by upsampling
  ae.dec_dense.init(spec.bottleneck_size, flat, Act::relu, r);
  ae.up1.init(h / 4, w / 4, f2);
  ae.dec_conv1.init(h / 2, w / 2, f2, f1, k2, k2, Act::relu, r);
  ae.up2.init(h / 2, w / 2, f1);
  ae.dec_conv2.init(h, w, f1, c, k1, k1, Act::sigmoid, r);
  return ae;
}

Mat Autoencoder::encode(const float* x, int n) {
  auto& a1 = enc_conv1.forward(x, n);
  auto& p1 = pool1.forward(a1.data(), n);
  auto& a2 = enc_conv2.forward(p1.data(), n);
  auto& p2 = pool2.forward(a2.data(), n);
  auto& z = enc_dense.forward(p2.data(), n);
  Mat out(n, spec.bottleneck_size);
  out.data = z;
  return out;
}

Mat Autoencoder::encode(const Batch& batch) {
  if (!(batch.shape == spec.input_shape))
    fail(ErrCode::shape_mismatch, "encode: batch shape does not match the autoencoder spec");
  return encode(batch.data.data(), batch.n);
}

Batch Autoencoder::decode(const Mat& z) {
  if (z.cols != spec.bottleneck_size)
    fail(ErrCode::shape_mismatch, "decode: bottleneck width does not match the spec");
  auto& d = dec_dense.forward(z.data.data(), z.rows);
  auto& u1 = up1.forward(d.data(), z.rows);
  auto& c1 = dec_conv1.forward(u1.data(), z.rows);
  auto& u2 = up2.forward(c1.data(), z.rows);
  auto& out = dec_conv2.forward(u2.data(), z.rows);
  Batch recon(spec.input_shape, z.rows);
  recon.data = out;
  return recon;
}

const std::vector<float>& Autoencoder::forward(const float* x, int n) {
  auto& a1 = enc_conv1.forward(x, n);
  auto& p1 = pool1.forward(a1.data(), n);
  auto& a2 = enc_conv2.forward(p1.data(), n);
  auto& p2 = pool2.forward(a2.data(), n);
  auto& z = enc_dense.forward(p2.data(), n);
  bottleneck_ = Mat(n, spec.bottleneck_size);
  bottleneck_.data = z;

  auto& d = dec_dense.forward(z.data(), n);
  auto& u1 = up1.forward(d.data(), n);
  auto& c1 = dec_conv1.forward(u1.data(), n);
  auto& u2 = up2.forward(c1.data(), n);
  return dec_conv2.forward(u2.data(), n);
}

void Autoencoder::backward(const float* d_recon, const float* d_bneck_extra, int n) {
  auto& g1 = dec_conv2.backward(d_recon, n);
  auto& g2 = up2.backward(g1.data(), n);
  auto& g3 = dec_conv1.backward(g2.data(), n);
  auto& g4 = up1.backward(g3.data(), n);
  auto& g5 = dec_dense.backward(g4.data(), n);
  // g5 is the reconstruction path's gradient at the bottleneck; the
  // class-wise MMD contribution joins here.
  std::vector<float> d_z = g5;
  if (d_bneck_extra)
    for (size_t i = 0; i < d_z.size(); ++i) d_z[i] += d_bneck_extra[i];
  auto& g6 = enc_dense.backward(d_z.data(), n);
  auto& g7 = pool2.backward(g6.data(), n);
  auto& g8 = enc_conv2.backward(g7.data(), n);
  auto& g9 = pool1.backward(g8.data(), n);
  enc_conv1.backward(g9.data(), n);
}

void Autoencoder::step(const AdamParams& ap, int64_t t) {
  enc_conv1.step(ap, t);
  enc_conv2.step(ap, t);
  enc_dense.step(ap, t);
  dec_dense.step(ap, t);
  dec_conv1.step(ap, t);
  dec_conv2.step(ap, t);
}

std::vector<std::pair<std::string, std::vector<float>*>> Autoencoder::param_blocks() {
  return {
      {"enc_conv1.W", &enc_conv1.W}, {"enc_conv1.b", &enc_conv1.b},
      {"enc_conv2.W", &enc_conv2.W}, {"enc_conv2.b", &enc_conv2.b},
      {"enc_dense.W", &enc_dense.W}, {"enc_dense.b", &enc_dense.b},
      {"dec_dense.W", &dec_dense.W}, {"dec_dense.b", &dec_dense.b},
      {"dec_conv1.W", &dec_conv1.W}, {"dec_conv1.b", &dec_conv1.b},
      {"dec_conv2.W", &dec_conv2.W}, {"dec_conv2.b", &dec_conv2.b},
  };
}

size_t Autoencoder::param_count() {
  size_t total = 0;
  for (auto& [name, block] : param_blocks()) total += block->size();
  return total;
}

// ====================================================================== head

Head build_head(const HeadSpec& spec, int input_size, uint64_t seed) {
  validate(spec);
  Head head;
  head.spec = spec;
  head.input_size = input_size;
  head.reinit(seed);
  return head;
}

void Head::reinit(uint64_t seed) {
  rng::Rng r(rng::derive(seed, rng::tag("head-init")));
  layers.clear();
  int in = input_size;
  for (int width : spec.hidden) {
    Dense d;
    d.init(in, width, Act::relu, r);
    layers.push_back(std::move(d));
    in = width;
  }
  Dense out;
  out.init(in, spec.output_size, Act::none, r);
  layers.push_back(std::move(out));
}

void Head::reset_optimizer() {
  for (Dense& d : layers) {
    d.optW.init(d.W.size());
    d.optb.init(d.b.size());
  }
}

const std::vector<float>& Head::forward(const float* z, int n) {
  const float* cur = z;
  for (size_t i = 0; i < layers.size(); ++i) cur = layers[i].forward(cur, n).data();
  return layers.back().y;
}

Mat Head::probabilities(const float* z, int n) {
  if (spec.kind != HeadSpec::Kind::softmax_classifier)
    fail(ErrCode::kind_mismatch, "probabilities: head is not a classifier");
  const auto& logits = forward(z, n);
  Mat p(n, spec.output_size);
  softmax_rows(logits.data(), n, spec.output_size, p.data.data());
  return p;
}

void Head::backward(const float* d_out, int n) {
  const float* cur = d_out;
  for (size_t i = layers.size(); i-- > 0;) cur = layers[i].backward(cur, n).data();
}

void Head::step(const AdamParams& ap, int64_t t) {
  for (auto& l : layers) l.step(ap, t);
}

std::vector<std::pair<std::string, std::vector<float>*>> Head::param_blocks() {
  std::vector<std::pair<std::string, std::vector<float>*>> blocks;
  for (size_t i = 0; i < layers.size(); ++i) {
    blocks.emplace_back("layer" + std::to_string(i) + ".W", &layers[i].W);
    blocks.emplace_back("layer" + std::to_string(i) + ".b", &layers[i].b);
  }
  return blocks;
}

// ========================================================== adaptation model

AdaptationModel build_adaptation_model(const AutoencoderSpec& source_spec,
                                       const AutoencoderSpec& target_spec,
                                       const HeadSpec& head_spec, uint64_t seed) {
  if (source_spec.bottleneck_size != target_spec.bottleneck_size)
    fail(ErrCode::bad_config, "adaptation model: source and target bottleneck sizes must be "
                              "equal (the head is shared)");
  AdaptationModel m;
  m.seed = seed;
  m.source_ae = build_autoencoder(source_spec, rng::derive(seed, rng::tag("source-ae")));
  m.target_ae = build_autoencoder(target_spec, rng::derive(seed, rng::tag("target-ae")));
  m.head = build_head(head_spec, source_spec.bottleneck_size, seed);
  return m;
}

std::vector<std::pair<std::string, std::vector<float>*>> AdaptationModel::param_blocks() {
  std::vector<std::pair<std::string, std::vector<float>*>> blocks;
  for (auto& [name, p] : source_ae.param_blocks()) blocks.emplace_back("source." + name, p);
  for (auto& [name, p] : target_ae.param_blocks()) blocks.emplace_back("target." + name, p);
  for (auto& [name, p] : head.param_blocks()) blocks.emplace_back("head." + name, p);
  return blocks;
}

std::vector<float> AdaptationModel::snapshot_params() {
  std::vector<float> flat;
  for (auto& [name, p] : param_blocks()) flat.insert(flat.end(), p->begin(), p->end());
  return flat;
}

uint64_t AdaptationModel::param_hash() {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (auto& [name, p] : param_blocks()) {
    const unsigned char* bytes = reinterpret_cast<const unsigned char*>(p->data());
    for (size_t i = 0; i < p->size() * sizeof(float); ++i)
      h = (h ^ bytes[i]) * 0x100000001b3ULL;
  }
  return h;
}

// ================================================================= container

namespace {

json spec_to_json(const AutoencoderSpec& s) {
  return json{{"input_shape", {s.input_shape.h, s.input_shape.w, s.input_shape.c}},
              {"bottleneck_size", s.bottleneck_size},
              {"conv1_filters", s.conv1_filters},
              {"conv1_kernel", s.conv1_kernel},
              {"conv2_filters", s.conv2_filters},
              {"conv2_kernel", s.conv2_kernel}};
}

AutoencoderSpec spec_from_json(const json& j) {
  AutoencoderSpec s;
  auto sh = j.at("input_shape");
  s.input_shape = {sh.at(0).get<int>(), sh.at(1).get<int>(), sh.at(2).get<int>()};
  s.bottleneck_size = j.at("bottleneck_size").get<int>();
  s.conv1_filters = j.at("conv1_filters").get<int>();
  s.conv1_kernel = j.at("conv1_kernel").get<int>();
  s.conv2_filters = j.at("conv2_filters").get<int>();
  s.conv2_kernel = j.at("conv2_kernel").get<int>();
  return s;
}

std::string head_kind_name(HeadSpec::Kind k) {
  return k == HeadSpec::Kind::softmax_classifier ? "softmax_classifier" : "linear_regressor";
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

} // namespace

void save_model(AdaptationModel& model, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrCode::io_error, "save_model: cannot create " + dir);

  json manifest;
  manifest["format_version"] = 1;
  manifest["kind"] = "adaptation_model";
  manifest["source_spec"] = spec_to_json(model.source_ae.spec);
  manifest["target_spec"] = spec_to_json(model.target_ae.spec);
  manifest["head"] = {{"kind", head_kind_name(model.head.spec.kind)},
                      {"hidden", model.head.spec.hidden},
                      {"output_size", model.head.spec.output_size}};
  manifest["stages"] = {
      {"stage1", model.stage1_done}, {"stage2", model.stage2_done}, {"stage3", model.stage3_done}};
  manifest["seed"] = model.seed;
  manifest["target_norm"] = {{"mean", (double)model.target_mean},
                             {"scale", (double)model.target_scale}};
  json blocks = json::array();
  for (auto& [name, p] : model.param_blocks())
    blocks.push_back({{"name", name}, {"count", p->size()}});
  manifest["params"] = blocks;
  manifest["param_hash"] = hash_hex(model.param_hash());

  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) fail(ErrCode::io_error, "save_model: cannot write manifest in " + dir);
  mf << manifest.dump(2) << "\n";
  mf.close();

  std::ofstream pf(fs::path(dir) / "params.f32", std::ios::binary);
  if (!pf) fail(ErrCode::io_error, "save_model: cannot write params.f32 in " + dir);
  for (auto& [name, p] : model.param_blocks())
    pf.write(reinterpret_cast<const char*>(p->data()),
             (std::streamsize)(p->size() * sizeof(float)));
}

AdaptationModel load_model(const std::string& dir, const HeadSpec::Kind* expected_kind) {
  fs::path mpath = fs::path(dir) / "manifest.json";
  if (!fs::exists(mpath))
    fail(ErrCode::missing_manifest, "load_model: no manifest.json in " + dir);
  std::ifstream mf(mpath);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    fail(ErrCode::io_error, std::string("load_model: manifest parse failure: ") + e.what());
  }
  if (manifest.value("format_version", -1) != 1)
    fail(ErrCode::bad_version, "load_model: unknown format_version in " + dir);
  if (manifest.value("kind", "") != "adaptation_model")
    fail(ErrCode::kind_mismatch, "load_model: manifest is not an adaptation_model container");

  HeadSpec head_spec;
  const json& hj = manifest.at("head");
  std::string kind = hj.at("kind").get<std::string>();
  if (kind == "softmax_classifier")
    head_spec.kind = HeadSpec::Kind::softmax_classifier;
  else if (kind == "linear_regressor")
    head_spec.kind = HeadSpec::Kind::linear_regressor;
  else
    fail(ErrCode::kind_mismatch, "load_model: unknown head kind '" + kind + "'");
  if (expected_kind && *expected_kind != head_spec.kind)
    fail(ErrCode::kind_mismatch,
         "load_model: checkpoint head is a " + kind + " but a " +
             head_kind_name(*expected_kind) + " was requested");
  head_spec.hidden = hj.at("hidden").get<std::vector<int>>();
  head_spec.output_size = hj.at("output_size").get<int>();

  AdaptationModel model = build_adaptation_model(spec_from_json(manifest.at("source_spec")),
                                                 spec_from_json(manifest.at("target_spec")),
                                                 head_spec, manifest.value("seed", 0ULL));
  model.stage1_done = manifest.at("stages").value("stage1", false);
  model.stage2_done = manifest.at("stages").value("stage2", false);
  model.stage3_done = manifest.at("stages").value("stage3", false);
  if (manifest.contains("target_norm")) {
    model.target_mean = (float)manifest["target_norm"].value("mean", 0.0);
    model.target_scale = (float)manifest["target_norm"].value("scale", 1.0);
  }

  // block table must match what this build would produce
  auto blocks = model.param_blocks();
  const json& btab = manifest.at("params");
  if (btab.size() != blocks.size())
    fail(ErrCode::param_count, "load_model: parameter block count mismatch");
  size_t total = 0;
  for (size_t i = 0; i < blocks.size(); ++i) {
    if (btab.at(i).at("name").get<std::string>() != blocks[i].first ||
        btab.at(i).at("count").get<size_t>() != blocks[i].second->size())
      fail(ErrCode::param_count, "load_model: parameter block table mismatch at index " +
                                     std::to_string(i));
    total += blocks[i].second->size();
  }

  fs::path ppath = fs::path(dir) / "params.f32";
  if (!fs::exists(ppath)) fail(ErrCode::io_error, "load_model: params.f32 missing in " + dir);
  if (fs::file_size(ppath) != total * sizeof(float))
    fail(ErrCode::param_count,
         "load_model: params.f32 holds " + std::to_string(fs::file_size(ppath) / sizeof(float)) +
             " values, expected " + std::to_string(total));
  std::ifstream pf(ppath, std::ios::binary);
  for (auto& [name, p] : blocks)
    pf.read(reinterpret_cast<char*>(p->data()), (std::streamsize)(p->size() * sizeof(float)));
  if (!pf) fail(ErrCode::io_error, "load_model: short read from params.f32");

  std::string want_hash = manifest.value("param_hash", "");
  if (!want_hash.empty() && want_hash != hash_hex(model.param_hash()))
    fail(ErrCode::io_error, "load_model: checkpoint hash mismatch (corrupted parameters?)");
  return model;
}

} // namespace saeda
