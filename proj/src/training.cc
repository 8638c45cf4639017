// Copyright (c) 2026 The tagstyle Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tagstyle/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include "tagstyle/error.h"
#include "tagstyle/json_util.h"
#include "tagstyle/rng.h"

namespace tagstyle {

namespace fs = std::filesystem;

namespace {

// Stream keys for the per-step RNGs.
constexpr std::uint64_t kTagStream = 0x7a65;
constexpr std::uint64_t kSelectStream = 0x5e1ec7;
constexpr std::uint64_t kDropoutStream = 0xd20f;
constexpr std::uint64_t kInitStream = 0x1a17;

nlohmann::json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

void WriteFileAtomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

std::string HexHash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void TrainConfig::Validate() const {
  if (steps < 1) throw ConfigError("train.steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be > 0");
  if (warmup_steps < 0) throw ConfigError("train.warmup_steps must be >= 0");
  if (!(grad_clip > 0)) throw ConfigError("train.grad_clip must be > 0");
  if (!(p_style_source >= 0 && p_style_source <= 1)) {
    throw ConfigError("train.p_style_source must be in [0, 1]");
  }
  if (binarization_warmup < 0) {
    throw ConfigError("train.binarization_warmup must be >= 0");
  }
  if (checkpoint_interval < 1) {
    throw ConfigError("train.checkpoint_interval must be >= 1");
  }
  if (threads < 1) throw ConfigError("train.threads must be >= 1");
}

nlohmann::json TrainConfigToJson(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"warmup_steps", c.warmup_steps},
          {"grad_clip", c.grad_clip},
          {"p_style_source", c.p_style_source},
          {"seed", c.seed},
          {"binarization_warmup", c.binarization_warmup},
          {"checkpoint_interval", c.checkpoint_interval},
          {"s_rec_stop_gradient", c.s_rec_stop_gradient},
          {"use_contrastive", c.use_contrastive},
          {"alignment_prior", c.alignment_prior},
          {"threads", c.threads}};
}

TrainConfig TrainConfigFromJson(const nlohmann::json& j) {
  TrainConfig c;
  StrictObject o(j, "train");
  o.Get("steps", &c.steps);
  o.Get("batch_size", &c.batch_size);
  o.Get("learning_rate", &c.learning_rate);
  o.Get("warmup_steps", &c.warmup_steps);
  o.Get("grad_clip", &c.grad_clip);
  o.Get("p_style_source", &c.p_style_source);
  o.Get("seed", &c.seed);
  o.Get("binarization_warmup", &c.binarization_warmup);
  o.Get("checkpoint_interval", &c.checkpoint_interval);
  o.Get("s_rec_stop_gradient", &c.s_rec_stop_gradient);
  o.Get("use_contrastive", &c.use_contrastive);
  o.Get("alignment_prior", &c.alignment_prior);
  o.Get("threads", &c.threads);
  o.Finish();
  c.Validate();
  return c;
}

double LearningRate(const TrainConfig& c, std::int64_t step) {
  if (c.warmup_steps == 0) return c.learning_rate;
  const double s = static_cast<double>(step + 1);
  const double w = static_cast<double>(c.warmup_steps);
  return c.learning_rate * std::min(s / w, std::sqrt(w / s));
}

double BinarizationRamp(const TrainConfig& c, std::int64_t step) {
  if (c.binarization_warmup == 0) return 1.0;
  return std::min(1.0, static_cast<double>(step) / c.binarization_warmup);
}

void ExperimentConfig::Validate() const {
  corpus.Validate();
  model.Validate();
  train.Validate();
  loss.Validate();
  if (model.num_speakers < corpus.num_speakers()) {
    throw ConfigError("model.num_speakers is smaller than the corpus speaker count");
  }
  if (model.n_mels != corpus.signal.mel_bins) {
    throw ConfigError("model.n_mels must equal corpus.signal.mel_bins");
  }
  if (model.num_symbols != kSymbolTableSize) {
    throw ConfigError("model.num_symbols must be " + std::to_string(kSymbolTableSize));
  }
}

std::uint64_t ExperimentConfig::Hash() const {
  auto j = ExperimentConfigToJson(*this);
  j.erase("overrides");
  j["train"].erase("steps");
  j["train"].erase("checkpoint_interval");
  return Fnv1a(j.dump());
}

nlohmann::json ExperimentConfigToJson(const ExperimentConfig& c) {
  return {{"corpus", SpecToJson(c.corpus)},
          {"model", ModelConfigToJson(c.model)},
          {"train", TrainConfigToJson(c.train)},
          {"loss", LossWeightsToJson(c.loss)},
          {"overrides", c.overrides}};
}

ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& j) {
  ExperimentConfig c;
  StrictObject o(j, "");
  if (const auto* v = o.Child("corpus")) c.corpus = SpecFromJson(*v);
  if (const auto* v = o.Child("model")) c.model = ModelConfigFromJson(*v);
  if (const auto* v = o.Child("train")) c.train = TrainConfigFromJson(*v);
  if (const auto* v = o.Child("loss")) c.loss = LossWeightsFromJson(*v);
  o.Get("overrides", &c.overrides);
  o.Finish();
  c.Validate();
  return c;
}

void ApplyOverride(nlohmann::json* root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value: '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  std::vector<std::string> path;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw ConfigError("empty segment in override key '" + key + "'");
    path.push_back(part);
  }
  if (key.back() == '.') throw ConfigError("empty segment in override key '" + key + "'");
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  nlohmann::json* node = root;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override key '" + key + "' crosses a value");
    node = &(*node)[path[i]];
    if (node->is_null()) *node = nlohmann::json::object();
  }
  if (!node->is_object()) throw ConfigError("override key '" + key + "' crosses a value");
  (*node)[path.back()] = std::move(value);
}

nlohmann::json ReadConfigFile(const fs::path& path) { return ReadJsonFile(path); }

ExperimentConfig LoadExperimentConfig(const std::string& path,
                                      const std::vector<std::string>& overrides) {
  return ResolveConfig(path.empty() ? nlohmann::json::object() : ReadJsonFile(path),
                       overrides);
}

ExperimentConfig ResolveConfig(nlohmann::json j,
                               const std::vector<std::string>& overrides) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  std::vector<std::string> applied;
  if (auto it = j.find("overrides"); it != j.end() && it->is_array()) {
    applied = it->get<std::vector<std::string>>();
  }
  for (const auto& o : overrides) {
    ApplyOverride(&j, o);
    applied.push_back(o);
  }
  j["overrides"] = applied;
  return ExperimentConfigFromJson(j);
}

std::vector<bool> DrawStyleSources(std::int64_t count, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<bool> out(count);
  for (std::int64_t i = 0; i < count; ++i) out[i] = u(rng) < p;
  return out;
}

torch::Tensor SelectStyleEmbedding(const torch::Tensor& w_s, const torch::Tensor& w_t,
                                   std::mt19937_64& rng, double p,
                                   std::vector<bool>* chose_speech) {
  if (w_s.sizes() != w_t.sizes() || w_s.dim() != 2) {
    throw InputError("style selection: w_s and w_t must both be [B, d]");
  }
  const auto draws = DrawStyleSources(w_s.size(0), p, rng);
  std::vector<std::uint8_t> flags(draws.begin(), draws.end());
  auto pick = torch::tensor(flags, torch::kBool).unsqueeze(1);
  if (chose_speech) *chose_speech = draws;
  return torch::where(pick, w_s, w_t);
}

StepResult ComputeStep(TagStyleModel& model, const TagEmbedder& embedder,
                       const Batch& batch, std::int64_t step,
                       const ExperimentConfig& config, const StepOptions& options) {
  const auto& tc = config.train;
  const auto dtype = model->style_proj->weight.scalar_type();
  const auto b = batch.size();
  torch::manual_seed(MixSeed(tc.seed, kDropoutStream, step));

  StepResult r;
  auto mel = batch.mel.to(dtype);
  auto mel_mask = batch.mel_mask();
  auto ph_mask = batch.phoneme_mask();
  auto mel_len = batch.mel_lengths;
  auto ph_len = batch.phoneme_lengths;

  std::mt19937_64 tag_rng(MixSeed(tc.seed, kTagStream, step));
  std::vector<torch::Tensor> semantic;
  semantic.reserve(b);
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& tags = batch.tags[i];
    semantic.push_back(MeanTagEmbedding(
        options.sample_tags ? SampleTags(tags, tag_rng) : tags, embedder));
  }
  r.w_t = model->adaptation(torch::stack(semantic).to(dtype));
  r.w_s = model->reference_encoder(mel, mel_len);

  switch (options.style_source) {
    case StyleSource::kSampled: {
      std::mt19937_64 rng(MixSeed(tc.seed, kSelectStream, step));
      r.style = SelectStyleEmbedding(r.w_s, r.w_t, rng, tc.p_style_source,
                                     &r.chose_speech);
      break;
    }
    case StyleSource::kSpeech:
      r.style = r.w_s;
      r.chose_speech.assign(b, true);
      break;
    case StyleSource::kTags:
      r.style = r.w_t;
      r.chose_speech.assign(b, false);
      break;
  }

  auto speaker = model->speakers(batch.speakers);
  auto encoded = model->text_encoder(batch.phonemes, ph_len);
  auto styled = AddStyle(encoded, model->ProjectStyle(r.style), ph_mask);

  torch::Tensor prior;
  if (tc.alignment_prior) {
    prior = AlignmentLogPrior(ph_len, mel_len, batch.phonemes.size(1), mel.size(1));
  }
  r.log_a_soft = model->aligner(styled, ph_mask, mel, mel_mask, prior);
  auto frames = mel_len.to(dtype);
  auto& t = r.terms;
  t.align_nll = (ForwardSumNll(r.log_a_soft, ph_len, mel_len) / frames).mean();
  r.hard = ViterbiHardAlign(r.log_a_soft, ph_len, mel_len);
  t.binarization = BinarizationRamp(tc, step) *
                   (BinarizationLossFromLog(r.log_a_soft, r.hard.hard) / frames).mean();

  r.log_duration = model->duration_predictor(styled, ph_mask, speaker, r.style);
  t.duration_l2 = DurationL2(r.log_duration, r.hard.durations, ph_mask);

  auto [context, lengths] = LengthRegulate(styled, r.hard.durations);
  if (!torch::equal(lengths, mel_len)) {
    throw NumericError("aligner durations do not sum to the mel lengths");
  }
  r.mel = model->decoder->Decode(context, speaker, mel_mask,
                                 DecodeMode::kTeacherForced, mel);
  t.mel_l1 = MelL1(r.mel.mel_before, r.mel.mel_after, mel, mel_mask);

  if (tc.s_rec_stop_gradient) {
    // Gradients still reach mel_after; the encoder weights are constants here.
    std::vector<std::pair<torch::Tensor, bool>> saved;
    for (auto& p : model->reference_encoder->parameters()) {
      saved.emplace_back(p, p.requires_grad());
      p.set_requires_grad(false);
    }
    r.w_p = model->reference_encoder(r.mel.mel_after, mel_len);
    for (auto& [p, flag] : saved) p.set_requires_grad(flag);
  } else {
    r.w_p = model->reference_encoder(r.mel.mel_after, mel_len);
  }

  t.s_emb = StyleMse(r.w_s, r.w_t);
  t.s_rec = StyleMse(r.w_s, r.w_p);
  t.s_con = b >= 2 ? StyleContrastiveLoss(r.w_t, r.w_p, config.loss.tau)
                   : torch::zeros({}, mel.options());

  LossWeights w = config.loss;
  if (!tc.use_contrastive) w.gamma = 0.0;
  r.loss = TotalLoss(t, w);
  return r;
}

std::string MetricsHeader() {
  return "step\tmel_l1\talign_nll\tbinarization\tduration_l2\ts_emb\ts_rec\ts_con\t"
         "total\tlr\twall_seconds";
}

Trainer::Trainer(ExperimentConfig config, const Corpus& corpus,
                 fs::path checkpoint_dir)
    : config_(std::move(config)),
      corpus_(&corpus),
      dir_(std::move(checkpoint_dir)),
      stream_(corpus, config_.train.batch_size, config_.train.seed) {
  config_.Validate();
  if (SpecToJson(corpus.spec) != SpecToJson(config_.corpus)) {
    throw ConfigError("corpus does not match the corpus section of the config");
  }
  torch::set_num_threads(config_.train.threads);
  embedder_ = MakeEmbedder(config_.model);
  torch::manual_seed(MixSeed(config_.train.seed, kInitStream));
  model_ = TagStyleModel(config_.model);
  optimizer_ = std::make_unique<torch::optim::Adam>(
      model_->parameters(), torch::optim::AdamOptions(config_.train.learning_rate));

  if (fs::exists(dir_ / "state.json")) {
    LoadCheckpoint();
  } else {
    fs::create_directories(dir_);
    WriteFileAtomic(dir_ / "config.json",
                    ExperimentConfigToJson(config_).dump(2) + "\n");
    WriteFileAtomic(dir_ / "metrics.log", MetricsHeader() + "\n");
  }
}

void Trainer::LoadCheckpoint() {
  const auto state = ReadJsonFile(dir_ / "state.json");
  const auto hash = state.at("config_hash").get<std::string>();
  if (hash != HexHash(config_.Hash())) {
    throw ConfigError("checkpoint in " + dir_.string() +
                      " was made with a different config");
  }
  step_ = state.at("step").get<std::int64_t>();
  last_saved_ = step_;
  torch::load(model_, (dir_ / "params.pt").string());
  torch::load(*optimizer_, (dir_ / "optimizer.pt").string());

  // Drop log records written after the checkpoint.
  std::ifstream in(dir_ / "metrics.log");
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      kept += line + "\n";
      header = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find('\t'))) < step_) kept += line + "\n";
  }
  in.close();
  if (header) kept = MetricsHeader() + "\n";
  WriteFileAtomic(dir_ / "metrics.log", kept);
  // Snapshot the config that resumed the run, overrides included.
  WriteFileAtomic(dir_ / "config.json", ExperimentConfigToJson(config_).dump(2) + "\n");
}

void Trainer::SaveCheckpoint() {
  fs::create_directories(dir_);
  const fs::path params_tmp = dir_ / "params.pt.tmp";
  const fs::path opt_tmp = dir_ / "optimizer.pt.tmp";
  torch::save(model_, params_tmp.string());
  torch::save(*optimizer_, opt_tmp.string());
  fs::rename(params_tmp, dir_ / "params.pt");
  fs::rename(opt_tmp, dir_ / "optimizer.pt");
  nlohmann::json state = {{"step", step_}, {"config_hash", HexHash(config_.Hash())}};
  WriteFileAtomic(dir_ / "state.json", state.dump(2) + "\n");
  last_saved_ = step_;
}

void Trainer::Run(std::optional<std::int64_t> stop_step) {
  const std::int64_t stop = stop_step.value_or(config_.train.steps);
  const auto& tc = config_.train;
  model_->train();
  model_->decoder->prenet_dropout_enabled = true;
  auto params = model_->parameters();
  std::ofstream log(dir_ / "metrics.log", std::ios::app);
  const auto start = std::chrono::steady_clock::now();

  while (step_ < stop) {
    const Batch batch = stream_.BatchAt(step_);
    const double lr = LearningRate(tc, step_);
    for (auto& group : optimizer_->param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
    optimizer_->zero_grad();
    StepResult r;
    try {
      r = ComputeStep(model_, *embedder_, batch, step_, config_);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(step_) +
                         "; last good checkpoint: step " +
                         std::to_string(last_saved_) + " in " + dir_.string());
    }
    r.loss.total.backward();
    torch::nn::utils::clip_grad_norm_(params, tc.grad_clip);
    optimizer_->step();
    last_report_ = r.loss.report;

    const double wall = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    const auto& rep = r.loss.report;
    char line[512];
    std::snprintf(line, sizeof(line),
                  "%lld\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.6g\t%.3f\n",
                  static_cast<long long>(step_), rep.mel_l1, rep.align_nll,
                  rep.binarization, rep.duration_l2, rep.s_emb, rep.s_rec, rep.s_con,
                  rep.total, lr, wall);
    log << line;
    log.flush();
    ++step_;
    if (step_ % tc.checkpoint_interval == 0) SaveCheckpoint();
  }
  if (last_saved_ != step_) SaveCheckpoint();
}

LoadedModel LoadModel(const fs::path& dir) {
  if (!fs::exists(dir / "params.pt") || !fs::exists(dir / "config.json")) {
    throw InputError("no checkpoint in " + dir.string());
  }
  LoadedModel m;
  m.config = ExperimentConfigFromJson(ReadJsonFile(dir / "config.json"));
  m.embedder = MakeEmbedder(m.config.model);
  m.model = TagStyleModel(m.config.model);
  torch::load(m.model, (dir / "params.pt").string());
  if (fs::exists(dir / "state.json")) {
    m.step = ReadJsonFile(dir / "state.json").at("step").get<std::int64_t>();
  }
  m.model->eval();
  return m;
}

SynthesisResult Synthesize(TagStyleModel& model, const TagEmbedder& embedder,
                           const SynthesisRequest& req) {
  if (req.phonemes.empty()) throw InputError("synthesis needs at least one phoneme");
  if (req.speaker < 0 || req.speaker >= model->config.num_speakers) {
    throw InputError("unknown speaker id " + std::to_string(req.speaker));
  }
  const bool has_tags = !req.tags.empty();
  const bool has_ref = req.reference.has_value();
  if (has_tags == has_ref) {
    throw InputError("synthesis needs exactly one style source: tags or a reference mel");
  }
  torch::NoGradGuard no_grad;
  model->eval();
  const bool saved_flag = model->decoder->prenet_dropout_enabled;
  model->decoder->prenet_dropout_enabled = req.prenet_dropout;
  torch::manual_seed(req.seed);
  const auto dtype = model->style_proj->weight.scalar_type();

  torch::Tensor style;
  if (has_tags) {
    style = TagEncode(req.tags, embedder, model->adaptation).unsqueeze(0);
  } else {
    const auto& ref = *req.reference;
    if (ref.dim() != 2 || ref.size(0) < 1) {
      throw InputError("reference mel must be [frames >= 1, mel_bins]");
    }
    style = model->reference_encoder(ref.unsqueeze(0).to(dtype),
                                     torch::tensor({ref.size(0)}, torch::kInt64));
  }
  const auto n = static_cast<std::int64_t>(req.phonemes.size());
  auto phonemes = torch::tensor(req.phonemes, torch::kInt64).unsqueeze(0);
  auto encoded = model->text_encoder(phonemes, torch::tensor({n}, torch::kInt64));
  auto styled = AddStyle(encoded, model->ProjectStyle(style));
  auto speaker = model->speakers(torch::tensor({req.speaker}, torch::kInt64));
  auto log_d = model->duration_predictor(
      styled, torch::ones({1, n}, torch::kBool), speaker, style);

  SynthesisResult out;
  out.durations = DurationsFromLog(log_d[0]);
  auto context = LengthRegulate(styled[0], out.durations).unsqueeze(0);
  const auto frames = context.size(1);
  auto decoded = model->decoder->Decode(context, speaker,
                                        torch::ones({1, frames}, torch::kBool),
                                        DecodeMode::kAutoregressive);
  model->decoder->prenet_dropout_enabled = saved_flag;
  out.mel = decoded.mel_after[0].to(torch::kFloat32);
  out.style = style[0];
  return out;
}

}  // namespace tagstyle
