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

#include "tagstyle/cli.h"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "tagstyle/array_io.h"
#include "tagstyle/batch.h"
#include "tagstyle/corpus.h"
#include "tagstyle/error.h"
#include "tagstyle/eval.h"
#include "tagstyle/plot.h"
#include "tagstyle/training.h"

namespace tagstyle {

namespace fs = std::filesystem;

namespace {

struct ConfigArgs {
  std::string config;
  std::vector<std::string> overrides;
};

void AddConfigArgs(CLI::App* cmd, ConfigArgs* a) {
  cmd->add_option("--config", a->config, "JSON config file");
  cmd->add_option("--set", a->overrides, "override, e.g. train.steps=100")->take_all();
}

std::vector<std::string> SplitList(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

// Loads --corpus when given, otherwise regenerates from the config.
Corpus ObtainCorpus(const std::string& dir, const CorpusSpec& spec) {
  return dir.empty() ? GenerateCorpus(spec) : LoadCorpus(dir);
}

int GenCorpus(const ConfigArgs& ca, std::optional<std::uint64_t> seed,
              const std::string& out_dir, std::ostream& out) {
  auto overrides = ca.overrides;
  if (seed) overrides.push_back("corpus.seed=" + std::to_string(*seed));
  const auto cfg = LoadExperimentConfig(ca.config, overrides);
  const Corpus corpus = GenerateCorpus(cfg.corpus);
  SaveCorpus(corpus, out_dir);
  out << "wrote " << corpus.utterances.size() << " utterances from "
      << cfg.corpus.num_speakers() << " speakers to " << out_dir << "\n";
  return kExitOk;
}

int Train(const ConfigArgs& ca, const std::string& corpus_dir,
          std::optional<std::uint64_t> seed, std::optional<std::int64_t> steps,
          const std::string& out_dir, std::ostream& out) {
  auto base = ca.config.empty() ? nlohmann::json::object() : ReadConfigFile(ca.config);
  std::optional<Corpus> loaded;
  if (!corpus_dir.empty()) {
    loaded = LoadCorpus(corpus_dir);
    // A config without a corpus section adopts the loaded corpus.
    if (base.is_object() && !base.contains("corpus")) base["corpus"] = SpecToJson(loaded->spec);
  }
  auto overrides = ca.overrides;
  if (seed) overrides.push_back("train.seed=" + std::to_string(*seed));
  if (steps) overrides.push_back("train.steps=" + std::to_string(*steps));
  const auto cfg = ResolveConfig(base, overrides);
  const Corpus corpus = loaded ? std::move(*loaded) : GenerateCorpus(cfg.corpus);
  Trainer trainer(cfg, corpus, out_dir);
  const auto start = trainer.step();
  trainer.Run();
  const auto& r = trainer.last_report();
  out << "trained steps " << start << ".." << trainer.step() << " in " << out_dir << "\n";
  if (trainer.step() > start) {
    out << "last step: total " << r.total << " mel_l1 " << r.mel_l1 << " s_con " << r.s_con
        << "\n";
  }
  return kExitOk;
}

struct SynthArgs {
  std::string checkpoint, out, phonemes, tags, reference_id, corpus;
  std::int64_t speaker = -1;
  bool no_dropout = false;
  std::uint64_t seed = 0;
};

int Synth(const SynthArgs& a, std::ostream& out) {
  auto m = LoadModel(a.checkpoint);
  SynthesisRequest req;
  for (const auto& p : SplitList(a.phonemes, ',')) {
    try {
      req.phonemes.push_back(std::stoll(p));
    } catch (const std::exception&) {
      throw InputError("bad phoneme id '" + p + "'");
    }
  }
  req.speaker = a.speaker;
  req.tags = SplitList(a.tags, ',');
  std::string style_desc = a.tags;
  if (!a.reference_id.empty()) {
    const Corpus corpus = ObtainCorpus(a.corpus, m.config.corpus);
    const auto idx = corpus.IndexOf(a.reference_id);
    if (idx < 0) throw InputError("unknown utterance id " + a.reference_id);
    req.reference = corpus.NormalizedMel(idx);
    style_desc = "ref:" + a.reference_id;
  }
  req.prenet_dropout = !a.no_dropout;
  req.seed = a.seed;
  const auto res = Synthesize(m.model, *m.embedder, req);
  const fs::path path(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  WriteArray(path, res.mel);
  const fs::path manifest =
      (path.has_parent_path() ? path.parent_path() : fs::path(".")) / "synth_manifest.tsv";
  const bool fresh = !fs::exists(manifest);
  std::ofstream mf(manifest, std::ios::app);
  if (fresh) mf << "file\tphonemes\tstyle\tspeaker\tframes\n";
  mf << path.filename().string() << "\t" << a.phonemes << "\t" << style_desc << "\t"
     << a.speaker << "\t" << res.mel.size(0) << "\n";
  out << "wrote " << res.mel.size(0) << " frames to " << a.out << "\n";
  return kExitOk;
}

int Eval(const std::string& checkpoint, const std::string& corpus_dir,
         const std::string& out_dir, const EvalOptions& options, std::ostream& out) {
  auto m = LoadModel(checkpoint);
  const Corpus corpus = ObtainCorpus(corpus_dir, m.config.corpus);
  auto report = Evaluate(m.model, *m.embedder, corpus, m.config, options);
  report.step = m.step;
  const fs::path dir = out_dir.empty() ? fs::path(checkpoint) / "eval" : fs::path(out_dir);
  WriteReport(report, dir);
  out << ReportToText(report);
  return kExitOk;
}

int Inspect(const std::string& checkpoint, const std::string& corpus_dir,
            const std::string& utterance, const std::string& out_dir, std::ostream& out) {
  if (checkpoint.empty() && corpus_dir.empty()) {
    throw UsageError("inspect needs --corpus or --checkpoint");
  }
  std::optional<LoadedModel> m;
  if (!checkpoint.empty()) m = LoadModel(checkpoint);
  const Corpus corpus = m ? ObtainCorpus(corpus_dir, m->config.corpus) : LoadCorpus(corpus_dir);
  const auto idx = corpus.IndexOf(utterance);
  if (idx < 0) throw InputError("unknown utterance id " + utterance);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const auto& utt = corpus.utterances[idx];
  PlotMel(dir / "mel.png", corpus.NormalizedMel(idx));
  out << "mel.png " << utt.num_frames() << "x" << utt.mel.size(1) << "\n";
  if (!m) {
    PlotDurations(dir / "durations.png", utt.durations);
    out << "durations.png " << utt.durations.size() << " phonemes\n";
    return kExitOk;
  }

  torch::NoGradGuard no_grad;
  auto& model = m->model;
  model->eval();
  model->decoder->prenet_dropout_enabled = false;
  StepOptions so;
  so.style_source = StyleSource::kTags;
  so.sample_tags = false;
  const std::size_t one[] = {static_cast<std::size_t>(idx)};
  const Batch batch = Collate(corpus, one);
  const auto r = ComputeStep(model, *m->embedder, batch, m->step, m->config, so);
  const auto n = utt.phonemes.size();
  const auto t = utt.num_frames();
  auto soft = r.log_a_soft[0].exp();
  auto hard = r.hard.hard[0];
  const auto path = hard.argmax(0);
  std::vector<std::int64_t> rows(path.data_ptr<std::int64_t>(),
                                 path.data_ptr<std::int64_t>() + t);
  if (!IsMonotonicPath(rows, static_cast<std::int64_t>(n))) {
    throw NumericError("hard alignment is not a monotonic path");
  }
  PlotAlignment(dir / "alignment.png", soft, hard);
  WriteArray(dir / "a_soft.bin", soft.to(torch::kFloat32));
  WriteArray(dir / "a_hard.bin", hard.to(torch::kFloat32));
  out << "alignment.png " << n << "x" << t << " (monotonic)\n";

  const auto predicted = DurationsFromLog(r.log_duration[0]);
  std::vector<std::int64_t> aligned(n);
  for (std::size_t i = 0; i < n; ++i) aligned[i] = r.hard.durations[0][i].item<std::int64_t>();
  PlotDurations(dir / "durations.png", aligned, predicted);
  out << "durations.png " << n << " phonemes (aligner, predicted)\n";
  PlotMel(dir / "mel_predicted.png", r.mel.mel_after[0]);

  // Speech-side style vectors of the whole corpus, colored by latent style.
  std::vector<torch::Tensor> ws;
  std::vector<int> labels;
  for (std::size_t start = 0; start < corpus.utterances.size(); start += 32) {
    std::vector<std::size_t> chunk;
    for (auto i = start; i < std::min(corpus.utterances.size(), start + 32); ++i) {
      chunk.push_back(i);
      labels.push_back(corpus.utterances[i].latent_style);
    }
    const Batch b = Collate(corpus, chunk);
    ws.push_back(model->reference_encoder(b.mel.to(model->style_proj->weight.scalar_type()),
                                          b.mel_lengths));
  }
  auto points = Project2D(torch::cat(ws, 0));
  WriteArray(dir / "style_points.bin", points.to(torch::kFloat32));
  const auto drawn = PlotScatter(dir / "style_space.png", points, labels);
  out << "style_space.png " << drawn << " points\n";
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tag-driven expressive TTS toolkit", "tagstyle"};
  app.require_subcommand(1);

  ConfigArgs gen_ca, train_ca;
  std::optional<std::uint64_t> gen_seed, train_seed;
  std::optional<std::int64_t> train_steps;
  std::string gen_out, train_out, train_corpus;
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
  AddConfigArgs(gen, &gen_ca);
  gen->add_option("--seed", gen_seed, "corpus seed (corpus.seed)");
  gen->add_option("--out", gen_out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train or resume a model");
  AddConfigArgs(train, &train_ca);
  train->add_option("--corpus", train_corpus, "corpus directory (else generated)");
  train->add_option("--seed", train_seed, "training seed (train.seed)");
  train->add_option("--steps", train_steps, "total steps (train.steps)");
  train->add_option("--out", train_out, "checkpoint directory")->required();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "synthesize a mel");
  synth->add_option("--checkpoint", sa.checkpoint, "checkpoint directory")->required();
  synth->add_option("--phonemes", sa.phonemes, "comma-separated symbol ids")->required();
  synth->add_option("--speaker", sa.speaker, "speaker id")->required();
  synth->add_option("--tags", sa.tags, "comma-separated style tags");
  synth->add_option("--reference-id", sa.reference_id, "reference utterance id");
  synth->add_option("--corpus", sa.corpus, "corpus directory for --reference-id");
  synth->add_flag("--no-dropout", sa.no_dropout, "disable prenet dropout");
  synth->add_option("--seed", sa.seed, "dropout seed");
  synth->add_option("--out", sa.out, "output mel array file")->required();

  std::string ev_ckpt, ev_corpus, ev_out;
  EvalOptions eo;
  bool ev_no_dropout = false;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", ev_ckpt, "checkpoint directory")->required();
  eval->add_option("--corpus", ev_corpus, "corpus directory (else regenerated)");
  eval->add_option("--out", ev_out, "report directory (default <checkpoint>/eval)");
  eval->add_option("--batch-size", eo.batch_size, "retrieval batch size");
  eval->add_option("--seed", eo.seed, "evaluation seed");
  eval->add_flag("--no-dropout", ev_no_dropout, "disable prenet dropout");

  std::string in_ckpt, in_corpus, in_utt, in_out;
  auto* inspect = app.add_subcommand("inspect", "plot an utterance");
  inspect->add_option("--checkpoint", in_ckpt, "checkpoint directory");
  inspect->add_option("--corpus", in_corpus, "corpus directory");
  inspect->add_option("--utterance", in_utt, "utterance id")->required();
  inspect->add_option("--out", in_out, "output directory")->required();

  std::vector<const char*> argv{"tagstyle"};
  for (std::size_t i = 1; i < args.size(); ++i) argv.push_back(args[i].c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    if (*gen) return GenCorpus(gen_ca, gen_seed, gen_out, out);
    if (*train) return Train(train_ca, train_corpus, train_seed, train_steps, train_out, out);
    if (*synth) return Synth(sa, out);
    if (*eval) {
      eo.prenet_dropout = !ev_no_dropout;
      return Eval(ev_ckpt, ev_corpus, ev_out, eo, out);
    }
    if (*inspect) return Inspect(in_ckpt, in_corpus, in_utt, in_out, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const c10::Error& e) {
    err << "error: " << e.what_without_backtrace() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace tagstyle
