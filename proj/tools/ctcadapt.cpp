// tools/ctcadapt.cpp

// Copyright 2026 The ctcadapt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// ctcadapt: command-line driver for corpus generation, SI training, speaker
// adaptation, decoding, scoring and adaptation sweeps.
//
// Every numeric setting comes from the JSON config; flags only name files,
// the head kind, the speaker and the split. Each command writes a
// reproducibility record next to its output.
//
// Exit status: 0 on success, 1 on a runtime failure, 2 on a usage or config
// error.

#include "ctcadapt/adaptation.hpp"
#include "ctcadapt/config.hpp"
#include "ctcadapt/corpus.hpp"
#include "ctcadapt/evalx.hpp"
#include "ctcadapt/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace ctcadapt {
namespace {

namespace fs = std::filesystem;

struct Args {
  std::string config, corpus, model, out, head = "word", speaker, split = "test", ref, hyp;
};

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
  if (!os) throw Error("write failed: " + path.string());
}

// Record for a file output goes to FILE.repro.json, for a directory output
// to DIR/repro.json.
void WriteRepro(const fs::path& out, bool is_dir, const std::string& command, const RunConfig* config,
                const Args& a) {
  Json args = Json::object();
  auto put = [&](const char* k, const std::string& v) {
    if (!v.empty()) args[k] = v;
  };
  put("config", a.config);
  put("corpus", a.corpus);
  put("model", a.model);
  put("out", a.out);
  put("speaker", a.speaker);
  put("ref", a.ref);
  put("hyp", a.hyp);
  if (command == "train-si") put("head", a.head);
  if (command == "decode") put("split", a.split);
  Json record;
  if (config) {
    record = ReproducibilityRecord(command, *config, args);
  } else {
    record = Json{{"tool", "ctcadapt"}, {"version", CTCADAPT_VERSION}, {"command", command}, {"seed", nullptr},
                  {"arguments", args}, {"config", nullptr}};
  }
  const fs::path path = is_dir ? out / "repro.json" : fs::path(out.string() + ".repro.json");
  WriteText(path, record.dump(2) + "\n");
}

std::vector<Utterance> LoadPrepared(const RunConfig& run, const std::string& dir) {
  return PrepareUtterances(LoadCorpus(dir, run.corpus.feature_dim), run);
}

CtcModel LoadModelFor(const RunConfig& run, const std::string& path) {
  CtcModel m = CtcModel::Load(path);
  if (m.feature_dim() != run.input_dim()) {
    throw Error("model " + path + " expects " + std::to_string(m.feature_dim()) +
                "-dim input but the config gives " + std::to_string(run.input_dim()));
  }
  return m;
}

const SpeakerData& FindSpeaker(const std::vector<SpeakerData>& speakers, const std::string& id) {
  for (const auto& s : speakers) {
    if (s.speaker == id) return s;
  }
  throw Error("no adaptation/test data for speaker " + id);
}

void ReportTraining(const char* what, const TrainLog& log) {
  std::cerr << what << ": " << log.epoch_loss.size() << " epochs";
  if (!log.epoch_loss.empty()) {
    std::cerr << ", loss " << log.epoch_loss.front() << " -> " << log.epoch_loss.back();
  }
  std::cerr << ", " << log.skipped << " infeasible examples skipped\n";
}

// ----------------------------------------------------------------- commands

int GenData(const Args& a) {
  const RunConfig run = LoadRunConfig(a.config);
  GeneratedCorpus g = GenerateSyntheticCorpus(run.corpus);
  WriteCorpus(a.out, g);
  WriteText(fs::path(a.out) / "config.json", ToJson(run).dump(2) + "\n");
  WriteRepro(a.out, true, "gen-data", &run, a);
  std::cerr << "wrote " << g.utterances.size() << " utterances to " << a.out << '\n';
  return 0;
}

int TrainSiCmd(const Args& a) {
  const RunConfig run = LoadRunConfig(a.config);
  const VocabKind kind = ParseHeadKind(a.head);
  auto train = SelectSplit(LoadPrepared(run, a.corpus), Split::kTrain);
  if (train.empty()) throw Error("corpus " + a.corpus + " has no training utterances");
  TrainLog log;
  CtcModel m = TrainSiModel(run, train, kind, &log);
  ReportTraining("SI training", log);
  m.Save(a.out);
  WriteRepro(a.out, false, "train-si", &run, a);
  return 0;
}

int TrainLetterHeadCmd(const Args& a) {
  const RunConfig run = LoadRunConfig(a.config);
  CtcModel m = LoadModelFor(run, a.model);
  if (!fs::is_directory(a.corpus)) throw Error("letter-head training needs a corpus directory: " + a.corpus);
  auto train = SelectSplit(LoadPrepared(run, a.corpus), Split::kTrain);
  if (train.empty()) throw Error("corpus " + a.corpus + " has no training utterances");
  TrainLog log;
  m = AddLetterHead(std::move(m), train, run, &log);
  ReportTraining("letter head", log);
  m.Save(a.out);
  WriteRepro(a.out, false, "train-letter-head", &run, a);
  return 0;
}

int AdaptCmd(const Args& a) {
  const RunConfig run = LoadRunConfig(a.config);
  const CtcModel si = LoadModelFor(run, a.model);
  const auto speakers = GroupSpeakers(LoadPrepared(run, a.corpus));
  const SpeakerData& spk = FindSpeaker(speakers, a.speaker);
  AdaptResult r = AdaptSpeaker(si, spk.adapt, run.adaptation, spk.speaker);
  for (const auto& n : r.report.notes) std::cerr << "note: " << n << '\n';
  r.model.Save(a.out);
  WriteText(a.out + ".report.json", ToJson(r.report).dump(2) + "\n");
  WriteRepro(a.out, false, "adapt", &run, a);
  std::cerr << "adapted " << spk.speaker << " on " << r.report.utterances_used << " utterances, "
            << r.report.groups_updated.size() << " groups updated\n";
  return 0;
}

int DecodeCmd(const Args& a) {
  const RunConfig run = LoadRunConfig(a.config);
  const CtcModel m = LoadModelFor(run, a.model);
  const Split split = ParseSplit(a.split);
  std::ostringstream os;
  std::size_t n = 0;
  for (const auto& u : SelectSplit(LoadPrepared(run, a.corpus), split)) {
    if (!a.speaker.empty() && u.speaker != a.speaker) continue;
    os << u.id << '\t' << JoinWords(DecodeWords(m, u.features, m.primary_head().name)) << '\n';
    ++n;
  }
  if (n == 0) throw Error("no utterances selected for decoding");
  WriteText(a.out, os.str());
  WriteRepro(a.out, false, "decode", &run, a);
  return 0;
}

std::map<std::string, WordSeq> ReadTranscripts(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  std::map<std::string, WordSeq> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string id = line.substr(0, tab);
    if (!out.emplace(id, tab == std::string::npos ? WordSeq{} : SplitWords(line.substr(tab + 1))).second) {
      throw Error(path + ":" + std::to_string(lineno) + ": duplicate id " + id);
    }
  }
  return out;
}

int EvalCmd(const Args& a) {
  std::optional<RunConfig> run;
  if (!a.config.empty()) run = LoadRunConfig(a.config);
  const auto refs = ReadTranscripts(a.ref);
  const auto hyps = ReadTranscripts(a.hyp);
  if (refs.empty()) throw Error(a.ref + " holds no utterances");
  EvalResult total;
  for (const auto& [id, ref] : refs) {
    auto it = hyps.find(id);
    if (it == hyps.end()) throw Error("no hypothesis for utterance " + id);
    total += Wer(ref, it->second);
  }
  for (const auto& [id, hyp] : hyps) {
    if (!refs.count(id)) throw Error("hypothesis for unknown utterance " + id);
  }
  std::ostringstream os;
  os << "WER " << FormatFixed(total.wer(), 2) << "% [ " << total.errors() << " / " << total.ref_words << ", "
     << total.insertions << " ins, " << total.deletions << " del, " << total.substitutions << " sub ]\n";
  std::cout << os.str();
  if (!a.out.empty()) {
    WriteText(a.out, os.str());
    WriteRepro(a.out, false, "eval", run ? &*run : nullptr, a);
  }
  return 0;
}

int SweepCmd(const Args& a) {
  const RunConfig run = LoadRunConfig(a.config);
  if (run.sweeps.empty()) throw ConfigError("config has no sweeps");
  const CtcModel si = LoadModelFor(run, a.model);
  const auto speakers = GroupSpeakers(LoadPrepared(run, a.corpus));
  fs::create_directories(a.out);
  std::string all;
  for (std::size_t i = 0; i < run.sweeps.size(); ++i) {
    SweepTable t = RunSweep(si, speakers, run.sweeps[i], &std::cerr);
    const std::string stem = (fs::path(a.out) / ("sweep" + std::to_string(i))).string();
    WriteText(stem + ".csv", RenderCsv(t));
    WriteText(stem + ".txt", RenderTable(t));
    all += RenderTable(t) + "\n";
  }
  std::cout << all;
  WriteRepro(a.out, true, "sweep", &run, a);
  return 0;
}

}  // namespace
}  // namespace ctcadapt

int main(int argc, char** argv) {
  using namespace ctcadapt;
  CLI::App app{"CTC speaker adaptation toolkit"};
  app.set_version_flag("--version", std::string(CTCADAPT_VERSION));
  app.require_subcommand(1);
  Args a;

  auto config = [&](CLI::App* c, bool required = true) {
    auto* o = c->add_option("-c,--config", a.config, "JSON run configuration");
    if (required) o->required();
    o->check(CLI::ExistingFile);
  };
  auto corpus = [&](CLI::App* c) { c->add_option("--corpus", a.corpus, "corpus directory")->required(); };
  auto model = [&](CLI::App* c) { c->add_option("-m,--model", a.model, "input checkpoint")->required(); };
  auto out = [&](CLI::App* c, const char* what) { c->add_option("-o,--out", a.out, what)->required(); };

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
  config(gen);
  out(gen, "output corpus directory");

  auto* tsi = app.add_subcommand("train-si", "train a speaker-independent model");
  config(tsi);
  corpus(tsi);
  tsi->add_option("--head", a.head, "output units")->check(CLI::IsMember({"letter", "word", "mixunit"}));
  out(tsi, "output checkpoint");

  auto* tlh = app.add_subcommand("train-letter-head", "attach and train the auxiliary letter head");
  config(tlh);
  corpus(tlh);
  model(tlh);
  out(tlh, "output checkpoint");

  auto* adapt = app.add_subcommand("adapt", "adapt a model to one speaker");
  config(adapt);
  corpus(adapt);
  model(adapt);
  adapt->add_option("--speaker", a.speaker, "speaker id")->required();
  out(adapt, "output checkpoint");

  auto* decode = app.add_subcommand("decode", "greedy-decode one split to a hypothesis file");
  config(decode);
  corpus(decode);
  model(decode);
  decode->add_option("--split", a.split, "split to decode")->check(CLI::IsMember({"train", "adapt", "test"}));
  decode->add_option("--speaker", a.speaker, "restrict to one speaker");
  out(decode, "hypothesis file");

  auto* eval = app.add_subcommand("eval", "score a hypothesis file against references");
  config(eval, false);
  eval->add_option("--ref", a.ref, "reference file")->required()->check(CLI::ExistingFile);
  eval->add_option("--hyp", a.hyp, "hypothesis file")->required()->check(CLI::ExistingFile);
  eval->add_option("-o,--out", a.out, "also write the score here");

  auto* sweep = app.add_subcommand("sweep", "run the configured adaptation sweeps");
  config(sweep);
  corpus(sweep);
  model(sweep);
  out(sweep, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::map<CLI::App*, int (*)(const Args&)> run = {
      {gen, GenData},   {tsi, TrainSiCmd}, {tlh, TrainLetterHeadCmd}, {adapt, AdaptCmd},
      {decode, DecodeCmd}, {eval, EvalCmd}, {sweep, SweepCmd},
  };
  try {
    for (const auto& [cmd, fn] : run) {
      if (cmd->parsed()) return fn(a);
    }
  } catch (const ConfigError& e) {
    std::cerr << "ctcadapt: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ctcadapt: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
