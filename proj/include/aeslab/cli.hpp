#pragma once

// Command-line driver: segment-train, segment, score-train, score-eval,
// analyze-features. Exit codes: 0 success, 1 runtime failure, 2 usage or
// configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aeslab/augment.hpp"
#include "aeslab/config.hpp"
#include "aeslab/corpus.hpp"
#include "aeslab/scorer.hpp"
#include "aeslab/segmenter.hpp"
#include "json.hpp"

namespace aeslab {

namespace fs = std::filesystem;

// Bad invocation: missing or inconsistent inputs. Maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw UsageError("cannot write " + p.string());
  out << content;
  if (!out) throw Error("write failed: " + p.string());
}

// Sorted *.txt files of a directory, or the path itself when it is a file.
inline std::vector<fs::path> text_files(const fs::path& p) {
  if (fs::is_regular_file(p)) return {p};
  if (!fs::is_directory(p)) throw UsageError("no such file or directory: " + p.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p))
    if (e.is_regular_file() && e.path().extension() == ".txt") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// NAME.txt with NAME.edus (one EDU per line) for EDU corpora, or NAME.spans
// (start<TAB>end<TAB>kind character spans) for AC corpora.
inline SegmentCorpus load_segment_corpus(const fs::path& dir, SpanKind kind) {
  SegmentCorpus c;
  c.kind = kind;
  const auto files = text_files(dir);
  if (files.empty()) throw UsageError("no .txt documents in " + dir.string());
  for (const auto& txt : files) {
    const std::string raw = read_file(txt);
    fs::path side = txt;
    if (kind == SpanKind::edu) {
      side.replace_extension(".edus");
      if (!fs::exists(side)) throw UsageError("missing " + side.string());
      c.docs.push_back(parse_segmented_document(raw, read_file(side), c.vocab, TokenizeMode::training));
    } else {
      side.replace_extension(".spans");
      if (!fs::exists(side)) throw UsageError("missing " + side.string());
      std::istringstream in(read_file(side));
      c.docs.push_back(parse_char_spans(raw, parse_char_span_file(in), c.vocab, TokenizeMode::training));
    }
  }
  return c;
}

namespace cli {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

struct Common {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string out;
};

inline std::uint64_t resolve_seed(const Common& c) {
  if (c.seed) return *c.seed;
  if (const char* env = std::getenv("AESLAB_SEED"); env && *env) {
    std::uint64_t s = 0;
    const std::string v = env;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), s);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw UsageError("AESLAB_SEED is not an integer: " + v);
    return s;
  }
  return 0;
}

inline KeyValues config_file(const Common& c) {
  if (!c.config) return {};
  std::istringstream in(read_file(*c.config));
  return parse_key_values(in);
}

inline fs::path out_dir(const Common& c) {
  fs::path p = c.out;
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw UsageError("cannot create output directory " + c.out);
  return p;
}

inline SpanKind parse_kind(const std::string& s) {
  const auto k = parse_span_kind(s);
  if (!k) throw UsageError("--kind must be edu or ac");
  return *k;
}

inline SegmenterModel load_segmenter_as(const std::string& path, SpanKind expected, const char* flag) {
  if (!fs::exists(path)) throw UsageError(std::string(flag) + ": no such checkpoint " + path);
  auto m = load_segmenter(path);
  if (m.kind != expected) {
    throw UsageError(std::string(flag) + ": checkpoint holds an " + to_string(m.kind) + " segmenter, expected " +
                     to_string(expected));
  }
  return m;
}

inline void require_decoration_source(const SegmenterModel& ac, const SegmenterModel* edu) {
  if (ac.decorates() && !edu) {
    throw UsageError("the AC segmenter marks EDU boundaries; supply an EDU segmenter with --edu");
  }
}

// ------------------------------------------------------------------ segment-train

struct SegmentTrainArgs {
  Common common;
  std::string data;
  std::string kind;
  std::optional<std::string> edu;
};

inline int segment_train(const SegmentTrainArgs& a, std::ostream& out) {
  const SpanKind kind = parse_kind(a.kind);
  SegmenterConfig cfg;
  apply_config(cfg, config_file(a.common));
  const std::uint64_t seed = resolve_seed(a.common);
  std::optional<SegmenterModel> edu;
  if (a.edu) {
    if (kind != SpanKind::ac) throw UsageError("--edu only applies to AC segmenters");
    edu = load_segmenter_as(*a.edu, SpanKind::edu, "--edu");
  }
  const auto corpus = load_segment_corpus(a.data, kind);
  if (kind == SpanKind::ac && cfg.decoration == EduDecoration::predicted && !edu) {
    throw UsageError("decoration = predicted needs an EDU segmenter (--edu) or decoration = none/gold");
  }
  const fs::path dir = out_dir(a.common);

  auto res = train_segmenter(corpus, cfg, seed, edu ? &*edu : nullptr);
  save_segmenter(dir / "segmenter.ckpt", res.model, &res.adam, &res.ema);
  const auto final_metrics = evaluate_segmenter(res.model, corpus.docs, edu ? &*edu : nullptr);

  std::string report;
  report += "command = segment-train\n";
  report += "kind = " + to_string(kind) + "\n";
  report += "seed = " + std::to_string(seed) + "\n";
  for (const auto& [k, v] : config_values(cfg)) report += "config." + k + " = " + v + "\n";
  report += "documents = " + std::to_string(corpus.docs.size()) + "\n";
  report += "train_documents = " + std::to_string(res.history.train_docs.size()) + "\n";
  report += "validation_documents = " + std::to_string(res.history.validation_docs.size()) + "\n";
  report += "best_epoch = " + std::to_string(res.history.best_epoch) + "\n";
  report += "best_validation_f1 = " + fmt(res.history.best_f1) + "\n";
  report += "precision = " + fmt(final_metrics.precision) + "\n";
  report += "recall = " + fmt(final_metrics.recall) + "\n";
  report += "f1 = " + fmt(final_metrics.f1) + "\n";
  report += "tp = " + std::to_string(final_metrics.tp) + "\n";
  report += "fp = " + std::to_string(final_metrics.fp) + "\n";
  report += "fn = " + std::to_string(final_metrics.fn) + "\n";
  write_file(dir / "report.txt", report);

  nlohmann::ordered_json j;
  j["command"] = "segment-train";
  j["kind"] = to_string(kind);
  j["seed"] = seed;
  j["config"] = to_json(cfg);
  j["train_documents"] = res.history.train_docs;
  j["validation_documents"] = res.history.validation_docs;
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  for (const auto& e : res.history.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_f1", e.validation_f1}});
  }
  j["epochs"] = epochs;
  j["best_epoch"] = res.history.best_epoch;
  j["best_validation_f1"] = res.history.best_f1;
  j["final"] = {{"precision", final_metrics.precision}, {"recall", final_metrics.recall}, {"f1", final_metrics.f1},
                {"tp", final_metrics.tp},               {"fp", final_metrics.fp},         {"fn", final_metrics.fn}};
  write_file(dir / "report.json", j.dump(2) + "\n");
  out << report;
  return 0;
}

// ------------------------------------------------------------------ segment

struct SegmentArgs {
  Common common;
  std::string model;
  std::string input;
  std::optional<std::string> kind;
  std::optional<std::string> edu;
};

inline int segment_cmd(const SegmentArgs& a, std::ostream& out) {
  if (!fs::exists(a.model)) throw UsageError("--model: no such checkpoint " + a.model);
  const auto m = load_segmenter(a.model);
  if (a.kind && parse_kind(*a.kind) != m.kind) {
    throw UsageError("--kind " + *a.kind + " does not match the " + to_string(m.kind) + " checkpoint");
  }
  std::optional<SegmenterModel> edu;
  if (a.edu) {
    if (m.kind != SpanKind::ac) throw UsageError("--edu only applies to AC segmenters");
    edu = load_segmenter_as(*a.edu, SpanKind::edu, "--edu");
  }
  if (m.kind == SpanKind::ac) require_decoration_source(m, edu ? &*edu : nullptr);
  const auto files = text_files(a.input);
  std::vector<std::string> texts;
  for (const auto& f : files) texts.push_back(read_file(f));
  const fs::path dir = out_dir(a.common);
  const auto spans = segment_all(m, texts, edu ? &*edu : nullptr, a.common.workers);
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto seq = tokenize(texts[i], m.vocab);
    fs::path target = dir / files[i].filename();
    target.replace_extension(".spans");
    write_file(target, format_char_span_file(to_char_spans(seq, spans[i])));
    out << files[i].filename().string() << "\t" << spans[i].size() << "\n";
  }
  return 0;
}

// ------------------------------------------------------------------ scoring inputs

struct ScoreInputs {
  std::string data;
  std::optional<std::string> prompts;
  std::optional<std::string> edu;
  std::optional<std::string> ac;
};

inline std::vector<EssayRecord> load_essays(const std::string& path, std::size_t& skipped, std::ostream& err) {
  const auto parsed = parse_asap_tsv(read_file(path));
  for (const auto& e : parsed.errors) err << path << ":" << e.line << ": skipped: " << e.message << "\n";
  skipped = parsed.errors.size();
  if (parsed.records.empty()) throw UsageError("no usable essays in " + path);
  return parsed.records;
}

// Loads the segmenters a context needs and attaches their spans. An EDU
// model alongside an AC context feeds the AC model's markers and the EDU
// count feature; any other pairing is inconsistent.
inline std::vector<AesExample> annotate(const std::vector<EssayRecord>& records, const ContextFlags& f,
                                        const ScoreInputs& in, std::size_t workers) {
  if (in.edu && in.ac && !f.ac) throw UsageError("--edu and --ac together are only valid for AC contexts");
  if (f.edu && !in.edu) throw UsageError("this context needs an EDU segmenter (--edu)");
  if (f.ac && !in.ac) throw UsageError("this context needs an AC segmenter (--ac)");
  if (!f.edu && !f.ac && (in.edu || in.ac)) throw UsageError("this context uses no segmenter; drop --edu/--ac");
  std::optional<SegmenterModel> edu, ac;
  if (in.edu) edu = load_segmenter_as(*in.edu, SpanKind::edu, "--edu");
  if (in.ac) {
    ac = load_segmenter_as(*in.ac, SpanKind::ac, "--ac");
    require_decoration_source(*ac, edu ? &*edu : nullptr);
  }
  std::vector<std::string> texts;
  for (const auto& r : records) texts.push_back(r.text);
  std::vector<AesExample> xs(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) xs[i].record = records[i];
  if (edu) {
    const auto spans = segment_all(*edu, texts, nullptr, workers);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i].edu_spans = spans[i];
  }
  if (ac) {
    const auto spans = segment_all(*ac, texts, edu ? &*edu : nullptr, workers);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i].ac_spans = spans[i];
  }
  return xs;
}

inline std::map<int, std::string> load_prompts(const std::optional<std::string>& path) {
  if (!path) return {};
  std::istringstream in(read_file(*path));
  return parse_prompts(in);
}

inline nlohmann::ordered_json inputs_json(const ScoreInputs& in) {
  auto opt = [](const std::optional<std::string>& s) {
    return s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json(nullptr);
  };
  return {{"data", in.data}, {"prompts", opt(in.prompts)}, {"edu", opt(in.edu)}, {"ac", opt(in.ac)}};
}

// ------------------------------------------------------------------ score-train

struct ScoreTrainArgs {
  Common common;
  ScoreInputs inputs;
  std::optional<std::string> context;
  bool prompt_specific = false;
  std::optional<std::size_t> folds;
};

inline int score_train(const ScoreTrainArgs& a, std::ostream& out, std::ostream& err) {
  ScorerConfig cfg;
  apply_config(cfg, config_file(a.common));
  if (a.context) {
    const auto c = parse_context(*a.context);
    if (!c) throw UsageError("--context: unknown configuration '" + *a.context + "'");
    cfg.context = *c;
  }
  if (a.prompt_specific) cfg.prompt_specific = true;
  if (a.folds) cfg.folds = *a.folds;
  cfg.validate();
  const std::uint64_t seed = resolve_seed(a.common);
  const auto flags = cfg.flags();

  std::size_t skipped = 0;
  const auto records = load_essays(a.inputs.data, skipped, err);
  AesDataset data;
  data.prompts = load_prompts(a.inputs.prompts);
  if (flags.prompt) {
    if (!a.inputs.prompts) throw UsageError("this context needs prompt texts (--prompts)");
    for (const auto& r : records) {
      if (!data.prompts.count(r.essay_set)) throw UsageError("no prompt for essay set " + std::to_string(r.essay_set));
    }
  }
  data.examples = annotate(records, flags, a.inputs, a.common.workers);
  const fs::path dir = out_dir(a.common);

  const auto rep = train_aes(data, cfg, seed, a.common.workers);

  nlohmann::ordered_json manifest;
  manifest["command"] = "score-train";
  manifest["inputs"] = inputs_json(a.inputs);
  manifest["skipped_rows"] = skipped;
  const auto body = aes_manifest(rep, data.examples);
  for (const auto& [k, v] : body.items()) manifest[k] = v;
  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (const auto* r : rep.best_runs()) {
    const std::string name = r->essay_set ? "model-set" + std::to_string(*r->essay_set) + ".ckpt" : "model.ckpt";
    save_scorer(dir / name, r->model);
    models.push_back({{"file", name},
                      {"essay_set", r->essay_set ? nlohmann::ordered_json(*r->essay_set) : nlohmann::ordered_json(nullptr)},
                      {"fold", r->fold},
                      {"seed", r->seed}});
  }
  manifest["models"] = models;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  const std::string label = to_string(cfg.context) + (cfg.prompt_specific ? " (prompt-specific)" : "");
  const std::string table = qwk_table_tsv(label, rep.per_set, rep.mean);
  write_file(dir / "qwk.tsv", table);
  out << table;
  return 0;
}

// ------------------------------------------------------------------ score-eval

struct ScoreEvalArgs {
  Common common;
  ScoreInputs inputs;
  std::vector<std::string> models;
};

inline int score_eval(const ScoreEvalArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<ScorerModel> models;
  for (const auto& p : a.models) {
    if (!fs::exists(p)) throw UsageError("--model: no such checkpoint " + p);
    models.push_back(load_scorer(p));
  }
  const auto ctx = models.front().config.context;
  for (const auto& m : models)
    if (m.config.context != ctx) throw UsageError("all --model checkpoints must share one context");
  std::map<std::optional<int>, std::size_t> owner;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!owner.emplace(models[i].essay_set, i).second) throw UsageError("two --model checkpoints cover the same sets");
  }
  if (owner.count(std::nullopt) && owner.size() > 1) {
    throw UsageError("a model trained on all sets cannot be mixed with prompt-specific models");
  }

  std::size_t skipped_rows = 0;
  const auto records = load_essays(a.inputs.data, skipped_rows, err);
  const auto examples = annotate(records, flags_of(ctx), a.inputs, a.common.workers);
  const fs::path dir = out_dir(a.common);

  std::vector<int> pred, gold, sets;
  std::vector<long long> ids;
  std::size_t unscored = 0;
  std::vector<std::vector<AesExample>> per_model(models.size());
  for (const auto& x : examples) {
    auto it = owner.find(std::nullopt);
    if (it == owner.end()) it = owner.find(x.record.essay_set);
    if (it == owner.end() || !models[it->second].scaler.knows(x.record.essay_set)) {
      ++unscored;
      continue;
    }
    per_model[it->second].push_back(x);
  }
  std::string rows = "essay_id\tessay_set\tgold\tpredicted\n";
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto p = predict_all(models[i], per_model[i], a.common.workers);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const auto& r = per_model[i][k].record;
      pred.push_back(p[k]);
      gold.push_back(r.resolved_score);
      sets.push_back(r.essay_set);
      ids.push_back(r.essay_id);
      rows += std::to_string(r.essay_id) + "\t" + std::to_string(r.essay_set) + "\t" +
              std::to_string(r.resolved_score) + "\t" + std::to_string(p[k]) + "\n";
    }
  }
  if (pred.empty()) throw UsageError("no essay belongs to a set the model(s) were trained on");
  const auto q = qwk_by_set(pred, gold, sets);

  nlohmann::ordered_json j;
  j["command"] = "score-eval";
  j["inputs"] = inputs_json(a.inputs);
  j["models"] = a.models;
  j["context"] = to_string(ctx);
  j["skipped_rows"] = skipped_rows;
  j["unscored_essays"] = unscored;
  j["qwk"] = qwk_json(q.per_set);
  j["mean_qwk"] = q.mean;
  j["qwk_table"] = {{"columns", qwk_table_columns()},
                    {"rows", nlohmann::ordered_json::array({qwk_table_row(to_string(ctx), q.per_set, q.mean)})}};
  write_file(dir / "eval.json", j.dump(2) + "\n");
  write_file(dir / "predictions.tsv", rows);
  const std::string table = qwk_table_tsv(to_string(ctx), q.per_set, q.mean);
  write_file(dir / "qwk.tsv", table);
  out << table;
  return 0;
}

// ------------------------------------------------------------------ analyze-features

struct AnalyzeArgs {
  Common common;
  ScoreInputs inputs;
};

inline int analyze_features(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  std::size_t skipped = 0;
  const auto records = load_essays(a.inputs.data, skipped, err);
  std::optional<SegmenterModel> edu, ac;
  if (a.inputs.edu) edu = load_segmenter_as(*a.inputs.edu, SpanKind::edu, "--edu");
  if (a.inputs.ac) {
    ac = load_segmenter_as(*a.inputs.ac, SpanKind::ac, "--ac");
    require_decoration_source(*ac, edu ? &*edu : nullptr);
  }
  std::vector<std::string> texts;
  for (const auto& r : records) texts.push_back(r.text);
  std::vector<std::vector<Span>> no_spans(records.size());
  const auto edus = edu ? segment_all(*edu, texts, nullptr, a.common.workers) : no_spans;
  const auto acs = ac ? segment_all(*ac, texts, edu ? &*edu : nullptr, a.common.workers) : no_spans;
  const auto scaler = fit_prompt_scaler(records);
  std::vector<AnalysisRow> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto f = extract_features(r.text, acs[i], edus[i]);
    rows.push_back({static_cast<double>(f.ac_count), static_cast<double>(f.edu_count),
                    static_cast<double>(r.essay_set), static_cast<double>(f.char_length),
                    static_cast<double>(f.word_count), static_cast<double>(r.resolved_score),
                    scaler.scale(r.essay_set, r.resolved_score)});
  }
  const fs::path dir = out_dir(a.common);
  const std::string csv = correlation_csv(rows);
  write_file(dir / "correlations.csv", csv);
  out << csv;
  return 0;
}

}  // namespace cli

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-augmented essay scoring: span labelling, scoring and feature analysis."};
  app.name("aeslab");
  app.require_subcommand(1);

  auto add_common = [](CLI::App* sub, cli::Common& c, bool needs_config = true) {
    if (needs_config) sub->add_option("--config", c.config, "key = value configuration file");
    sub->add_option("--seed", c.seed, "run seed (falls back to AESLAB_SEED, then 0)");
    sub->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out, "output directory")->required();
  };

  cli::SegmentTrainArgs st;
  auto* s1 = app.add_subcommand("segment-train", "train an EDU or AC span labeller");
  add_common(s1, st.common);
  s1->add_option("--data", st.data, "corpus directory (NAME.txt with NAME.edus or NAME.spans)")->required();
  s1->add_option("--kind", st.kind, "edu or ac")->required();
  s1->add_option("--edu", st.edu, "EDU segmenter checkpoint marking boundaries for an AC model");

  cli::SegmentArgs sg;
  auto* s2 = app.add_subcommand("segment", "write span files for text documents");
  add_common(s2, sg.common, false);
  s2->add_option("--model", sg.model, "segmenter checkpoint")->required();
  s2->add_option("--input", sg.input, "text file or directory of .txt files")->required();
  s2->add_option("--kind", sg.kind, "expected checkpoint kind (edu or ac)");
  s2->add_option("--edu", sg.edu, "EDU segmenter for AC models that mark EDU boundaries");

  auto add_inputs = [](CLI::App* sub, cli::ScoreInputs& in) {
    sub->add_option("--data", in.data, "ASAP-format TSV")->required();
    sub->add_option("--prompts", in.prompts, "prompt texts, set<TAB>text per line");
    sub->add_option("--edu", in.edu, "EDU segmenter checkpoint");
    sub->add_option("--ac", in.ac, "AC segmenter checkpoint");
  };

  cli::ScoreTrainArgs tr;
  auto* s3 = app.add_subcommand("score-train", "cross-validate and train the essay scorer");
  add_common(s3, tr.common);
  add_inputs(s3, tr.inputs);
  s3->add_option("--context", tr.context, "none, mr, mr+prompt, mr+edu, mr+ac, mr+ac+prompt, mr+ac+prompt+features");
  s3->add_flag("--prompt-specific", tr.prompt_specific, "one model per essay set");
  s3->add_option("--folds", tr.folds, "cross-validation folds");

  cli::ScoreEvalArgs ev;
  auto* s4 = app.add_subcommand("score-eval", "score essays with trained scorer checkpoints");
  add_common(s4, ev.common, false);
  add_inputs(s4, ev.inputs);
  s4->add_option("--model", ev.models, "scorer checkpoint(s)")->required();

  cli::AnalyzeArgs an;
  auto* s5 = app.add_subcommand("analyze-features", "correlation matrix of essay features and scores");
  add_common(s5, an.common, false);
  add_inputs(s5, an.inputs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "aeslab: " << e.what() << "\n";
    if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << "run 'aeslab " << sub->get_name() << " --help' for usage\n";
    }
    return 2;
  }

  try {
    if (s1->parsed()) return cli::segment_train(st, out);
    if (s2->parsed()) return cli::segment_cmd(sg, out);
    if (s3->parsed()) return cli::score_train(tr, out, err);
    if (s4->parsed()) return cli::score_eval(ev, out, err);
    if (s5->parsed()) return cli::analyze_features(an, out, err);
  } catch (const UsageError& e) {
    err << "aeslab: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "aeslab: config: " << e.what() << "\n";
    return 2;
  } catch (const LoadError& e) {
    err << "aeslab: checkpoint: " << e.what() << "\n";
    return 2;
  } catch (const StratificationError& e) {
    err << "aeslab: folds: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    err << "aeslab: input: " << e.what() << "\n";
    return 2;
  } catch (const AlignmentError& e) {
    err << "aeslab: input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "aeslab: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace aeslab
