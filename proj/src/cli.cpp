#include "condet/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "condet/corpus.hpp"
#include "condet/encoder.hpp"
#include "condet/error.hpp"
#include "condet/log.hpp"
#include "condet/metrics.hpp"
#include "condet/trainer.hpp"
#include "condet/transform.hpp"
#include "condet/zeroshot.hpp"

namespace condet {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("invalid seed '" + item + "' in --seeds");
    }
  }
  if (seeds.empty()) throw UsageError("--seeds needs at least one seed");
  return seeds;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// A directory written by `split` (train/val/test.jsonl) or a single JSONL file
// that is split here.
Corpus load_dataset(const fs::path& path, const std::string& domain, const SplitFractions& fractions,
                    std::uint64_t split_seed) {
  if (!fs::exists(path)) throw DataError("no such file or directory: " + path.string());
  if (!fs::is_directory(path)) return split(load_corpus(path, domain), fractions, split_seed);

  Corpus all;
  all.domain = domain;
  std::set<std::string> ids;
  for (Split s : {Split::train, Split::val, Split::test}) {
    const fs::path file = path / (std::string(to_string(s)) + ".jsonl");
    if (!fs::exists(file)) throw DataError("missing split file " + file.string());
    Corpus part = load_corpus(file, domain);
    for (auto& doc : part.documents) {
      if (!ids.insert(doc.id).second) throw DataError(file.string() + ": id '" + doc.id + "' appears in more than one split");
      all.documents.push_back(std::move(doc));
      all.assignment.push_back(s);
    }
  }
  return all;
}

Corpus select_split(const Corpus& corpus, const std::string& which) {
  if (which == "all") {
    Corpus c = corpus;
    c.assignment.clear();
    return c;
  }
  return corpus.select(parse_split(which));
}

// Train flags only override the config when given on the command line, so the
// precedence is preset < --config file < flags.
class Overrides {
 public:
  template <class T, class Apply>
  void add(CLI::App* app, const std::string& flag, T initial, const std::string& help, Apply apply) {
    auto value = std::make_shared<T>(std::move(initial));
    CLI::Option* opt = app->add_option(flag, *value, help)->capture_default_str();
    items_.push_back({opt, [value, apply](TrainConfig& c) { apply(c, *value); }});
  }

  void apply(TrainConfig& config) const {
    for (const auto& [opt, fn] : items_) {
      if (opt->count() > 0) fn(config);
    }
  }

 private:
  std::vector<std::pair<CLI::Option*, std::function<void(TrainConfig&)>>> items_;
};

struct TrainFlags {
  std::string preset = "reference";
  std::string config_path;
  std::string seeds = "1,2,3";
  std::string fractions = "0.8,0.1,0.1";
  std::uint64_t split_seed = 0;
  std::string thesaurus;
  std::size_t threads = 1;
  Overrides overrides;

  void attach(CLI::App* app, bool with_ablation) {
    const TrainConfig d;
    app->add_option("--preset", preset, "Hyperparameter preset: reference (lr 2e-5) or scratch (lr 1e-3)")
        ->capture_default_str();
    app->add_option("--config", config_path, "JSON config file applied on top of the preset");
    app->add_option("--seeds", seeds, "Comma-separated training seeds")->capture_default_str();
    app->add_option("--fractions", fractions, "train,val,test fractions when a corpus file needs splitting")
        ->capture_default_str();
    app->add_option("--split-seed", split_seed, "Seed for splitting corpus files")->capture_default_str();
    app->add_option("--thesaurus", thesaurus, "Thesaurus TSV (word, POS, comma-separated synonyms)");
    app->add_option("--threads", threads, "Maximum number of seeds trained in parallel")->capture_default_str();

    auto& o = overrides;
    o.add(app, "--lr", d.learning_rate, "Adam learning rate", [](TrainConfig& c, double v) { c.learning_rate = v; });
    o.add(app, "--epochs", d.epochs, "Maximum epochs", [](TrainConfig& c, std::size_t v) { c.epochs = v; });
    o.add(app, "--batch-size", d.batch_size, "Source documents per batch",
          [](TrainConfig& c, std::size_t v) { c.batch_size = v; });
    o.add(app, "--weight-decay", d.weight_decay, "Decoupled weight decay",
          [](TrainConfig& c, double v) { c.weight_decay = v; });
    o.add(app, "--patience", d.patience, "Early-stopping patience in epochs (source-validation CE)",
          [](TrainConfig& c, std::size_t v) { c.patience = v; });
    o.add(app, "--lambda1", d.loss.lambda1, "Weight between classification and contrastive terms",
          [](TrainConfig& c, double v) { c.loss.lambda1 = v; });
    o.add(app, "--lambda2", d.loss.lambda2, "MMD weight", [](TrainConfig& c, double v) { c.loss.lambda2 = v; });
    o.add(app, "--temperature", d.loss.temperature, "Contrastive temperature",
          [](TrainConfig& c, double v) { c.loss.temperature = v; });
    o.add(app, "--kernel", std::string(to_string(d.loss.kernel.kind)), "MMD kernel: rbf or linear",
          [](TrainConfig& c, const std::string& v) { c.loss.kernel.kind = parse_kernel_kind(v); });
    o.add(app, "--bandwidth", std::string("median"), "RBF bandwidth, or median for the median heuristic",
          [](TrainConfig& c, const std::string& v) {
            if (v == "median") {
              c.loss.kernel.bandwidth.reset();
              return;
            }
            try {
              c.loss.kernel.bandwidth = std::stod(v);
            } catch (const std::exception&) {
              throw UsageError("invalid --bandwidth '" + v + "'");
            }
          });
    o.add(app, "--vocab-size", d.dims.vocab, "Hashed vocabulary size", [](TrainConfig& c, std::size_t v) {
      c.dims.vocab = v;
      c.tokenizer.vocab_size = v;
    });
    o.add(app, "--max-seq-len", d.tokenizer.max_seq_len, "Tokens kept per document",
          [](TrainConfig& c, std::size_t v) { c.tokenizer.max_seq_len = v; });
    o.add(app, "--embed-dim", d.dims.embed, "Token embedding size", [](TrainConfig& c, std::size_t v) { c.dims.embed = v; });
    o.add(app, "--hidden-dim", d.dims.hidden, "Encoder output size d_h",
          [](TrainConfig& c, std::size_t v) { c.dims.hidden = v; });
    o.add(app, "--proj-hidden-dim", d.dims.proj_hidden, "Projection head hidden size",
          [](TrainConfig& c, std::size_t v) { c.dims.proj_hidden = v; });
    o.add(app, "--proj-dim", d.dims.proj, "Projection size d_p", [](TrainConfig& c, std::size_t v) { c.dims.proj = v; });
    o.add(app, "--transform", std::string(to_string(d.transform.kind)), "View transform: synonym, swap or crop",
          [](TrainConfig& c, const std::string& v) { c.transform.kind = parse_transform_kind(v); });
    o.add(app, "--rate", d.transform.rate, "Fraction of words perturbed by the transform",
          [](TrainConfig& c, double v) { c.transform.rate = v; });
    o.add(app, "--transform-seed", d.transform.seed, "Seed mixed into every view",
          [](TrainConfig& c, std::uint64_t v) { c.transform.seed = v; });
    if (with_ablation) {
      o.add(app, "--ablation", std::string(to_string(d.ablation)),
            "full, no_ce, no_contrast, no_mmd or source_only",
            [](TrainConfig& c, const std::string& v) { c.ablation = parse_ablation(v); });
    }
  }

  TrainConfig build() const {
    TrainConfig c = TrainConfig::preset(parse_preset(preset));
    if (!config_path.empty()) c = TrainConfig::load(config_path, c);
    overrides.apply(c);
    c.seeds = parse_seed_list(seeds);
    c.validate();
    return c;
  }

  Thesaurus load_thesaurus(const TrainConfig& c) const {
    if (!thesaurus.empty()) return Thesaurus::load(thesaurus);
    if (c.transform.kind == TransformKind::synonym_replacement) {
      throw UsageError("--thesaurus is required for the synonym transform");
    }
    return Thesaurus{};
  }
};

int sweep_exit_code(const SeedSweep& sweep) {
  bool numerical = false;
  bool failed = false;
  for (const auto& o : sweep.outcomes) {
    if (!o.run) {
      failed = true;
      numerical = numerical || o.numerical_failure;
    }
  }
  if (!failed) return 0;
  return numerical ? 4 : 3;
}

void print_summary(const std::string& label, const std::optional<SeedSummary>& s) {
  if (!s) return;
  std::ostringstream line;
  line << label << ": F1 " << format_double(100.0 * s->mean_f1) << " (sd " << format_double(100.0 * s->std_f1) << ")";
  if (s->mean_auroc) line << ", AUROC " << format_double(*s->mean_auroc);
  line << " over " << s->runs.size() << " seed(s)";
  std::cout << line.str() << '\n';
}

int cmd_split(const std::string& input, const std::string& domain, const std::string& fractions,
              std::uint64_t seed, const std::string& out_dir) {
  const Corpus c = split(load_corpus(input, domain), parse_fractions(fractions), seed);
  fs::create_directories(out_dir);
  for (Split s : {Split::train, Split::val, Split::test}) {
    save_corpus(c.select(s), fs::path(out_dir) / (std::string(to_string(s)) + ".jsonl"));
  }
  std::cout << "train " << c.count(Split::train) << ", val " << c.count(Split::val) << ", test "
            << c.count(Split::test) << '\n';
  return 0;
}

struct TransformArgs {
  std::string input, output, thesaurus, domain = "corpus", kind = "synonym";
  double rate = 0.10;
  double crop_fraction = 0.9;
  std::uint64_t seed = 0;
};

int cmd_transform(const TransformArgs& a) {
  TransformConfig cfg;
  cfg.kind = parse_transform_kind(a.kind);
  cfg.rate = a.rate;
  cfg.crop_fraction = a.crop_fraction;
  cfg.seed = a.seed;
  cfg.validate();
  Thesaurus thesaurus;
  if (!a.thesaurus.empty()) {
    thesaurus = Thesaurus::load(a.thesaurus);
  } else if (cfg.kind == TransformKind::synonym_replacement) {
    throw UsageError("--thesaurus is required for the synonym transform");
  }
  Corpus c = load_corpus(a.input, a.domain);
  for (auto& doc : c.documents) {
    TransformConfig per_doc = cfg;
    per_doc.seed = document_seed(cfg.seed, doc.id);
    doc.text = apply_transform(doc.text, thesaurus, per_doc);
  }
  if (fs::path(a.output).has_parent_path()) fs::create_directories(fs::path(a.output).parent_path());
  save_corpus(c, a.output);
  return 0;
}

struct TrainArgs {
  std::string source, target, source_domain = "source", target_domain = "target", out_dir;
  TrainFlags flags;
};

int cmd_train(TrainArgs& a) {
  const TrainConfig config = a.flags.build();
  const bool source_only = config.ablation == Ablation::source_only;
  if (!source_only && a.target.empty()) throw UsageError("--target is required unless --ablation source_only");
  const Thesaurus thesaurus = a.flags.load_thesaurus(config);
  const SplitFractions fr = parse_fractions(a.flags.fractions);
  const Corpus source = load_dataset(a.source, a.source_domain, fr, a.flags.split_seed);
  std::optional<Corpus> target;
  if (!source_only) target = load_dataset(a.target, a.target_domain, fr, a.flags.split_seed);

  SeedSweep sweep = run_seeds(source, target ? &*target : nullptr, config, thesaurus, a.flags.threads);
  const fs::path out(a.out_dir);
  fs::create_directories(out);
  write_text(out / "config.json", config.to_json().dump(2) + "\n");
  for (auto& o : sweep.outcomes) {
    if (o.run) write_run(*o.run, out / ("seed_" + std::to_string(o.seed)));
  }
  write_text(out / "report.json", sweep.to_json().dump(2) + "\n");
  print_summary("source test", sweep.source_summary);
  print_summary("target test", sweep.target_summary);
  return sweep_exit_code(sweep);
}

struct EvalArgs {
  std::string checkpoint, corpus, domain = "target", which = "test", fractions = "0.8,0.1,0.1", out, compare, task;
  std::uint64_t split_seed = 0;
  std::size_t max_seq_len = TokenizerConfig{}.max_seq_len;
  double threshold = 0.5;
  bool macro = false;
};

int cmd_eval(const EvalArgs& a) {
  const ModelParams params = load_checkpoint(a.checkpoint);
  TokenizerConfig tok;
  tok.vocab_size = params.dims().vocab;
  tok.max_seq_len = a.max_seq_len;
  Corpus corpus;
  if (a.which == "all") {
    corpus = fs::is_directory(a.corpus) ? select_split(load_dataset(a.corpus, a.domain, {}, 0), "all")
                                        : load_corpus(a.corpus, a.domain);
  } else {
    corpus = select_split(load_dataset(a.corpus, a.domain, parse_fractions(a.fractions), a.split_seed), a.which);
  }
  const MetricsReport report = evaluate_model(params, corpus, tok, a.threshold, a.macro).report;
  ordered_json j = report.to_json();
  std::cout << "F1 " << format_double(100.0 * report.f1);
  if (report.auroc) std::cout << ", AUROC " << format_double(*report.auroc);
  std::cout << " on " << report.n << " documents\n";
  if (!a.compare.empty()) {
    std::ifstream in(a.compare);
    if (!in) throw DataError("cannot open " + a.compare);
    MetricsReport baseline;
    try {
      baseline = MetricsReport::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(a.compare + ": " + e.what());
    }
    const ComparisonRow row = compare_runs(baseline, report, a.task);
    std::cout << format_comparison({row});
    j["comparison"] = {{"task", row.task},
                       {"source_only_f1", row.source_only_f1},
                       {"conda_f1", row.conda_f1},
                       {"delta_f1", row.delta_f1}};
  }
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  return 0;
}

struct ZeroshotArgs {
  std::string records, labels, out, report, mode = "gltr";
  bool normalized = false;
};

int cmd_zeroshot(const ZeroshotArgs& a) {
  if (a.mode != "gltr" && a.mode != "detectgpt") throw UsageError("--mode must be gltr or detectgpt");
  const RecordSet records = load_records(a.records);
  std::map<std::string, int> labels;
  if (!a.labels.empty()) {
    for (const auto& doc : load_corpus(a.labels, "labels").documents) {
      if (doc.label) labels[doc.id] = *doc.label;
    }
  }

  std::vector<std::string> columns;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> scores;  // per column
  if (a.mode == "gltr") {
    if (records.logprob.empty()) throw DataError(a.records + ": no token log-probability records");
    columns = {"log_prob", "rank", "log_rank", "entropy"};
    scores.resize(4);
    for (const auto& r : records.logprob) {
      const GltrScores g = gltr_scores(r);
      ids.push_back(r.id);
      scores[0].push_back(g.log_prob);
      scores[1].push_back(g.rank);
      scores[2].push_back(g.log_rank);
      scores[3].push_back(g.entropy);
    }
  } else {
    if (records.perturbation.empty()) throw DataError(a.records + ": no perturbation records");
    columns = {a.normalized ? "detectgpt_normalized" : "detectgpt"};
    scores.resize(1);
    for (const auto& r : records.perturbation) {
      ids.push_back(r.id);
      scores[0].push_back(detectgpt_score(r, a.normalized));
    }
  }

  std::ostringstream csv;
  csv << "id,label";
  for (const auto& c : columns) csv << ',' << c;
  csv << '\n';
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = labels.find(ids[i]);
    std::string id = ids[i];
    if (id.find_first_of(",\"\n") != std::string::npos) {
      std::string q = "\"";
      for (char ch : id) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      id = q + "\"";
    }
    csv << id << ',' << (it != labels.end() ? std::to_string(it->second) : "");
    for (const auto& col : scores) csv << ',' << format_double(col[i]);
    csv << '\n';
    if (it != labels.end()) labeled.push_back(i);
  }
  if (!a.out.empty()) write_text(a.out, csv.str());
  else std::cout << csv.str();

  ordered_json j;
  j["mode"] = a.mode;
  j["normalized"] = a.normalized;
  j["n"] = ids.size();
  j["n_labeled"] = labeled.size();
  j["auroc"] = ordered_json::object();
  std::set<int> classes;
  for (std::size_t i : labeled) classes.insert(labels[ids[i]]);
  if (labeled.size() < ids.size()) log::warn(std::to_string(ids.size() - labeled.size()) + " record(s) have no label");
  if (classes.size() == 2) {
    std::vector<int> y;
    for (std::size_t i : labeled) y.push_back(labels[ids[i]]);
    std::ostream& table = a.out.empty() ? std::cerr : std::cout;
    table << "detector            AUROC\n";
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::vector<double> s;
      for (std::size_t i : labeled) s.push_back(scores[c][i]);
      const double value = auroc(s, y);
      j["auroc"][columns[c]] = value;
      std::string name = columns[c];
      name.resize(std::max<std::size_t>(name.size(), 20), ' ');
      table << name << format_double(value) << '\n';
    }
  } else {
    log::warn("AUROC skipped: labels missing or only one class present");
    for (const auto& c : columns) j["auroc"][c] = nullptr;
  }
  if (!a.report.empty()) write_text(a.report, j.dump(2) + "\n");
  return 0;
}

struct ExportArgs {
  std::string checkpoint, corpus, domain = "corpus", out;
  std::size_t max_seq_len = TokenizerConfig{}.max_seq_len;
};

int cmd_export(const ExportArgs& a) {
  const ModelParams params = load_checkpoint(a.checkpoint);
  TokenizerConfig tok;
  tok.vocab_size = params.dims().vocab;
  tok.max_seq_len = a.max_seq_len;
  const Corpus corpus = load_corpus(a.corpus, a.domain);
  if (a.out.empty()) throw UsageError("--out is required");
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  export_embeddings(params, corpus, tok, fs::path(a.out));
  return 0;
}

struct AblateArgs {
  std::string source, targets, source_domain = "source", out_dir;
  TrainFlags flags;
};

int cmd_ablate(AblateArgs& a) {
  TrainConfig base = a.flags.build();
  const Thesaurus thesaurus = a.flags.load_thesaurus(base);
  const SplitFractions fr = parse_fractions(a.flags.fractions);
  const Corpus source = load_dataset(a.source, a.source_domain, fr, a.flags.split_seed);
  const auto target_paths = split_commas(a.targets);
  if (target_paths.empty()) throw UsageError("--targets needs at least one corpus");

  AblationTable table;
  const std::vector<Ablation> variants = {Ablation::no_ce, Ablation::no_contrast, Ablation::no_mmd, Ablation::full};
  for (Ablation v : variants) table.rows.push_back({v, {}});
  ordered_json report;
  report["config"] = base.to_json();
  report["targets"] = ordered_json::array();
  int code = 0;
  for (const auto& tp : target_paths) {
    const std::string name = fs::path(tp).stem().string();
    table.targets.push_back(name);
    const Corpus target = load_dataset(tp, name, fr, a.flags.split_seed);
    ordered_json tj;
    tj["target"] = name;
    for (auto& row : table.rows) {
      TrainConfig cfg = base;
      cfg.ablation = row.variant;
      cfg.validate();
      const SeedSweep sweep = run_seeds(source, &target, cfg, thesaurus, a.flags.threads);
      if (!sweep.target_summary) {
        throw DataError("no target test metrics for " + name + " / " + std::string(to_string(row.variant)) +
                        " (target needs a labeled test split and at least one successful seed)");
      }
      code = std::max(code, sweep_exit_code(sweep));
      row.cells.push_back(*sweep.target_summary);
      tj[std::string(to_string(row.variant))] = sweep.to_json();
    }
    report["targets"].push_back(std::move(tj));
  }
  const fs::path out(a.out_dir);
  write_text(out / "ablation.txt", format_ablation_table(table));
  write_text(out / "ablation.csv", ablation_csv(table));
  write_text(out / "report.json", report.dump(2) + "\n");
  std::cout << format_ablation_table(table);
  return code;
}

int cmd_compare(const std::vector<std::string>& pairs, const std::string& out) {
  std::vector<ComparisonRow> rows;
  for (const auto& p : pairs) {
    // task=source_only.json,conda.json
    const auto eq = p.find('=');
    const std::string task = eq == std::string::npos ? "" : p.substr(0, eq);
    const auto files = split_commas(eq == std::string::npos ? p : p.substr(eq + 1));
    if (files.size() != 2) throw UsageError("--pair expects task=source_only.json,conda.json");
    MetricsReport reports[2];
    for (int i = 0; i < 2; ++i) {
      std::ifstream in(files[i]);
      if (!in) throw DataError("cannot open " + files[i]);
      try {
        reports[i] = MetricsReport::from_json(nlohmann::json::parse(in));
      } catch (const nlohmann::json::exception& e) {
        throw DataError(files[i] + ": " + e.what());
      }
    }
    rows.push_back(compare_runs(reports[0], reports[1], task));
  }
  std::cout << format_comparison(rows);
  if (!out.empty()) write_text(out, comparison_csv(rows));
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Domain-adaptive detection of AI-generated text", "condet"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "condet 0.1.0");
  int verbosity = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbosity, "More logging (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Only log errors");

  std::string split_input, split_domain = "corpus", split_fractions = "0.8,0.1,0.1", split_out;
  std::uint64_t split_seed = 0;
  auto* split_cmd = app.add_subcommand("split", "Split a JSONL corpus into train/val/test files");
  split_cmd->add_option("--input", split_input, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--domain", split_domain, "Domain tag assigned to every document")->capture_default_str();
  split_cmd->add_option("--fractions", split_fractions, "train,val,test fractions")->capture_default_str();
  split_cmd->add_option("--seed", split_seed, "Split seed")->capture_default_str();
  split_cmd->add_option("--out-dir", split_out, "Output directory")->required();

  TransformArgs ta;
  auto* tr_cmd = app.add_subcommand("transform", "Write a perturbed copy of a corpus");
  tr_cmd->add_option("--input", ta.input, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  tr_cmd->add_option("--output", ta.output, "Output JSONL")->required();
  tr_cmd->add_option("--thesaurus", ta.thesaurus, "Thesaurus TSV (required for synonym)");
  tr_cmd->add_option("--domain", ta.domain, "Domain tag")->capture_default_str();
  tr_cmd->add_option("--kind", ta.kind, "synonym, swap or crop")->capture_default_str();
  tr_cmd->add_option("--rate", ta.rate, "Fraction of words perturbed (per sentence for synonym)")->capture_default_str();
  tr_cmd->add_option("--crop-fraction", ta.crop_fraction, "Fraction of words kept by crop")->capture_default_str();
  tr_cmd->add_option("--seed", ta.seed, "Transform seed")->capture_default_str();

  TrainArgs tra;
  auto* train_cmd = app.add_subcommand("train", "Train ConDA or a source-only baseline, one run per seed");
  train_cmd->add_option("--source", tra.source, "Labeled source corpus (JSONL file or split directory)")->required();
  train_cmd->add_option("--target", tra.target, "Unlabeled target corpus (JSONL file or split directory)");
  train_cmd->add_option("--source-domain", tra.source_domain, "Source domain tag")->capture_default_str();
  train_cmd->add_option("--target-domain", tra.target_domain, "Target domain tag")->capture_default_str();
  train_cmd->add_option("--out-dir", tra.out_dir, "Output directory")->required();
  tra.flags.attach(train_cmd, true);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled corpus");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "Model checkpoint")->required();
  eval_cmd->add_option("--corpus", ea.corpus, "Labeled corpus (JSONL file or split directory)")->required();
  eval_cmd->add_option("--domain", ea.domain, "Domain tag")->capture_default_str();
  eval_cmd->add_option("--split", ea.which, "train, val, test or all")->capture_default_str();
  eval_cmd->add_option("--fractions", ea.fractions, "Fractions used when splitting a corpus file")->capture_default_str();
  eval_cmd->add_option("--split-seed", ea.split_seed, "Seed used when splitting a corpus file")->capture_default_str();
  eval_cmd->add_option("--max-seq-len", ea.max_seq_len, "Tokens kept per document")->capture_default_str();
  eval_cmd->add_option("--threshold", ea.threshold, "Probability threshold for the AI class")->capture_default_str();
  eval_cmd->add_flag("--macro", ea.macro, "Report macro F1 instead of positive-class F1");
  eval_cmd->add_option("--out", ea.out, "Report JSON path");
  eval_cmd->add_option("--compare", ea.compare, "Source-only report JSON; prints the F1 difference");
  eval_cmd->add_option("--task", ea.task, "Task label for the comparison row");

  ZeroshotArgs za;
  auto* zs_cmd = app.add_subcommand("zeroshot", "Score records with GLTR statistics or DetectGPT");
  zs_cmd->add_option("--records", za.records, "Log-probability or perturbation JSONL")->required();
  zs_cmd->add_option("--labels", za.labels, "Corpus JSONL supplying labels by id");
  zs_cmd->add_option("--mode", za.mode, "gltr or detectgpt")->capture_default_str();
  zs_cmd->add_flag("--normalized", za.normalized, "Divide DetectGPT scores by the perturbation std");
  zs_cmd->add_option("--out", za.out, "Score CSV path (stdout when omitted)");
  zs_cmd->add_option("--report", za.report, "AUROC JSON path");

  ExportArgs xa;
  auto* ex_cmd = app.add_subcommand("export-embeddings", "Write h and z vectors for every document as CSV");
  ex_cmd->add_option("--checkpoint", xa.checkpoint, "Model checkpoint")->required();
  ex_cmd->add_option("--corpus", xa.corpus, "Corpus JSONL")->required();
  ex_cmd->add_option("--domain", xa.domain, "Domain tag")->capture_default_str();
  ex_cmd->add_option("--max-seq-len", xa.max_seq_len, "Tokens kept per document")->capture_default_str();
  ex_cmd->add_option("--out", xa.out, "CSV path")->required();

  AblateArgs aa;
  auto* ab_cmd = app.add_subcommand("ablate", "Train every loss ablation per target and tabulate target F1/AUROC");
  ab_cmd->add_option("--source", aa.source, "Labeled source corpus")->required();
  ab_cmd->add_option("--targets", aa.targets, "Comma-separated target corpora (labeled test split needed)")->required();
  ab_cmd->add_option("--source-domain", aa.source_domain, "Source domain tag")->capture_default_str();
  ab_cmd->add_option("--out-dir", aa.out_dir, "Output directory")->required();
  aa.flags.attach(ab_cmd, false);

  std::vector<std::string> pairs;
  std::string compare_out;
  auto* cmp_cmd = app.add_subcommand("compare", "Tabulate source-only vs ConDA F1 from eval reports");
  cmp_cmd->add_option("--pair", pairs, "task=source_only.json,conda.json (repeatable)")->required();
  cmp_cmd->add_option("--out", compare_out, "CSV path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  log::set_level(quiet ? log::Level::error : verbosity > 0 ? log::Level::debug : log::Level::info);
  try {
    if (*split_cmd) return cmd_split(split_input, split_domain, split_fractions, split_seed, split_out);
    if (*tr_cmd) return cmd_transform(ta);
    if (*train_cmd) return cmd_train(tra);
    if (*eval_cmd) return cmd_eval(ea);
    if (*zs_cmd) return cmd_zeroshot(za);
    if (*ex_cmd) return cmd_export(xa);
    if (*ab_cmd) return cmd_ablate(aa);
    if (*cmp_cmd) return cmd_compare(pairs, compare_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}

}  // namespace condet
