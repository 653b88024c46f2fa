#include "condet/trainer.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include "condet/error.hpp"
#include "condet/log.hpp"
#include "condet/objective.hpp"
#include "condet/random.hpp"

namespace condet {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

TrainRunResult run_loop(const Corpus& source, const Corpus* target, std::uint64_t seed,
                        const TrainConfig& config, Ablation ablation, const Thesaurus& thesaurus) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  if (!source.is_split()) throw DataError("source corpus has no split assignment");
  const Corpus source_train = source.select(Split::train);
  const Corpus source_val = source.select(Split::val);
  if (source_train.empty()) throw DataError("source train split is empty");
  if (source_val.empty()) throw DataError("source validation split is empty");
  if (!source_train.fully_labeled() || !source_val.fully_labeled()) {
    throw DataError("source train/val documents must all be labeled");
  }
  Corpus target_train;
  if (target != nullptr) {
    target_train = target->is_split() ? target->select(Split::train) : *target;
    if (target_train.empty()) throw DataError("target train split is empty");
  }

  const std::uint64_t data_seed = mix_seed(seed, "batches");
  TrainRunResult result;
  result.seed = seed;
  result.params = init_params(config.dims, mix_seed(seed, "init"));
  result.optimizer = AdamState::zeros(result.params.size());

  AdamOptions adam;
  adam.learning_rate = config.learning_rate;
  adam.weight_decay = config.weight_decay;

  BatchTransform transform{&thesaurus, config.transform, 0};
  transform.config.seed = mix_seed(seed, config.transform.seed);

  ModelParams params = result.params;
  AdamState state = result.optimizer;
  double best_ce = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    transform.epoch = epoch;
    const auto batches = target != nullptr
                             ? pair_batches(source_train, target_train, config.batch_size, data_seed, epoch)
                             : source_batches(source_train, config.batch_size, data_seed, epoch);
    for (const auto& batch : batches) {
      ++step;
      ObjectiveResult out;
      try {
        out = loss_and_grads(batch, params, config.tokenizer, transform, config.loss, ablation);
      } catch (const NumericalError& e) {
        throw NumericalError("diverged at step " + std::to_string(step) + ": " + e.what());
      }
      adam_step(params, out.grads, state, adam);
      round_to_f32(params.values());
      round_to_f32(state.m);
      round_to_f32(state.v);
      result.steps.push_back(out.loss);
    }

    const double val_ce = mean_ce(params, source_val, config.tokenizer, config.loss.prob_epsilon);
    if (!std::isfinite(val_ce)) throw NumericalError("non-finite validation CE after epoch " + std::to_string(epoch));
    const bool improved = val_ce < best_ce;
    result.history.push_back({epoch, val_ce, improved});
    log::debug("seed " + std::to_string(seed) + " epoch " + std::to_string(epoch) +
               " val_ce " + format_double(val_ce));
    if (improved) {
      best_ce = val_ce;
      result.params = params;
      result.optimizer = state;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Preset parse_preset(std::string_view name) {
  if (name == "reference") return Preset::reference;
  if (name == "scratch") return Preset::scratch;
  throw UsageError("unknown preset '" + std::string(name) + "' (expected reference or scratch)");
}

TrainConfig TrainConfig::preset(Preset preset) {
  TrainConfig c;
  if (preset == Preset::scratch) c.learning_rate = 1e-3;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw UsageError("learning rate must be nonnegative");
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  if (patience < 1) throw UsageError("patience must be >= 1");
  if (!(weight_decay >= 0.0)) throw UsageError("weight decay must be nonnegative");
  const auto w = ObjectiveWeights::from(loss, ablation);
  if (w.contrastive != 0.0 && batch_size < 2) {
    throw UsageError("contrastive terms need batch size >= 2");
  }
  if (dims.vocab != tokenizer.vocab_size) throw UsageError("model vocab size differs from tokenizer vocab size");
  if (dims.vocab == 0 || dims.embed == 0 || dims.hidden == 0 || dims.proj_hidden == 0 || dims.proj == 0) {
    throw UsageError("model dimensions must be positive");
  }
  if (tokenizer.max_seq_len == 0) throw UsageError("max_seq_len must be positive");
  loss.validate();
  transform.validate();
}

ordered_json TrainConfig::to_json() const {
  ordered_json j;
  j["learning_rate"] = learning_rate;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["weight_decay"] = weight_decay;
  j["patience"] = patience;
  j["seeds"] = seeds;
  j["lambda1"] = loss.lambda1;
  j["lambda2"] = loss.lambda2;
  j["temperature"] = loss.temperature;
  j["kernel"] = std::string(to_string(loss.kernel.kind));
  j["bandwidth"] = loss.kernel.bandwidth ? ordered_json(*loss.kernel.bandwidth) : ordered_json("median");
  j["prob_epsilon"] = loss.prob_epsilon;
  j["contrastive_reduction"] = loss.reduction == ContrastiveReduction::mean ? "mean" : "sum";
  j["contrastive_orientation"] =
      loss.orientation == ContrastiveOrientation::symmetric ? "symmetric" : "anchor_only";
  j["ablation"] = std::string(to_string(ablation));
  j["vocab_size"] = dims.vocab;
  j["max_seq_len"] = tokenizer.max_seq_len;
  j["embed_dim"] = dims.embed;
  j["hidden_dim"] = dims.hidden;
  j["proj_hidden_dim"] = dims.proj_hidden;
  j["proj_dim"] = dims.proj;
  j["transform"] = std::string(to_string(transform.kind));
  j["transform_rate"] = transform.rate;
  j["crop_fraction"] = transform.crop_fraction;
  j["transform_seed"] = transform.seed;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j, TrainConfig c) {
  static const std::vector<std::string> known = {
      "learning_rate", "epochs", "batch_size", "weight_decay", "patience", "seeds",
      "lambda1", "lambda2", "temperature", "kernel", "bandwidth", "prob_epsilon",
      "contrastive_reduction", "contrastive_orientation", "ablation", "vocab_size",
      "max_seq_len", "embed_dim", "hidden_dim", "proj_hidden_dim", "proj_dim", "transform",
      "transform_rate", "crop_fraction", "transform_seed", "preset"};
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  try {
    if (j.contains("preset")) {
      const TrainConfig p = preset(parse_preset(j["preset"].get<std::string>()));
      c.learning_rate = p.learning_rate;
    }
    read_key(j, "learning_rate", c.learning_rate);
    read_key(j, "epochs", c.epochs);
    read_key(j, "batch_size", c.batch_size);
    read_key(j, "weight_decay", c.weight_decay);
    read_key(j, "patience", c.patience);
    read_key(j, "seeds", c.seeds);
    read_key(j, "lambda1", c.loss.lambda1);
    read_key(j, "lambda2", c.loss.lambda2);
    read_key(j, "temperature", c.loss.temperature);
    read_key(j, "prob_epsilon", c.loss.prob_epsilon);
    if (j.contains("kernel")) c.loss.kernel.kind = parse_kernel_kind(j["kernel"].get<std::string>());
    if (j.contains("bandwidth")) {
      const auto& bw = j["bandwidth"];
      if (bw.is_string() && bw.get<std::string>() == "median") c.loss.kernel.bandwidth.reset();
      else c.loss.kernel.bandwidth = bw.get<double>();
    }
    if (j.contains("contrastive_reduction")) {
      const auto r = j["contrastive_reduction"].get<std::string>();
      if (r != "mean" && r != "sum") throw UsageError("contrastive_reduction must be mean or sum");
      c.loss.reduction = r == "mean" ? ContrastiveReduction::mean : ContrastiveReduction::sum;
    }
    if (j.contains("contrastive_orientation")) {
      const auto o = j["contrastive_orientation"].get<std::string>();
      if (o != "symmetric" && o != "anchor_only") throw UsageError("contrastive_orientation must be symmetric or anchor_only");
      c.loss.orientation = o == "symmetric" ? ContrastiveOrientation::symmetric : ContrastiveOrientation::anchor_only;
    }
    if (j.contains("ablation")) c.ablation = parse_ablation(j["ablation"].get<std::string>());
    if (j.contains("vocab_size")) {
      c.dims.vocab = j["vocab_size"].get<std::size_t>();
      c.tokenizer.vocab_size = c.dims.vocab;
    }
    read_key(j, "max_seq_len", c.tokenizer.max_seq_len);
    read_key(j, "embed_dim", c.dims.embed);
    read_key(j, "hidden_dim", c.dims.hidden);
    read_key(j, "proj_hidden_dim", c.dims.proj_hidden);
    read_key(j, "proj_dim", c.dims.proj);
    if (j.contains("transform")) c.transform.kind = parse_transform_kind(j["transform"].get<std::string>());
    read_key(j, "transform_rate", c.transform.rate);
    read_key(j, "crop_fraction", c.transform.crop_fraction);
    read_key(j, "transform_seed", c.transform.seed);
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid config value: ") + e.what());
  }
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  return from_json(j, std::move(base));
}

TrainConfig TrainConfig::from_json(const json& j) { return from_json(j, TrainConfig{}); }

TrainConfig TrainConfig::load(const std::filesystem::path& path) { return load(path, TrainConfig{}); }

TrainRunResult train(const Corpus& source, const Corpus& target, std::uint64_t seed,
                     const TrainConfig& config, const Thesaurus& thesaurus) {
  if (config.ablation == Ablation::source_only) {
    return run_loop(source, nullptr, seed, config, Ablation::source_only, thesaurus);
  }
  return run_loop(source, &target, seed, config, config.ablation, thesaurus);
}

TrainRunResult train_source_only(const Corpus& source, std::uint64_t seed, const TrainConfig& config,
                                 const Thesaurus& thesaurus) {
  return run_loop(source, nullptr, seed, config, Ablation::source_only, thesaurus);
}

void write_run(TrainRunResult& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  run.checkpoint = dir / "model.cnda";
  save_checkpoint(run.params, run.checkpoint);
  save_checkpoint(run.params, dir / "state.cnda", &run.optimizer);

  std::ofstream log_out(dir / "train_log.jsonl", std::ios::binary);
  for (std::size_t i = 0; i < run.steps.size(); ++i) log_out << run.steps[i].to_json_line(i + 1) << '\n';

  ordered_json history;
  history["seed"] = run.seed;
  history["best_epoch"] = run.best_epoch;
  history["epochs"] = ordered_json::array();
  for (const auto& e : run.history) {
    history["epochs"].push_back({{"epoch", e.epoch}, {"val_ce", e.val_ce}, {"improved", e.improved}});
  }
  std::ofstream hist_out(dir / "history.json", std::ios::binary);
  hist_out << history.dump(2) << '\n';
  if (!log_out || !hist_out) throw DataError("failed writing run artifacts to " + dir.string());
}

ordered_json SeedSweep::to_json() const {
  ordered_json j;
  j["seeds"] = ordered_json::array();
  for (const auto& o : outcomes) {
    ordered_json s;
    s["seed"] = o.seed;
    s["ok"] = o.run.has_value();
    if (!o.error.empty()) s["error"] = o.error;
    if (o.run) {
      s["best_epoch"] = o.run->best_epoch;
      s["epochs_run"] = o.run->history.size();
    }
    s["source_test"] = o.source_test ? o.source_test->to_json() : ordered_json(nullptr);
    s["target_test"] = o.target_test ? o.target_test->to_json() : ordered_json(nullptr);
    j["seeds"].push_back(std::move(s));
  }
  j["source_test_mean"] = source_summary ? source_summary->to_json() : ordered_json(nullptr);
  j["target_test_mean"] = target_summary ? target_summary->to_json() : ordered_json(nullptr);
  return j;
}

SeedSweep run_seeds(const Corpus& source, const Corpus* target, const TrainConfig& config,
                    const Thesaurus& thesaurus, std::size_t threads) {
  if (config.seeds.empty()) throw UsageError("run_seeds: at least one seed is required");
  config.validate();
  const bool source_only = config.ablation == Ablation::source_only;
  if (!source_only && target == nullptr) throw UsageError("a target corpus is required unless ablation is source_only");

  const Corpus source_test = source.is_split() ? source.select(Split::test) : Corpus{};
  Corpus target_test;
  if (target != nullptr && target->is_split()) {
    target_test = target->select(Split::test);
    if (!target_test.fully_labeled()) target_test = Corpus{};
  }

  SeedSweep sweep;
  sweep.outcomes.resize(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      SeedOutcome& out = sweep.outcomes[i];
      out.seed = config.seeds[i];
      try {
        TrainRunResult run = source_only ? train_source_only(source, out.seed, config, thesaurus)
                                         : train(source, *target, out.seed, config, thesaurus);
        if (!source_test.empty()) {
          out.source_test = evaluate_model(run.params, source_test, config.tokenizer).report;
          out.source_test->seed = out.seed;
        }
        if (!target_test.empty()) {
          out.target_test = evaluate_model(run.params, target_test, config.tokenizer).report;
          out.target_test->seed = out.seed;
        }
        out.run = std::move(run);
      } catch (const NumericalError& e) {
        out.error = e.what();
        out.numerical_failure = true;
        log::error("seed " + std::to_string(out.seed) + " failed: " + e.what());
      } catch (const std::exception& e) {
        out.error = e.what();
        log::error("seed " + std::to_string(out.seed) + " failed: " + e.what());
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, config.seeds.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<MetricsReport> src_reports, tgt_reports;
  for (const auto& o : sweep.outcomes) {
    if (o.source_test) src_reports.push_back(*o.source_test);
    if (o.target_test) tgt_reports.push_back(*o.target_test);
  }
  if (!src_reports.empty()) sweep.source_summary = summarize(src_reports);
  if (!tgt_reports.empty()) sweep.target_summary = summarize(tgt_reports);
  return sweep;
}

}  // namespace condet
