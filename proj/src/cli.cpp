#include "dialrel/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dialrel/errors.hpp"
#include "dialrel/featurestore.hpp"
#include "dialrel/nspprobe.hpp"
#include "dialrel/report.hpp"
#include "dialrel/rng.hpp"
#include "dialrel/runlog.hpp"

namespace dialrel {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename F>
auto as_usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::vector<std::string>& raw) {
  std::vector<std::uint64_t> seeds;
  for (const auto& r : raw) {
    for (const auto& s : split_list(r)) {
      try {
        std::size_t used = 0;
        seeds.push_back(std::stoull(s, &used));
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw UsageError("bad seed: " + s);
      }
    }
  }
  if (seeds.empty()) throw UsageError("no seeds given");
  return seeds;
}

NamedData parse_named(const std::string& spec) {
  const auto eq = spec.find('=');
  const auto colon = spec.rfind(':');
  if (eq == std::string::npos || colon == std::string::npos || colon < eq) {
    throw UsageError("expected NAME=CORPUS:FEATURES, got '" + spec + "'");
  }
  return {spec.substr(0, eq), spec.substr(eq + 1, colon - eq - 1), spec.substr(colon + 1)};
}

void apply_negatives(TrainConfig& config, const std::vector<std::string>& specs) {
  if (specs.empty()) return;
  config.negative_texts.clear();
  for (const auto& s : specs) {
    if (s == "shuffled") {
      config.negatives = NegativeScheme::shuffled;
    } else if (s.rfind("fixed:", 0) == 0) {
      config.negatives = NegativeScheme::fixed_text;
      config.negative_texts.push_back(s.substr(6));
    } else {
      throw UsageError("--negatives expects fixed:<text> or shuffled, got '" + s + "'");
    }
  }
  if (config.negatives == NegativeScheme::shuffled && !config.negative_texts.empty()) {
    throw UsageError("--negatives cannot mix shuffled and fixed texts");
  }
}

Corpus filter_split(Corpus corpus, std::optional<Split> split) {
  if (!split) return corpus;
  std::erase_if(corpus.examples, [&](const EvalExample& ex) { return ex.split != *split; });
  return corpus;
}

std::optional<Split> optional_split(const std::string& s) {
  if (s.empty() || s == "all") return std::nullopt;
  return as_usage([&] { return parse_split(s); });
}

void warn_missing(std::ostream& err, const std::vector<std::string>& missing, const std::string& what) {
  if (missing.empty()) return;
  err << "warning: " << missing.size() << " examples lack " << what << " (first: " << missing.front() << ")\n";
}

fs::path run_log_path(const fs::path& out) { return out.string() + ".run.json"; }

std::map<std::string, std::string> config_map(const TrainConfig& c) {
  std::map<std::string, std::string> m;
  const auto j = nlohmann::json::parse(c.fingerprint());
  for (auto it = j.begin(); it != j.end(); ++it) m[it.key()] = it.value().dump();
  return m;
}

}  // namespace

CorrelationReport evaluate_scores(const Corpus& corpus, const std::vector<ScoredExample>& scores,
                                  const std::string& metric, std::optional<Split> split,
                                  std::size_t n_perm, std::uint64_t seed) {
  std::map<std::string, double> by_id;
  for (const auto& s : scores) {
    if (!by_id.emplace(s.example_id, s.score).second) throw DataError("duplicate score for " + s.example_id);
  }
  std::vector<double> x, y;
  for (const auto& ex : corpus.examples) {
    if (split && ex.split != *split) continue;
    auto it = by_id.find(ex.id);
    if (it == by_id.end()) continue;
    x.push_back(it->second);
    y.push_back(ex.response.mean_rating);
  }
  if (x.size() < 3) {
    throw DataError("only " + std::to_string(x.size()) + " scored examples to correlate for " + metric);
  }
  const std::string split_name = split ? std::string(to_string(*split)) : "all";
  try {
    return correlate(metric, std::string(to_string(corpus.dataset)), split_name, x, y, n_perm, seed);
  } catch (const std::domain_error& e) {
    throw DataError(metric + " on " + std::string(to_string(corpus.dataset)) + ": " + e.what());
  }
}

std::vector<AblationCell> expand_grid(const AblationSpec& spec) {
  std::vector<LossKind> losses;
  if (spec.grid == "table4") {
    losses = {LossKind::bce_sigmoid};
  } else if (spec.grid == "full") {
    losses = {LossKind::bce_sigmoid, LossKind::triplet_mod};
  } else {
    throw std::invalid_argument("unknown grid '" + spec.grid + "' (expected table4 or full)");
  }
  if (spec.train_sets.empty()) throw std::invalid_argument("ablation needs at least one training set");
  std::vector<AblationCell> cells;
  for (const auto& t : spec.train_sets) {
    for (auto neg : {NegativeScheme::fixed_text, NegativeScheme::shuffled}) {
      for (auto reg : {Regularizer::l1, Regularizer::none}) {
        for (auto loss : losses) {
          AblationCell c{"", t.name, reg, neg, loss};
          c.name = t.name + "_" + (reg == Regularizer::l1 ? "l1" : "noreg") + "_" +
                   (neg == NegativeScheme::fixed_text ? "idk" : "rand") + "_" + std::string(to_string(loss));
          cells.push_back(std::move(c));
        }
      }
    }
  }
  return cells;
}

AblationResult run_ablation(const AblationSpec& spec, const fs::path& out_dir) {
  AblationResult result;
  result.cells = expand_grid(spec);
  if (spec.eval_sets.empty()) throw std::invalid_argument("ablation needs at least one evaluation set");
  if (spec.seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");

  fs::create_directories(out_dir / "models");
  fs::create_directories(out_dir / "runs");
  fs::create_directories(out_dir / "reports");

  struct Loaded {
    Corpus corpus;
    FeatureStore store;
  };
  std::map<std::string, Loaded> train_data, eval_data;
  RunLog log;
  log.command = "ablate";
  for (const auto& t : spec.train_sets) {
    train_data.emplace(t.name, Loaded{read_corpus(t.corpus), read_store(t.features)});
    log.inputs.push_back(t.corpus);
    log.inputs.push_back(t.features);
  }
  for (const auto& e : spec.eval_sets) {
    Loaded l{filter_split(read_corpus(e.corpus), spec.eval_split), read_store(e.features)};
    eval_data.emplace(e.name, std::move(l));
    log.inputs.push_back(e.corpus);
    log.inputs.push_back(e.features);
  }

  for (const auto& cell : result.cells) {
    std::map<std::string, std::vector<CorrelationReport>> per_eval;
    for (auto seed : spec.seeds) {
      TrainConfig config = spec.base;
      config.loss = cell.loss;
      config.regularizer = cell.regularizer;
      config.negatives = cell.negatives;
      if (config.negatives == NegativeScheme::fixed_text && config.negative_texts.empty()) {
        config.negative_texts = {std::string(kDefaultNegative)};
      }
      config.seed = seed;
      const auto& data = train_data.at(cell.train_set);
      const auto pairs = make_training_pairs(data.corpus, data.store, config);
      const auto model = train(pairs, config);
      ++result.models_trained;
      const auto stem = cell.name + "_seed" + std::to_string(seed);
      write_model(model, out_dir / "models" / (stem + ".json"));
      for (const auto& e : spec.eval_sets) {
        const auto& ev = eval_data.at(e.name);
        const auto scored = score(model, ev.corpus, ev.store, true);
        auto report = evaluate_scores(ev.corpus, scored.scores, cell.name, spec.eval_split, spec.n_perm, seed);
        report.dataset = e.name;
        write_report(report, out_dir / "runs" / (stem + "__" + e.name + ".json"));
        per_eval[e.name].push_back(std::move(report));
      }
    }
    for (const auto& e : spec.eval_sets) {
      auto agg = aggregate_runs(per_eval.at(e.name));
      write_report(agg, out_dir / "reports" / (cell.name + "__" + e.name + ".json"));
      result.aggregated.push_back(std::move(agg));
    }
  }

  {
    std::ofstream md(out_dir / "table.md");
    md << render_report(result.aggregated, ReportFormat::markdown);
    std::ofstream csv(out_dir / "table.csv");
    csv << render_report(result.aggregated, ReportFormat::csv);
  }
  log.config = config_map(spec.base);
  log.config["grid"] = spec.grid;
  log.config["n_perm"] = std::to_string(spec.n_perm);
  log.config["eval_split"] = spec.eval_split ? std::string(to_string(*spec.eval_split)) : "all";
  log.seeds = spec.seeds;
  log.outputs = {out_dir / "table.md", out_dir / "table.csv"};
  log.write(out_dir / "run.json");
  return result;
}

namespace {

struct TrainFlags {
  std::string loss = "bce";
  std::string reg = "l1";
  double lambda = 1.0;
  std::vector<std::string> negatives;
  int epochs = 2;
  std::size_t batch = 6;
  double lr = 0.001;
  std::uint64_t seed = 0;
  double margin = 0.4;
  std::string orientation = "published";

  void add_to(CLI::App* app) {
    app->add_option("--loss", loss, "bce | bce-softmax2 | triplet")->capture_default_str();
    app->add_option("--reg", reg, "none | l1 | l2")->capture_default_str();
    app->add_option("--lambda", lambda, "Penalty strength")->capture_default_str();
    app->add_option("--negatives", negatives, "fixed:<text> (repeatable) or shuffled");
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--batch", batch)->capture_default_str();
    app->add_option("--lr", lr)->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--margin", margin, "Triplet margin m")->capture_default_str();
    app->add_option("--triplet-orientation", orientation, "published | swapped")->capture_default_str();
  }

  TrainConfig config() const {
    TrainConfig c;
    as_usage([&] {
      c.loss = parse_loss(loss);
      c.regularizer = parse_regularizer(reg);
      c.triplet_orientation = parse_triplet_orientation(orientation);
      return 0;
    });
    c.lambda = lambda;
    c.epochs = epochs;
    c.batch_size = batch;
    c.learning_rate = lr;
    c.seed = seed;
    c.margin = margin;
    apply_negatives(c, negatives);
    as_usage([&] {
      c.validate();
      return 0;
    });
    return c;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dialogue relevance metric toolkit", "relcli"};
  app.set_config("--config", "", "INI configuration file (flags override it)");
  app.require_subcommand(1);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Normalize a raw dataset file");
  std::string dataset_name, raw_path, adapter_path, out_path;
  std::vector<std::string> adapter_sets;
  bool no_splits = false;
  ingest_cmd->add_option("--dataset", dataset_name, "HUMOD | USR_TC | P_DD | FED_REL | FED_COR")->required();
  ingest_cmd->add_option("--raw", raw_path)->required();
  ingest_cmd->add_option("--adapter", adapter_path, "Adapter key=value file");
  ingest_cmd->add_option("--set", adapter_sets, "Adapter key=value override (repeatable)");
  ingest_cmd->add_flag("--no-splits", no_splits, "Keep the adapter's split instead of the dataset rule");
  ingest_cmd->add_option("--out", out_path)->required();

  // manifest
  auto* manifest_cmd = app.add_subcommand("manifest", "Emit extraction requests for a corpus");
  std::string corpus_path, kinds_list;
  std::vector<std::string> negative_texts, followups;
  std::size_t shuffled_window = 0;
  std::uint64_t seed = 0;
  manifest_cmd->add_option("--corpus", corpus_path)->required();
  manifest_cmd->add_option("--kinds", kinds_list, "Comma list of feature kinds")->required();
  manifest_cmd->add_option("--negative", negative_texts, "Fixed negative text (repeatable)");
  manifest_cmd->add_option("--followup", followups, "Follow-up utterance (repeatable)");
  manifest_cmd->add_option("--shuffled-window", shuffled_window, "Also request shuffled negatives from this pool size");
  manifest_cmd->add_option("--seed", seed)->capture_default_str();
  manifest_cmd->add_option("--out", out_path)->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a relevance head");
  std::string features_path;
  TrainFlags train_flags;
  train_cmd->add_option("--corpus", corpus_path)->required();
  train_cmd->add_option("--features", features_path)->required();
  train_cmd->add_option("--out", out_path)->required();
  train_flags.add_to(train_cmd);

  // score
  auto* score_cmd = app.add_subcommand("score", "Score a corpus with a trained head");
  std::string model_path, split_name;
  bool strict = false;
  score_cmd->add_option("--model", model_path)->required();
  score_cmd->add_option("--corpus", corpus_path)->required();
  score_cmd->add_option("--features", features_path)->required();
  score_cmd->add_option("--split", split_name, "train | valid | test | all");
  score_cmd->add_flag("--strict", strict, "Fail on missing features");
  score_cmd->add_option("--out", out_path)->required();

  // baseline
  auto* baseline_cmd = app.add_subcommand("baseline", "Score a corpus with a closed-form metric");
  std::string metric_name, aggregate_name = "sum";
  std::vector<std::string> followup_ids;
  baseline_cmd->add_option("--metric", metric_name, "cos-ft | cos-max | cos-nsp | norm-prob | fed")->required();
  baseline_cmd->add_option("--corpus", corpus_path)->required();
  baseline_cmd->add_option("--features", features_path)->required();
  baseline_cmd->add_option("--split", split_name, "train | valid | test | all");
  baseline_cmd->add_option("--followup-ids", followup_ids, "FED follow-up utterance ids to use");
  baseline_cmd->add_option("--fed-aggregate", aggregate_name, "sum | mean")->capture_default_str();
  std::string fed_name = "FED";
  baseline_cmd->add_option("--name", fed_name, "Metric name written for fed scores")->capture_default_str();
  baseline_cmd->add_flag("--strict", strict);
  baseline_cmd->add_option("--out", out_path)->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Correlate scores with human ratings");
  std::string scores_path;
  std::size_t n_perm = kDefaultPermutations;
  eval_cmd->add_option("--corpus", corpus_path)->required();
  eval_cmd->add_option("--scores", scores_path)->required();
  eval_cmd->add_option("--metric", metric_name, "Report name (default: metric in scores file)");
  eval_cmd->add_option("--dataset", dataset_name, "Report dataset (default: corpus dataset)");
  eval_cmd->add_option("--split", split_name, "train | valid | test | all");
  eval_cmd->add_option("--n-perm", n_perm)->capture_default_str();
  eval_cmd->add_option("--seed", seed)->capture_default_str();
  eval_cmd->add_option("--out", out_path)->required();

  // aggregate
  auto* aggregate_cmd = app.add_subcommand("aggregate", "Average single-run reports");
  std::vector<std::string> report_paths;
  aggregate_cmd->add_option("--reports", report_paths)->required();
  aggregate_cmd->add_option("--out", out_path)->required();

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the ablation grid");
  std::string grid = "table4";
  std::vector<std::string> train_specs, eval_specs, seed_specs{"0,1,2"};
  TrainFlags ablate_flags;
  ablate_cmd->add_option("--grid", grid, "table4 | full")->capture_default_str();
  ablate_cmd->add_option("--train", train_specs, "NAME=CORPUS:FEATURES (repeatable)")->required();
  ablate_cmd->add_option("--eval", eval_specs, "NAME=CORPUS:FEATURES (repeatable)")->required();
  ablate_cmd->add_option("--seeds", seed_specs, "Comma list of seeds")->capture_default_str();
  ablate_cmd->add_option("--split", split_name, "Evaluation split (default test)");
  ablate_cmd->add_option("--n-perm", n_perm)->capture_default_str();
  ablate_cmd->add_option("--lambda", ablate_flags.lambda)->capture_default_str();
  ablate_cmd->add_option("--negative", negative_texts, "Fixed negative text for idk cells");
  ablate_cmd->add_option("--epochs", ablate_flags.epochs)->capture_default_str();
  ablate_cmd->add_option("--batch", ablate_flags.batch)->capture_default_str();
  ablate_cmd->add_option("--lr", ablate_flags.lr)->capture_default_str();
  ablate_cmd->add_option("--margin", ablate_flags.margin)->capture_default_str();
  ablate_cmd->add_option("--triplet-orientation", ablate_flags.orientation)->capture_default_str();
  ablate_cmd->add_option("--out", out_path)->required();

  // sensitivity
  auto* sensitivity_cmd = app.add_subcommand("sensitivity", "Best-to-worst Spearman ratio per metric");
  std::string values_spec;
  sensitivity_cmd->add_option("--reports", report_paths, "Reports to group by metric");
  sensitivity_cmd->add_option("--values", values_spec, "DATASET=rho,... for a single metric");
  sensitivity_cmd->add_option("--metric", metric_name, "Metric name (with --values) or filter");
  sensitivity_cmd->add_option("--out", out_path);

  // mask-nsp
  auto* mask_cmd = app.add_subcommand("mask-nsp", "NSP accuracy with the top-k relevance dims kept");
  std::string head_path, labels_path;
  std::size_t k = 7;
  mask_cmd->add_option("--model", model_path)->required();
  mask_cmd->add_option("--head", head_path)->required();
  mask_cmd->add_option("--features", features_path)->required();
  mask_cmd->add_option("--labels", labels_path)->required();
  mask_cmd->add_option("--k", k)->capture_default_str();
  mask_cmd->add_option("--out", out_path);

  // report
  auto* report_cmd = app.add_subcommand("report", "Render reports as a table");
  std::string format_name = "markdown";
  report_cmd->add_option("--reports", report_paths)->required();
  report_cmd->add_option("--format", format_name, "markdown | csv | json")->capture_default_str();
  report_cmd->add_option("--out", out_path);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (ingest_cmd->parsed()) {
      const auto kind = as_usage([&] { return parse_dataset(dataset_name); });
      AdapterConfig cfg;
      if (!adapter_path.empty()) cfg = read_adapter_config(adapter_path);
      for (const auto& s : adapter_sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
        cfg[s.substr(0, eq)] = s.substr(eq + 1);
      }
      auto corpus = ingest(kind, raw_path, cfg);
      if (!no_splits && !cfg.count("split")) corpus = make_splits(std::move(corpus));
      write_corpus(corpus, out_path);
      RunLog log{"ingest", cfg, {}, {raw_path}, {out_path}};
      log.config["dataset"] = dataset_name;
      if (!adapter_path.empty()) log.inputs.push_back(adapter_path);
      log.write(run_log_path(out_path));
      out << "wrote " << corpus.examples.size() << " examples (" << corpus.context_order().size()
          << " contexts) to " << out_path << "\n";
      if (corpus.provenance.find("warning") != std::string::npos) err << "note: " << corpus.provenance << "\n";
      return kExitOk;
    }

    if (manifest_cmd->parsed()) {
      const auto corpus = read_corpus(corpus_path);
      ManifestOptions opts;
      as_usage([&] {
        for (const auto& k : split_list(kinds_list)) opts.kinds.push_back(parse_feature_kind(k));
        return 0;
      });
      opts.negative_texts = negative_texts;
      opts.followups = followups;
      if (shuffled_window > 0) opts.shuffled = shuffle_negatives(corpus, shuffled_window, seed);
      const auto manifest = as_usage([&] { return emit_manifest(corpus, opts); });
      write_manifest(manifest, out_path);
      RunLog log{"manifest", {{"kinds", kinds_list}, {"shuffled_window", std::to_string(shuffled_window)}},
                 {seed}, {corpus_path}, {out_path}};
      log.write(run_log_path(out_path));
      out << "wrote " << manifest.size() << " requests to " << out_path << "\n";
      return kExitOk;
    }

    if (train_cmd->parsed()) {
      const auto config = train_flags.config();
      const auto corpus = read_corpus(corpus_path);
      const auto store = read_store(features_path);
      const auto pairs = make_training_pairs(corpus, store, config);
      TrainStats stats;
      const auto model = train(pairs, config, &stats);
      write_model(model, out_path);
      RunLog log{"train", config_map(config), {config.seed}, {corpus_path, features_path}, {out_path}};
      log.write(run_log_path(out_path));
      out << "trained on " << pairs.size() << " pairs, " << stats.steps << " steps, final batch loss "
          << stats.final_batch_loss << "\n";
      return kExitOk;
    }

    if (score_cmd->parsed()) {
      const auto model = read_model(model_path);
      const auto corpus = filter_split(read_corpus(corpus_path), optional_split(split_name));
      const auto store = read_store(features_path);
      const auto scored = score(model, corpus, store, strict);
      warn_missing(err, scored.missing, "features");
      write_scores(scored.scores, out_path);
      RunLog log{"score", {{"split", split_name}}, {}, {model_path, corpus_path, features_path}, {out_path}};
      log.write(run_log_path(out_path));
      out << "wrote " << scored.scores.size() << " scores to " << out_path << "\n";
      return kExitOk;
    }

    if (baseline_cmd->parsed()) {
      const auto corpus = filter_split(read_corpus(corpus_path), optional_split(split_name));
      const auto store = read_store(features_path);
      ScoreSet scored;
      if (metric_name == "cos-ft") {
        scored = cosine_metric(corpus, store, CosineVariant::COS_FT, strict);
      } else if (metric_name == "cos-max") {
        scored = cosine_metric(corpus, store, CosineVariant::COS_MAX, strict);
      } else if (metric_name == "cos-nsp") {
        scored = cosine_metric(corpus, store, CosineVariant::COS_NSP, strict);
      } else if (metric_name == "norm-prob") {
        scored = norm_prob_metric(corpus, store, strict);
      } else if (metric_name == "fed") {
        if (aggregate_name != "sum" && aggregate_name != "mean") throw UsageError("--fed-aggregate: sum | mean");
        scored = fed_metric(corpus, store, fed_name, followup_ids,
                            aggregate_name == "mean" ? FollowupAggregate::mean : FollowupAggregate::sum, strict);
      } else {
        throw UsageError("unknown baseline metric: " + metric_name);
      }
      warn_missing(err, scored.missing, "features");
      write_scores(scored.scores, out_path);
      RunLog log{"baseline", {{"metric", metric_name}, {"split", split_name}}, {}, {corpus_path, features_path},
                 {out_path}};
      log.write(run_log_path(out_path));
      out << "wrote " << scored.scores.size() << " scores to " << out_path << "\n";
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      const auto corpus = read_corpus(corpus_path);
      const auto scores = read_scores(scores_path);
      std::string name = metric_name;
      if (name.empty()) name = scores.empty() ? "unknown" : scores.front().metric;
      if (n_perm < kMinPermutations) {
        throw UsageError("--n-perm must be at least " + std::to_string(kMinPermutations));
      }
      auto r = evaluate_scores(corpus, scores, name, optional_split(split_name), n_perm, seed);
      if (!dataset_name.empty()) r.dataset = dataset_name;
      write_report(r, out_path);
      RunLog log{"eval", {{"n_perm", std::to_string(n_perm)}, {"split", split_name}}, {seed},
                 {corpus_path, scores_path}, {out_path}};
      log.write(run_log_path(out_path));
      out << r.metric << " on " << r.dataset << "/" << r.split << " (n=" << r.n << "): S=" << r.marker_spearman
          << format_cell(r.spearman) << " P=" << r.marker_pearson << format_cell(r.pearson) << "\n";
      return kExitOk;
    }

    if (aggregate_cmd->parsed()) {
      std::vector<CorrelationReport> reports;
      for (const auto& p : report_paths) reports.push_back(read_report(p));
      const auto agg = as_usage([&] { return aggregate_runs(reports); });
      write_report(agg, out_path);
      RunLog log{"aggregate", {}, {}, {}, {out_path}};
      for (const auto& p : report_paths) log.inputs.emplace_back(p);
      log.write(run_log_path(out_path));
      out << agg.metric << " on " << agg.dataset << ": S=" << agg.marker_spearman << format_cell(agg.spearman)
          << " (" << format_cell(agg.spearman_std) << ") P=" << agg.marker_pearson << format_cell(agg.pearson)
          << " (" << format_cell(agg.pearson_std) << ")\n";
      return kExitOk;
    }

    if (ablate_cmd->parsed()) {
      AblationSpec spec;
      spec.grid = grid;
      for (const auto& s : train_specs) spec.train_sets.push_back(parse_named(s));
      for (const auto& s : eval_specs) spec.eval_sets.push_back(parse_named(s));
      spec.seeds = parse_seeds(seed_specs);
      spec.eval_split = split_name.empty() ? std::optional<Split>(Split::test) : optional_split(split_name);
      spec.n_perm = n_perm;
      spec.base = ablate_flags.config();
      if (!negative_texts.empty()) spec.base.negative_texts = negative_texts;
      as_usage([&] { return expand_grid(spec); });
      const auto result = run_ablation(spec, out_path);
      out << "trained " << result.models_trained << " models over " << result.cells.size() << " cells\n"
          << render_report(result.aggregated, ReportFormat::markdown);
      return kExitOk;
    }

    if (sensitivity_cmd->parsed()) {
      std::map<std::string, std::map<std::string, double>> per_metric;
      if (!values_spec.empty()) {
        if (metric_name.empty()) metric_name = "metric";
        for (const auto& item : split_list(values_spec)) {
          const auto eq = item.find('=');
          if (eq == std::string::npos) throw UsageError("--values expects DATASET=rho pairs");
          try {
            per_metric[metric_name][item.substr(0, eq)] = std::stod(item.substr(eq + 1));
          } catch (const std::exception&) {
            throw UsageError("bad correlation value in '" + item + "'");
          }
        }
      }
      for (const auto& p : report_paths) {
        const auto r = read_report(p);
        if (!metric_name.empty() && values_spec.empty() && r.metric != metric_name) continue;
        per_metric[r.metric][r.dataset] = r.spearman;
      }
      if (per_metric.empty()) throw UsageError("sensitivity needs --values or --reports");
      auto arr = nlohmann::json::array();
      for (const auto& [metric, values] : per_metric) {
        const auto s = as_usage([&] { return sensitivity_ratio(metric, values); });
        nlohmann::json j{{"metric", s.metric},
                         {"best_dataset", s.best_dataset},
                         {"best", s.best},
                         {"worst_dataset", s.worst_dataset},
                         {"worst", s.worst},
                         {"ratio", std::isinf(s.ratio) ? nlohmann::json("inf") : nlohmann::json(s.ratio)}};
        arr.push_back(j);
        out << s.metric << ": " << format_cell(s.best) << " / " << format_cell(s.worst) << " = "
            << (std::isinf(s.ratio) ? std::string("inf") : std::to_string(s.ratio)) << "\n";
      }
      if (!out_path.empty()) {
        std::ofstream f(out_path);
        f << arr.dump(2) << '\n';
      }
      return kExitOk;
    }

    if (mask_cmd->parsed()) {
      const auto model = read_model(model_path);
      const auto head = read_nsp_head(head_path);
      const auto store = read_store(features_path);
      const auto labels = read_labels(labels_path);
      if (head.dim != model.dim()) throw DataError("NSP head dim differs from the model dim");
      const auto mask = as_usage([&] { return top_k_mask(model, k); });
      const auto pairs = labeled_features(store, labels);
      const double unmasked = nsp_accuracy(head, pairs);
      const double masked = nsp_accuracy(head, pairs, mask);
      std::vector<std::size_t> kept;
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) kept.push_back(i);
      }
      out << "pairs " << pairs.size() << ", unmasked accuracy " << unmasked << ", top-" << k << " accuracy "
          << masked << "\n";
      if (!out_path.empty()) {
        std::ofstream f(out_path);
        f << nlohmann::json{{"pairs", pairs.size()}, {"k", k}, {"kept_dims", kept},
                            {"accuracy_unmasked", unmasked}, {"accuracy_masked", masked}}
                 .dump(2)
          << '\n';
        RunLog log{"mask-nsp", {{"k", std::to_string(k)}}, {}, {model_path, head_path, features_path, labels_path},
                   {out_path}};
        log.write(run_log_path(out_path));
      }
      return kExitOk;
    }

    if (report_cmd->parsed()) {
      std::vector<CorrelationReport> reports;
      for (const auto& p : report_paths) reports.push_back(read_report(p));
      const auto format = as_usage([&] { return parse_report_format(format_name); });
      const auto text = render_report(reports, format);
      if (out_path.empty()) {
        out << text;
      } else {
        std::ofstream f(out_path);
        f << text;
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace dialrel
