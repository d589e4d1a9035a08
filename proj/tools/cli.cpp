#include "cli.hpp"

#include <charconv>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "salve/alphacrit.hpp"
#include "salve/edits.hpp"
#include "salve/eval.hpp"
#include "salve/features.hpp"
#include "salve/gradfam.hpp"
#include "salve/report.hpp"
#include "salve/sae.hpp"
#include "salve/synthbench.hpp"

namespace salve::cli {

namespace {

using nlohmann::json;

struct UsageError : Error {
  using Error::Error;
};

struct Options {
  std::string bundle;
  std::string sae;
  std::string out;
  std::string trace;
  std::string report;
  std::string format = "csv";
  std::string split;
  std::string direction = "suppress";
  std::string seeds;
  std::string betas = "1";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t latent_dim = 32;
  double lambda1 = 1e-3;
  double lr = 1e-3;
  std::size_t epochs = 1000;
  std::size_t batch = 32;
  std::optional<std::size_t> cls;
  std::optional<std::size_t> feature;
  std::optional<std::size_t> sample;
  double alpha = 1.0;
  std::optional<double> alpha_max;
  std::optional<double> alpha_step;
  double target_value = -10.0;
  std::size_t bins = 40;
  bool analytic = false;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void emit(const Options& o, const std::string& content) { write_text_atomic(o.out, content); }

Direction parse_direction(const std::string& s) { return s == "enhance" ? Direction::kEnhance : Direction::kSuppress; }

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string::npos ? text.size() : comma;
    parts.push_back(text.substr(start, end - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return parts;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& p : split_list(text)) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(p.data(), p.data() + p.size(), v);
    if (p.empty() || res.ec != std::errc() || res.ptr != p.data() + p.size()) {
      throw UsageError("--seeds expects a comma-separated list of integers, got '" + text + "'");
    }
    seeds.push_back(v);
  }
  return seeds;
}

std::vector<double> parse_doubles(const std::string& text, const char* flag) {
  std::vector<double> out;
  for (const auto& p : split_list(text)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(p, &used));
      if (used != p.size()) throw std::invalid_argument(p);
    } catch (const std::logic_error&) {
      throw UsageError(std::string(flag) + " expects comma-separated numbers, got '" + text + "'");
    }
  }
  return out;
}

ActivationDataset load_split(const TensorBundle& bundle, const std::string& split) {
  auto validated = validate_dataset(bundle);
  if (split == "test") return std::move(validated.dataset);
  if (!bundle.contains("train_activations") || !bundle.contains("train_labels")) {
    throw SchemaError("bundle has no train split (train_activations/train_labels); use --split test");
  }
  return dataset_from_bundle(bundle, "train_activations", "train_labels");
}

SaeTrainConfig train_config(const Options& o) {
  SaeTrainConfig cfg;
  cfg.latent_dim = o.latent_dim;
  cfg.lambda1 = o.lambda1;
  cfg.lr = o.lr;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.seed = o.seed;
  return cfg;
}

std::size_t require_class(const Options& o, const ActivationDataset& data) {
  if (!o.cls) throw UsageError("--class is required");
  if (*o.cls >= data.num_classes()) {
    throw UsageError("--class " + std::to_string(*o.cls) + " out of range for " +
                     std::to_string(data.num_classes()) + " classes");
  }
  return *o.cls;
}

// --feature if given, else the dominant latent of --class on `data`.
std::size_t choose_latent(const Options& o, const SaeParams& params, const ActivationDataset& data) {
  if (o.feature) {
    if (*o.feature >= params.latent_dim()) {
      throw UsageError("--feature " + std::to_string(*o.feature) + " out of range for d=" +
                       std::to_string(params.latent_dim()));
    }
    return *o.feature;
  }
  const auto k = require_class(o, data);
  const auto profile = class_conditional_means(encode(params, data.X), data.labels, data.num_classes());
  return dominant_feature(profile, k);
}

json with_manifest_note(const TensorBundle& bundle, const std::string& key, json note) {
  json manifest;
  try {
    manifest = json::parse(bundle.manifest);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  manifest[key] = std::move(note);
  return manifest;
}

void cmd_synth(const Options& o) {
  SynthConfig cfg;
  if (o.seed_set) cfg.seed = o.seed;
  const auto data = generate_synthetic_dataset(cfg);
  const auto head = train_linear_head(data.train);
  save_bundle(synth_bundle(data, head, cfg), o.out);
}

void cmd_train_sae(const Options& o) {
  const auto bundle = load_bundle(o.bundle);
  const auto data = load_split(bundle, o.split.empty() ? "train" : o.split);
  const auto cfg = train_config(o);
  const auto result = train_sae(data.X, cfg);
  save_bundle(sae_to_bundle(result.params, cfg), o.out);
  if (!o.trace.empty()) write_text_atomic(o.trace, trace_csv(result.trace));
}

void cmd_analyze(const Options& o) {
  const auto bundle = load_bundle(o.bundle);
  const auto params = sae_from_bundle(load_bundle(o.sae));
  const auto data = load_split(bundle, o.split.empty() ? "test" : o.split);
  const auto Z = encode(params, data.X);
  const auto profile = class_conditional_means(Z, data.labels, data.num_classes());
  if (o.format == "csv") {
    emit(o, profile_csv(profile));
    return;
  }
  json j = to_json(profile);
  j["class_names"] = data.class_names;
  if (o.feature) {
    if (*o.feature >= params.latent_dim()) throw UsageError("--feature out of range");
    j["top_activating"] = {{"latent", *o.feature},
                           {"indices", top_activating_samples(Z, *o.feature, o.sample.value_or(10))}};
  }
  emit(o, dump(j));
}

void cmd_edit(const Options& o) {
  auto bundle = load_bundle(o.bundle);
  const auto params = sae_from_bundle(load_bundle(o.sae));
  const auto validated = validate_dataset(bundle);
  const auto data = load_split(bundle, o.split.empty() ? "test" : o.split);
  const auto latent = choose_latent(o, params, data);
  const EditPlan plan{latent, parse_direction(o.direction), o.alpha};
  if (!(plan.alpha >= 0.0)) throw UsageError("--alpha must be non-negative");
  put_head(bundle, apply_weight_edit(validated.head, params, plan));
  bundle.manifest =
      with_manifest_note(bundle, "edit", {{"kind", "weight"}, {"latent", latent}, {"direction", o.direction},
                                          {"alpha", o.alpha}})
          .dump();
  save_bundle(bundle, o.out);
}

AlphaGrid crit_grid(const Options& o) {
  AlphaGrid g;
  if (o.alpha_max) g.alpha_max = *o.alpha_max;
  if (o.alpha_step) g.step = *o.alpha_step;
  return g;
}

std::vector<double> sweep_alphas(const Options& o) { return sweep_grid(o.alpha_max.value_or(10.0), o.alpha_step.value_or(0.1)); }

void cmd_sweep(const Options& o) {
  const auto bundle = load_bundle(o.bundle);
  const auto validated = validate_dataset(bundle);
  const auto data = load_split(bundle, o.split.empty() ? "test" : o.split);
  const auto k = require_class(o, data);
  const auto alphas = sweep_alphas(o);

  if (!o.seeds.empty()) {
    const auto seeds = parse_seeds(o.seeds);
    const auto train = load_split(bundle, "train");
    auto result = seed_robustness_sweep(train.X, data, validated.head, train_config(o), seeds, k, alphas);
    if (o.format == "csv") {
      std::string csv = "alpha,mean,std\n";
      for (std::size_t g = 0; g < alphas.size(); ++g) {
        csv += format_number(alphas[g]) + "," + format_number(result.mean[g]) + "," +
               format_number(result.stddev[g]) + "\n";
      }
      emit(o, csv);
    } else {
      json j = to_json(result);
      j["target_class"] = k;
      emit(o, dump(j));
    }
    return;
  }

  if (o.sae.empty()) throw UsageError("sweep needs --sae (or --seeds for a robustness run)");
  const auto params = sae_from_bundle(load_bundle(o.sae));
  const auto latent = choose_latent(o, params, data);
  const auto curve =
      accuracy_sweep(validated.head, data, feature_contributions(params, latent), parse_direction(o.direction), alphas, k);
  if (o.format == "csv") {
    emit(o, sweep_csv(curve));
  } else {
    json j = to_json(curve);
    j["latent"] = latent;
    j["direction"] = o.direction;
    emit(o, dump(j));
  }
}

void cmd_alpha_crit(const Options& o) {
  const auto bundle = load_bundle(o.bundle);
  const auto validated = validate_dataset(bundle);
  const auto params = sae_from_bundle(load_bundle(o.sae));
  const auto data = load_split(bundle, o.split.empty() ? "test" : o.split);
  const auto grid = crit_grid(o);
  grid.check();

  if (o.sample) {
    if (*o.sample >= data.size()) throw UsageError("--sample out of range");
    const std::size_t k = o.cls.value_or(data.labels[*o.sample]);
    if (k >= data.num_classes()) throw UsageError("--class out of range");
    Options picked = o;
    picked.cls = k;
    const auto latent = choose_latent(picked, params, data);
    const auto c = feature_contributions(params, latent);
    const auto x = data.X.row(*o.sample);
    double lo = 0.0, hi = 0.0;
    const auto root = numerical_root(validated.head, x, c, k, grid, &lo, &hi);
    if (!root) {
      throw NumericalError("sample " + std::to_string(*o.sample) + " has no zero-crossing up to alpha " +
                           format_number(grid.alpha_max));
    }
    emit(o, dump({{"sample", *o.sample},
                  {"class", k},
                  {"latent", latent},
                  {"logit", edited_logit(validated.head, x, c, k, 0.0)},
                  {"numerical", *root},
                  {"bracket", {lo, hi}}}));
    return;
  }

  const auto k = require_class(o, data);
  const auto latent = choose_latent(o, params, data);
  const auto c = feature_contributions(params, latent);
  const auto results = alpha_crit_numerical(validated.head, data, c, k, grid);
  if (o.format == "csv") {
    emit(o, alpha_crit_csv(results));
    return;
  }
  json j = {{"class", k}, {"latent", latent}, {"samples", results.size()}};
  for (const char* method : {"analytical", "numerical"}) {
    try {
      j[method] = to_json(summarize_alpha_crit(results, method));
    } catch (const DataError&) {
      j[method] = nullptr;
    }
  }
  try {
    j["validity"] = suppression_terms_json(suppression_term_distribution(results, c), o.bins);
  } catch (const DataError&) {
    j["validity"] = nullptr;
  }
  emit(o, dump(j));
}

void cmd_rome(const Options& o) {
  auto bundle = load_bundle(o.bundle);
  const auto validated = validate_dataset(bundle);
  const auto k = require_class(o, validated.dataset);
  const auto edit = default_rome_edit(validated.head, validated.dataset, k, o.target_value);
  const auto edited = rome_update(validated.head, edit);
  put_head(bundle, edited);
  bundle.manifest = with_manifest_note(bundle, "edit", {{"kind", "rome"}, {"class", k}, {"target_value", o.target_value}})
                        .dump();
  save_bundle(bundle, o.out);
  if (!o.report.empty()) {
    write_text_atomic(o.report, dump({{"class", k},
                                      {"before", to_json(confusion_matrix(validated.head, validated.dataset))},
                                      {"after", to_json(confusion_matrix(edited, validated.dataset))}}));
  }
}

void cmd_steer(const Options& o) {
  const auto bundle = load_bundle(o.bundle);
  const auto validated = validate_dataset(bundle);
  const auto params = sae_from_bundle(load_bundle(o.sae));
  const auto data = load_split(bundle, o.split.empty() ? "test" : o.split);
  const auto k = require_class(o, data);
  const auto latent = choose_latent(o, params, data);
  const auto profile = class_conditional_means(encode(params, data.X), data.labels, data.num_classes());
  const auto betas = parse_doubles(o.betas, "--beta");
  std::string csv = "beta,class,accuracy\n";
  json rows = json::array();
  for (double beta : betas) {
    if (!(beta >= 0.0)) throw UsageError("--beta values must be non-negative");
    const auto v = make_steering_vector(params, profile, k, latent, beta);
    const auto acc = steered_accuracy(validated.head, data, v);
    for (std::size_t c = 0; c < acc.size(); ++c) {
      csv += format_number(beta) + "," + std::to_string(c) + "," + format_number(acc[c]) + "\n";
    }
    rows.push_back({{"beta", beta}, {"accuracy", acc}});
  }
  if (o.format == "csv") {
    emit(o, csv);
  } else {
    emit(o, dump({{"class", k}, {"latent", latent}, {"curves", rows}}));
  }
}

void cmd_gradfam(const Options& o) {
  const auto bundle = load_bundle(o.bundle);
  const auto F = stack_from_entry(bundle.at("feature_maps"), o.sample.value_or(0));
  Heatmap map;
  if (o.analytic || !bundle.contains("gradfam_grads")) {
    if (o.sae.empty() || !o.feature) throw UsageError("the analytic path needs --sae and --feature");
    const auto params = sae_from_bundle(load_bundle(o.sae));
    if (*o.feature >= params.latent_dim()) throw UsageError("--feature out of range");
    map = gradfam_avgpool_analytic(F, params.enc_w.row(*o.feature));
  } else {
    map = gradfam_from_gradients(F, stack_from_entry(bundle.at("gradfam_grads"), o.sample.value_or(0)));
  }
  emit(o, o.format == "csv" ? heatmap_csv(map) : dump(to_json(map)));
}

void cmd_report(const Options& o) {
  const auto bundle = load_bundle(o.bundle);
  const auto validated = validate_dataset(bundle);
  const auto params = sae_from_bundle(load_bundle(o.sae));
  const auto data = load_split(bundle, o.split.empty() ? "test" : o.split);
  const auto profile = class_conditional_means(encode(params, data.X), data.labels, data.num_classes());
  const auto alphas = sweep_alphas(o);
  AlphaGrid grid;
  if (o.alpha_max) grid.alpha_max = std::max(*o.alpha_max, grid.alpha_max);

  std::vector<std::size_t> classes;
  if (o.cls) {
    classes.push_back(require_class(o, data));
  } else {
    for (std::size_t k = 0; k < data.num_classes(); ++k) classes.push_back(k);
  }

  json per_class = json::array();
  for (const auto k : classes) {
    const auto latent = o.feature ? choose_latent(o, params, data) : dominant_feature(profile, k);
    const auto c = feature_contributions(params, latent);
    const auto curve = accuracy_sweep(validated.head, data, c, parse_direction(o.direction), alphas, k);
    json entry = {{"class", k}, {"latent", latent}, {"sweep", to_json(curve)}};
    if (const auto g = first_grid_index_at_or_below(curve, k, 0.05)) {
      const auto edited = apply_weight_edit(validated.head, c, {latent, parse_direction(o.direction), alphas[*g]});
      entry["suppressed"] = {{"alpha", alphas[*g]}, {"confusion", to_json(confusion_matrix(edited, data))}};
    } else {
      entry["suppressed"] = nullptr;
    }
    const auto results = alpha_crit_numerical(validated.head, data, c, k, grid);
    for (const char* method : {"analytical", "numerical"}) {
      try {
        entry["alpha_crit"][method] = to_json(summarize_alpha_crit(results, method));
      } catch (const DataError&) {
        entry["alpha_crit"][method] = nullptr;
      }
    }
    try {
      entry["validity"] = suppression_terms_json(suppression_term_distribution(results, c), o.bins);
    } catch (const DataError&) {
      entry["validity"] = nullptr;
    }
    per_class.push_back(std::move(entry));
  }

  const json doc = {{"class_names", data.class_names},
                    {"baseline", to_json(confusion_matrix(validated.head, data))},
                    {"profile", to_json(profile)},
                    {"direction", o.direction},
                    {"classes", per_class}};
  emit(o, dump(doc));
}

int classify(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const ConfigError*>(&e)) return kUsage;
  if (dynamic_cast<const NumericalError*>(&e)) return kNumerical;
  return kData;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Sparse-autoencoder feature discovery and weight-space editing for linear classification heads"};
  app.require_subcommand(1, 1);
  app.failure_message(CLI::FailureMessage::help);
  Options o;
  std::function<void(const Options&)> action;

  const auto format_check = CLI::IsMember({"csv", "json"});
  const auto direction_check = CLI::IsMember({"suppress", "enhance"});
  const auto split_check = CLI::IsMember({"train", "test"});

  auto bundle_in = [&](CLI::App* sub) { sub->add_option("--bundle", o.bundle, "Input dataset bundle")->required()->check(CLI::ExistingFile); };
  auto sae_in = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--sae", o.sae, "SAE bundle")->check(CLI::ExistingFile);
    if (required) opt->required();
  };
  auto out = [&](CLI::App* sub) { sub->add_option("--out", o.out, "Output path")->required(); };
  auto fmt = [&](CLI::App* sub) { sub->add_option("--format", o.format, "csv or json")->check(format_check); };
  auto split = [&](CLI::App* sub) { sub->add_option("--split", o.split, "train or test")->check(split_check); };
  auto cls = [&](CLI::App* sub) { sub->add_option("--class", o.cls, "Target class index"); };
  auto feature = [&](CLI::App* sub) { sub->add_option("--feature", o.feature, "Latent index (default: dominant for --class)"); };
  auto training = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "SAE seed");
    sub->add_option("--latent-dim", o.latent_dim, "Latent dimension")->check(CLI::PositiveNumber);
    sub->add_option("--lambda1", o.lambda1, "L1 coefficient")->check(CLI::NonNegativeNumber);
    sub->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    sub->add_option("--epochs", o.epochs, "Training epochs");
    sub->add_option("--batch", o.batch, "Minibatch size")->check(CLI::PositiveNumber);
  };
  auto alpha_range = [&](CLI::App* sub) {
    sub->add_option("--alpha-max", o.alpha_max, "Largest alpha")->check(CLI::NonNegativeNumber);
    sub->add_option("--alpha-step", o.alpha_step, "Alpha grid step")->check(CLI::PositiveNumber);
  };

  auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark bundle");
  synth->add_option("--seed", o.seed, "Data seed (default 7)");
  out(synth);
  synth->callback([&] {
    o.seed_set = synth->count("--seed") > 0;
    action = cmd_synth;
  });

  auto* train = app.add_subcommand("train-sae", "Train a sparse autoencoder on bundle activations");
  bundle_in(train);
  out(train);
  split(train);
  training(train);
  train->add_option("--trace", o.trace, "Per-epoch loss CSV");
  train->callback([&] { action = cmd_train_sae; });

  auto* analyze = app.add_subcommand("analyze", "Class-conditional latent means and dominant features");
  bundle_in(analyze);
  sae_in(analyze, true);
  out(analyze);
  fmt(analyze);
  split(analyze);
  feature(analyze);
  analyze->add_option("--top", o.sample, "Top-activating samples for --feature (json)");
  analyze->callback([&] { action = cmd_analyze; });

  auto* edit = app.add_subcommand("edit", "Apply a permanent weight edit and write the edited bundle");
  bundle_in(edit);
  sae_in(edit, true);
  out(edit);
  split(edit);
  cls(edit);
  feature(edit);
  edit->add_option("--direction", o.direction, "suppress or enhance")->check(direction_check);
  edit->add_option("--alpha", o.alpha, "Edit strength")->check(CLI::NonNegativeNumber);
  edit->callback([&] { action = cmd_edit; });

  auto* sweep = app.add_subcommand("sweep", "Per-class accuracy over an alpha grid");
  bundle_in(sweep);
  sae_in(sweep, false);
  out(sweep);
  fmt(sweep);
  split(sweep);
  cls(sweep);
  feature(sweep);
  alpha_range(sweep);
  training(sweep);
  sweep->add_option("--direction", o.direction, "suppress or enhance")->check(direction_check);
  sweep->add_option("--seeds", o.seeds, "Comma-separated SAE seeds for a robustness run");
  sweep->callback([&] { action = cmd_sweep; });

  auto* crit = app.add_subcommand("alpha-crit", "Per-sample critical suppression thresholds");
  bundle_in(crit);
  sae_in(crit, true);
  out(crit);
  fmt(crit);
  split(crit);
  cls(crit);
  feature(crit);
  alpha_range(crit);
  crit->add_option("--sample", o.sample, "Single sample index (exit 3 when it has no zero-crossing)");
  crit->add_option("--bins", o.bins, "Histogram bins for the validity distribution");
  crit->callback([&] { action = cmd_alpha_crit; });

  auto* rome = app.add_subcommand("rome", "Rank-one head update removing one class");
  bundle_in(rome);
  out(rome);
  cls(rome);
  rome->add_option("--target-value", o.target_value, "Target logit for the edited class");
  rome->add_option("--report", o.report, "JSON confusion matrices before and after");
  rome->callback([&] { action = cmd_rome; });

  auto* steer = app.add_subcommand("steer", "Inference-time steering along a decoder direction");
  bundle_in(steer);
  sae_in(steer, true);
  out(steer);
  fmt(steer);
  split(steer);
  cls(steer);
  feature(steer);
  steer->add_option("--beta", o.betas, "Steering strength, or a comma-separated list");
  steer->callback([&] { action = cmd_steer; });

  auto* gradfam = app.add_subcommand("gradfam", "Feature saliency map from feature maps and gradients");
  bundle_in(gradfam);
  sae_in(gradfam, false);
  out(gradfam);
  fmt(gradfam);
  feature(gradfam);
  gradfam->add_option("--sample", o.sample, "Sample index for 4-D stacks");
  gradfam->add_flag("--analytic", o.analytic, "Use the average-pool gradient E[l, k] / P");
  gradfam->callback([&] { action = cmd_gradfam; });

  auto* report = app.add_subcommand("report", "One JSON document with baseline, sweeps, thresholds and validity");
  bundle_in(report);
  sae_in(report, true);
  out(report);
  split(report);
  cls(report);
  feature(report);
  alpha_range(report);
  report->add_option("--direction", o.direction, "suppress or enhance")->check(direction_check);
  report->add_option("--format", o.format, "json only")->check(CLI::IsMember({"json"}));
  report->add_option("--bins", o.bins, "Histogram bins for the validity distribution");
  report->callback([&] { action = cmd_report; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    action(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return classify(e);
  }
  return kOk;
}

}  // namespace salve::cli
