#include "evoroc_cli/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "evoroc/binary_io.hpp"
#include "evoroc/checkpoint.hpp"
#include "evoroc/data.hpp"
#include "evoroc/error.hpp"
#include "evoroc/evo.hpp"
#include "evoroc/metrics.hpp"
#include "evoroc/parallel.hpp"
#include "evoroc/report.hpp"
#include "evoroc/trainer.hpp"
#include "evoroc_cli/roc_export.hpp"

#ifndef EVOROC_VERSION
#define EVOROC_VERSION "unknown"
#endif

namespace evoroc::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Profile {
  std::uint32_t patients;
  std::size_t epochs;
  std::size_t population;
  std::size_t max_generations;
};

constexpr Profile kFullProfile{60, 50, 512, 50};
constexpr Profile kQuickProfile{60, 15, 128, 50};

struct Options {
  std::uint64_t seed = 0;
  std::string profile = "paper";
  std::string data, model, head, out, history, stats, roc, split = "all";
  std::optional<std::uint32_t> patients;
  std::optional<std::size_t> epochs, population, max_generations;
  std::optional<double> lr, momentum, l2, mutation;
};

Profile profile_of(const Options& o) { return o.profile == "quick" ? kQuickProfile : kFullProfile; }

std::string digest_of(const fs::path& path) { return fmt::format("{:016x}", xxhash64(read_file(path))); }

// Collects everything one subcommand touched and writes it as
// `<primary output>.manifest.json` once the run is done.
class Manifest {
 public:
  Manifest(std::string command, const Options& o) : start_(std::chrono::steady_clock::now()) {
    doc_["tool"] = "evoroc";
    doc_["version"] = EVOROC_VERSION;
    doc_["command"] = std::move(command);
    doc_["seed"] = o.seed;
    doc_["profile"] = o.profile;
    doc_["threads"] = resolve_threads(0);
    doc_["config"] = json::object();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
    doc_["results"] = json::object();
  }

  json& config() { return doc_["config"]; }
  json& results() { return doc_["results"]; }
  void input(const std::string& role, const fs::path& path) { add("inputs", role, path); }
  void output(const std::string& role, const fs::path& path) { add("outputs", role, path); }

  fs::path write(const fs::path& primary) {
    doc_["duration_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    fs::path path = primary;
    path += ".manifest.json";
    write_file(path, doc_.dump(2) + "\n");
    return path;
  }

 private:
  void add(const char* list, const std::string& role, const fs::path& path) {
    doc_[list].push_back({{"role", role}, {"path", path.string()}, {"xxh64", digest_of(path)}});
  }

  json doc_;
  std::chrono::steady_clock::time_point start_;
};

json synth_json(const SynthConfig& c) {
  return {{"n_patients", c.n_patients},       {"min_slices", c.min_slices}, {"max_slices", c.max_slices},
          {"positive_fraction", c.positive_fraction}, {"amplitude", c.amplitude}, {"noise_std", c.noise_std},
          {"seed", c.seed}};
}

json aucs_json(double train, double val, double test) { return {{"train", train}, {"val", val}, {"test", test}}; }

int cmd_synth(const Options& o, std::ostream& out) {
  SynthConfig sc;
  sc.n_patients = o.patients.value_or(profile_of(o).patients);
  sc.seed = o.seed;
  Manifest m("synth", o);
  m.config()["synth"] = synth_json(sc);
  const Dataset d = generate_synthetic(sc);
  save_dataset(d, o.out);
  std::size_t positives = 0;
  for (const SliceRecord& s : d.slices) positives += s.label;
  m.output("dataset", o.out);
  m.results() = {{"slices", d.size()}, {"patients", d.patient_ids().size()}, {"positive_slices", positives}};
  m.write(o.out);
  out << fmt::format("wrote {} slices ({} positive) from {} patients to {}\n", d.size(), positives,
                     d.patient_ids().size(), o.out);
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  TrainConfig tc;
  tc.learning_rate = o.lr.value_or(tc.learning_rate);
  tc.momentum = o.momentum.value_or(tc.momentum);
  tc.l2_penalty = o.l2.value_or(tc.l2_penalty);
  tc.max_epochs = o.epochs.value_or(profile_of(o).epochs);
  tc.master_seed = o.seed;
  tc.validate();

  Manifest m("train", o);
  m.config() = {{"learning_rate", tc.learning_rate}, {"momentum", tc.momentum}, {"l2_penalty", tc.l2_penalty},
                {"batch_size", tc.batch_size},       {"max_epochs", tc.max_epochs}};
  const Dataset d = load_dataset(o.data);
  m.input("dataset", o.data);
  const DatasetSplits s = split_for_seed(d, o.seed);
  const TrainResult r = train(make_model(o.seed), s.train, s.val, tc);

  save_model(r.best, o.out);
  m.output("model", o.out);
  if (!o.history.empty()) {
    write_file(o.history, r.history.to_csv());
    m.output("history", o.history);
  }
  const EpochRecord& best = r.history.epochs[r.history.selected];
  m.results() = {{"epochs_run", r.history.epochs.size()},
                 {"selected_epoch", best.epoch},
                 {"train_auc", best.train_auc},
                 {"val_auc", best.val_auc}};
  m.write(o.out);
  out << fmt::format("selected epoch {} of {}: train AUC {:.6f}, validation AUC {:.6f}\n", best.epoch,
                     r.history.epochs.size(), best.train_auc, best.val_auc);
  return kExitOk;
}

int cmd_evolve(const Options& o, std::ostream& out) {
  const Profile p = profile_of(o);
  EvoConfig ec;
  ec.population_size = o.population.value_or(p.population);
  ec.mutation_probability = o.mutation.value_or(ec.mutation_probability);
  ec.max_generations = o.max_generations.value_or(p.max_generations);
  ec.master_seed = o.seed;
  ec.validate();

  Manifest m("evolve", o);
  m.config() = {{"population_size", ec.population_size},
                {"mutation_probability", ec.mutation_probability},
                {"max_generations", ec.max_generations}};
  const Dataset d = load_dataset(o.data);
  m.input("dataset", o.data);
  const CnnModel model = load_model(o.model);
  m.input("model", o.model);
  const DatasetSplits s = split_for_seed(d, o.seed);
  const EvolveResult r = evolve(model, s.train, s.val, ec);

  save_head(r.best, o.out);
  m.output("head", o.out);
  if (!o.stats.empty()) {
    write_file(o.stats, stats_csv(r.stats));
    m.output("stats", o.stats);
  }
  m.results() = {{"generations", r.stats.size()},        {"best_generation", r.best_generation},
                 {"best_index", r.best_index},           {"best_train_auc", r.best_train_auc},
                 {"best_val_auc", r.best_val_auc},       {"seed_train_auc", r.seed_train_auc},
                 {"seed_val_auc", r.seed_val_auc}};
  m.write(o.out);
  out << fmt::format("{} generations; best head from generation {} (member {}): train AUC {:.6f}, validation AUC "
                     "{:.6f} (seed head {:.6f} / {:.6f})\n",
                     r.stats.size(), r.best_generation, r.best_index, r.best_train_auc, r.best_val_auc,
                     r.seed_train_auc, r.seed_val_auc);
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  Manifest m("eval", o);
  m.config() = {{"split", o.split}};
  const Dataset d = load_dataset(o.data);
  m.input("dataset", o.data);
  CnnModel model = load_model(o.model);
  m.input("model", o.model);
  if (!o.head.empty()) {
    model = with_head(model, load_head(o.head));
    m.input("head", o.head);
  }
  const DatasetSplits s = split_for_seed(d, o.seed);
  std::vector<std::pair<std::string, const Dataset*>> chosen;
  if (o.split == "train" || o.split == "all") chosen.emplace_back("train", &s.train);
  if (o.split == "val" || o.split == "all") chosen.emplace_back("val", &s.val);
  if (o.split == "test" || o.split == "all") chosen.emplace_back("test", &s.test);

  std::string csv = "split,auc\n";
  for (const auto& [name, split] : chosen) {
    const double a = model_auc(model, *split);
    csv += fmt::format("{},{:.10f}\n", name, a);
    m.results()[name] = a;
    out << fmt::format("{} AUC {:.10f}\n", name, a);
  }
  if (!o.roc.empty()) {
    export_roc(model, *chosen.front().second, o.roc);
    m.output("roc", o.roc);
  }
  write_file(o.out, csv);
  m.output("aucs", o.out);
  m.write(o.out);
  return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  Manifest m("report", o);
  const Dataset d = load_dataset(o.data);
  m.input("dataset", o.data);
  const CnnModel model = load_model(o.model);
  m.input("model", o.model);
  const ClassifierHead head = load_head(o.head);
  m.input("head", o.head);
  const DatasetSplits s = split_for_seed(d, o.seed);

  const FeatureCache caches[3] = {build_feature_cache(model, s.train), build_feature_cache(model, s.val),
                                  build_feature_cache(model, s.test)};
  const ClassifierHead sgd_head = extract_head(model);
  ComparisonReport rep;
  rep.sgd = {head_auc(sgd_head, caches[0]), head_auc(sgd_head, caches[1]), head_auc(sgd_head, caches[2])};
  rep.ga = {head_auc(head, caches[0]), head_auc(head, caches[1]), head_auc(head, caches[2])};
  write_report(rep, o.out);
  fs::path csv_path = o.out;
  csv_path.replace_extension(".csv");
  m.output("table", o.out);
  m.output("csv", csv_path);
  m.results() = {{"sgd", aucs_json(*rep.sgd.train, *rep.sgd.val, *rep.sgd.test)},
                 {"ga", aucs_json(*rep.ga.train, *rep.ga.val, *rep.ga.test)},
                 {"test_improvement_pct", rep.improvement_percent()}};
  m.write(o.out);
  out << report_table(rep);
  return kExitOk;
}

void add_seed(CLI::App* c, Options& o) {
  c->add_option("--seed", o.seed, "Master seed for every random stream")->capture_default_str();
}

void add_profile(CLI::App* c, Options& o) {
  c->add_option("--profile", o.profile, "Default sizes: paper (512 members, 50 epochs) or quick (128, 15)")
      ->check(CLI::IsMember({"paper", "quick"}))
      ->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train a CNN with SGD, then evolve its classifier head for ROC AUC", "evoroc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EVOROC_VERSION);
  Options o;

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic patient-grouped dataset");
  add_seed(synth, o);
  add_profile(synth, o);
  synth->add_option("--patients", o.patients, "Number of patients (default 60)")->check(CLI::PositiveNumber);
  synth->add_option("--out", o.out, "Output dataset (.evod)")->required();

  CLI::App* trn = app.add_subcommand("train", "Train the CNN with SGD and keep the best-validation checkpoint");
  add_seed(trn, o);
  add_profile(trn, o);
  trn->add_option("--data", o.data, "Input dataset")->required()->check(CLI::ExistingFile);
  trn->add_option("--out", o.out, "Output model checkpoint (.evom)")->required();
  trn->add_option("--history", o.history, "Per-epoch CSV");
  trn->add_option("--epochs", o.epochs, "Maximum epochs (paper 50, quick 15)");
  trn->add_option("--lr", o.lr, "Learning rate (0.001)");
  trn->add_option("--momentum", o.momentum, "Momentum (0.8)");
  trn->add_option("--l2", o.l2, "L2 penalty (0.001)");

  CLI::App* evo = app.add_subcommand("evolve", "Evolve the classifier head of a trained model");
  add_seed(evo, o);
  add_profile(evo, o);
  evo->add_option("--data", o.data, "Input dataset")->required()->check(CLI::ExistingFile);
  evo->add_option("--model", o.model, "Trained model checkpoint")->required()->check(CLI::ExistingFile);
  evo->add_option("--out", o.out, "Output head checkpoint (.evom)")->required();
  evo->add_option("--stats", o.stats, "Per-generation CSV");
  evo->add_option("--population", o.population, "Population size, a multiple of 4 (paper 512, quick 128)");
  evo->add_option("--mutation", o.mutation, "Per-layer mutation probability (0.01)");
  evo->add_option("--max-generations", o.max_generations, "Generation cap (50)");

  CLI::App* ev = app.add_subcommand("eval", "Score a model (optionally with an evolved head) on the splits");
  add_seed(ev, o);
  ev->add_option("--data", o.data, "Input dataset")->required()->check(CLI::ExistingFile);
  ev->add_option("--model", o.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--head", o.head, "Head checkpoint replacing the model's fully connected layers")
      ->check(CLI::ExistingFile);
  ev->add_option("--split", o.split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  ev->add_option("--roc", o.roc, "ROC curve CSV for the split (first split when --split all)");
  ev->add_option("--out", o.out, "Output CSV of split AUCs")->required();

  CLI::App* rep = app.add_subcommand("report", "Compare the SGD head with an evolved head on all splits");
  add_seed(rep, o);
  rep->add_option("--data", o.data, "Input dataset")->required()->check(CLI::ExistingFile);
  rep->add_option("--model", o.model, "SGD model checkpoint")->required()->check(CLI::ExistingFile);
  rep->add_option("--head", o.head, "Evolved head checkpoint")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", o.out, "Output table; a CSV is written next to it")->required();

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("evoroc");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << EVOROC_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "evoroc: usage error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(o, out);
    if (trn->parsed()) return cmd_train(o, out);
    if (evo->parsed()) return cmd_evolve(o, out);
    if (ev->parsed()) return cmd_eval(o, out);
    return cmd_report(o, out);
  } catch (const std::exception& e) {
    err << "evoroc: error: " << e.what() << "\n";
    return kExitDomain;
  }
}

}  // namespace evoroc::cli
