#include "fedgrain/cli/commands.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <set>
#include <thread>

#include "fedgrain/autodiff/param_set.hpp"
#include "fedgrain/common/digest.hpp"
#include "fedgrain/common/error.hpp"
#include "fedgrain/cli/run_io.hpp"
#include "fedgrain/federated/evaluation.hpp"

namespace fedgrain::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDataManifestFormat = "fedgrain-data-manifest";
constexpr const char* kEvalFormat = "fedgrain-eval";

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void note(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string seed_tag(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

// Clears a directory we are about to regenerate, refusing to touch anything
// that does not look like one of our own outputs.
void prepare_output(const fs::path& dir, const char* marker) {
  std::error_code ec;
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !fs::exists(dir / marker))
      throw IoError("refusing to overwrite " + dir.string() + ": not empty and not a previous output");
    fs::remove_all(dir, ec);
    if (ec) throw IoError("cannot clear " + dir.string() + ": " + ec.message());
  }
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_data_manifest(const fs::path& dir) {
  nlohmann::ordered_json artifacts = nlohmann::ordered_json::array();
  for (const auto& a : scan_artifacts(dir, true)) artifacts.push_back(to_json(a));
  write_file(dir / "manifest.json", dump({{"format", kDataManifestFormat}, {"version", 1}, {"artifacts", artifacts}}));
}

void verify_data(const fs::path& dir) {
  const auto j = read_json(dir / "manifest.json");
  if (j.value("format", "") != kDataManifestFormat) throw FormatError((dir / "manifest.json").string() + ": not a dataset manifest", 0);
  std::vector<Artifact> artifacts;
  for (const auto& a : j.at("artifacts")) artifacts.push_back(artifact_from_json(a));
  verify_artifacts(dir, artifacts);
}

nlohmann::ordered_json training_results(const fed::TrainingResult& r) {
  return {{"best_round", r.best_round},
          {"best_mean_loss", r.history.empty() ? 0.0 : r.history[r.best_round - 1].mean_loss},
          {"rounds", r.history.size()}};
}

nlohmann::ordered_json client_sizes(const std::vector<fed::ClientState>& clients) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& c : clients) {
    std::size_t synthetic = 0;
    for (const auto& s : c.data.train) synthetic += !s.is_real();
    out.push_back({{"id", c.id}, {"n_train", c.n()}, {"synthetic", synthetic}});
  }
  return out;
}

RunRecord make_record(const ExperimentConfig& cfg, std::string method, const fs::path& data,
                      fed::TrainingResult training) {
  RunRecord r;
  r.config = cfg;
  r.method = std::move(method);
  r.dataset = data;
  r.training = std::move(training);
  return r;
}

void write_config(const fs::path& dir, const ExperimentConfig& cfg) { write_file(dir / "config.json", dump(to_json(cfg))); }

std::vector<fs::path> leaf_runs(const fs::path& run) {
  const auto m = read_run_manifest(run);
  if (m.subruns.empty()) return {run};
  std::vector<fs::path> out;
  for (const auto& s : m.subruns)
    for (auto& p : leaf_runs(run / s)) out.push_back(std::move(p));
  return out;
}

}  // namespace

fs::path dataset_dir(const fs::path& root, std::uint64_t seed) { return root / "data" / seed_tag(seed); }

fs::path run_dir(const fs::path& root, fed::TrainingMode mode, std::uint64_t seed) {
  return root / "runs" / fed::mode_name(mode) / seed_tag(seed);
}

fs::path report_dir(const fs::path& root) { return root / "report"; }

fs::path cmd_synth(const ExperimentConfig& cfg, const fs::path& root, const Logger& log) {
  validate(cfg);
  const fs::path dir = dataset_dir(root, cfg.dataset.seed);
  prepare_output(dir, "dataset.json");
  const auto datasets = synth::make_client_datasets(cfg.dataset);
  synth::write_datasets(dir, cfg.dataset, datasets);
  write_data_manifest(dir);
  for (const auto& d : datasets)
    note(log, "[" + seed_tag(cfg.dataset.seed) + "] client " + d.client_id + ": " + std::to_string(d.train.size()) +
                  " train, " + std::to_string(d.validation.size()) + " validation, " + std::to_string(d.test.size()) +
                  " test -> " + dir.string());
  return dir;
}

void write_run(const fs::path& dir, const RunRecord& rec) {
  std::error_code ec;
  fs::create_directories(dir / "checkpoints", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_config(dir, rec.config);

  std::string rounds;
  for (const auto& r : rec.training.history) rounds += fed::to_json(r).dump() + "\n";
  write_file(dir / "rounds.jsonl", rounds);
  ad::save_checkpoint(dir / "checkpoints" / "best.fgps", rec.training.best);
  for (std::size_t t = 0; t < rec.training.round_models.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "round-%04zu.fgps", t + 1);
    ad::save_checkpoint(dir / "checkpoints" / name, rec.training.round_models[t]);
  }
  if (rec.server) {
    std::string lines;
    for (const auto& e : rec.server->transcript()) lines += fed::to_json(e).dump() + "\n";
    write_file(dir / "transcript.jsonl", lines);
  }
  if (rec.style_models)
    for (const auto& s : *rec.style_models) models::save_style_model(dir / "style_models" / s.owner, s);

  RunManifest m;
  m.method = rec.method;
  m.mode = fed::mode_name(rec.config.federated.mode);
  m.seed = rec.config.federated.seed;
  m.code_version = code_version();
  m.config_sha256 = sha256_file(dir / "config.json");
  m.dataset_path = fs::relative(rec.dataset, dir).generic_string();
  m.dataset_sha256 = sha256_file(rec.dataset / "manifest.json");
  m.timings = rec.timings;
  m.results = rec.results;
  write_run_manifest(dir, m);
}

fs::path cmd_train(const ExperimentConfig& cfg, fed::TrainingMode mode, const fs::path& root, const Logger& log) {
  validate(cfg);
  ExperimentConfig resolved = cfg;
  resolved.federated.mode = mode;
  const fs::path data = dataset_dir(root, cfg.dataset.seed);
  if (!fs::is_regular_file(data / "dataset.json"))
    throw IoError("no dataset at " + data.string() + "; run the synth command first");
  if (synth::to_json(synth::read_dataset_config(data)) != synth::to_json(cfg.dataset))
    throw ConfigError("dataset at " + data.string() + " was generated from a different dataset configuration");
  const std::string tag = "[" + seed_tag(resolved.federated.seed) + "] " + fed::mode_name(mode);

  Stopwatch clock;
  verify_data(data);
  auto datasets = synth::read_datasets(data);
  const double load_s = clock.lap();
  auto clients = fed::make_clients(std::move(datasets), resolved.federated);
  const fs::path dir = run_dir(root, mode, resolved.federated.seed);
  prepare_output(dir, "manifest.json");
  note(log, tag + ": training " + std::to_string(clients.size()) + " client(s)");

  const fed::FederatedConfig& fc = resolved.federated;
  switch (mode) {
    case fed::TrainingMode::kSeparate: {
      RunManifest parent;
      parent.method = "separate";
      double total = 0;
      for (auto& c : clients) {
        std::vector<fed::ClientState> alone{c};
        Stopwatch sw;
        auto results = fed::separate_training(alone, fc);
        const double train_s = sw.lap();
        total += train_s;
        RunRecord rec = make_record(resolved, "separate-" + c.id, data, std::move(results[0]));
        rec.timings = {{"load", load_s}, {"training", train_s}};
        rec.results = training_results(rec.training);
        rec.results["clients"] = client_sizes(alone);
        write_run(dir / ("client-" + c.id), rec);
        parent.subruns.push_back("client-" + c.id);
        note(log, tag + ": client " + c.id + " best round " + std::to_string(rec.training.best_round));
      }
      write_config(dir, resolved);
      parent.mode = fed::mode_name(mode);
      parent.seed = fc.seed;
      parent.code_version = code_version();
      parent.config_sha256 = sha256_file(dir / "config.json");
      parent.dataset_path = fs::relative(data, dir).generic_string();
      parent.dataset_sha256 = sha256_file(data / "manifest.json");
      parent.timings = {{"load", load_s}, {"training", total}};
      write_run_manifest(dir, parent);
      break;
    }
    case fed::TrainingMode::kCentralized: {
      RunRecord rec = make_record(resolved, "central", data, fed::centralized_training(clients, fc));
      rec.timings = {{"load", load_s}, {"training", clock.lap()}};
      rec.results = training_results(rec.training);
      rec.results["clients"] = client_sizes({fed::pool_clients(clients, fc)});
      write_run(dir, rec);
      note(log, tag + ": best round " + std::to_string(rec.training.best_round));
      break;
    }
    case fed::TrainingMode::kFedAvg:
    case fed::TrainingMode::kFedTransfer: {
      fed::Server server;
      fed::StyleExchange exchange;
      double style_s = 0;
      if (mode == fed::TrainingMode::kFedTransfer && fc.style_transfer) {
        clock.lap();
        exchange = fed::federated_image_style_transfer(clients, fc, server);
        style_s = clock.lap();
        for (const auto& s : exchange.models) {
          char l1[32];
          std::snprintf(l1, sizeof l1, "%.4f", s.final_l1);
          note(log, tag + ": style model " + s.owner + " final L1 " + l1 + (s.shareable() ? "" : " (above threshold)"));
        }
      }
      clock.lap();
      RunRecord rec = make_record(resolved, fed::mode_name(mode), data, fed::federated_training(clients, fc, &server));
      rec.server = &server;
      rec.style_models = &exchange.models;
      rec.timings = {{"load", load_s}, {"style_transfer", style_s}, {"training", clock.lap()}};
      rec.results = training_results(rec.training);
      rec.results["clients"] = client_sizes(clients);
      nlohmann::ordered_json style = nlohmann::ordered_json::array();
      for (const auto& s : exchange.models)
        style.push_back({{"owner", s.owner}, {"final_l1", s.final_l1}, {"shareable", s.shareable()}});
      rec.results["style_models"] = style;
      const auto audit = fed::audit_messages(server.archive());
      rec.results["transcript_audit"] = {{"messages", audit.messages},
                                         {"checkpoints", audit.checkpoints},
                                         {"metadata", audit.metadata},
                                         {"violations", audit.violations}};
      write_run(dir, rec);
      note(log, tag + ": best round " + std::to_string(rec.training.best_round) + ", transcript " +
                    std::to_string(audit.messages) + " messages, " + std::to_string(audit.violations.size()) +
                    " audit violations");
      break;
    }
  }
  return dir;
}

std::vector<fs::path> cmd_eval(const fs::path& run, const std::optional<fs::path>& dataset, const Logger& log) {
  const RunManifest m = read_run_manifest(run);
  if (!m.subruns.empty()) {
    std::vector<fs::path> out;
    for (const auto& s : m.subruns)
      for (auto& p : cmd_eval(run / s, dataset, log)) out.push_back(std::move(p));
    return out;
  }
  verify_artifacts(run, m.artifacts);
  const ExperimentConfig cfg = experiment_from_json(read_json(run / "config.json"));
  const fs::path data = dataset ? *dataset : run / m.dataset_path;
  if (!fs::is_regular_file(data / "manifest.json")) throw IoError("no dataset at " + data.string());
  if (sha256_file(data / "manifest.json") != m.dataset_sha256)
    throw IoError("dataset at " + data.string() + " is not the one " + run.string() + " was trained on");
  verify_data(data);
  const auto datasets = synth::read_datasets(data);
  const auto params = ad::load_checkpoint(run / "checkpoints" / "best.fgps");
  const auto ev = fed::evaluate_model(params, cfg.federated.segmenter, datasets, {cfg.evaluation.domain});

  const fs::path dir = run / "eval";
  prepare_output(dir, "summary.json");
  nlohmann::ordered_json sets = nlohmann::ordered_json::array();
  for (const auto& r : ev.clients) {
    write_file(dir / ("test-" + r.test_set + ".csv"), metrics::to_csv(r));
    write_file(dir / ("test-" + r.test_set + ".json"), metrics::to_json_summary(r));
    sets.push_back(nlohmann::ordered_json::parse(metrics::to_json_summary(r)));
  }
  write_file(dir / "global.json", metrics::to_json_summary(ev.global));
  sets.push_back(nlohmann::ordered_json::parse(metrics::to_json_summary(ev.global)));
  const nlohmann::ordered_json summary = {{"format", kEvalFormat},
                                          {"version", 1},
                                          {"method", m.method},
                                          {"mode", m.mode},
                                          {"seed", m.seed},
                                          {"checkpoint_sha256", sha256_file(run / "checkpoints" / "best.fgps")},
                                          {"dataset_sha256", m.dataset_sha256},
                                          {"domain", domain_name(cfg.evaluation.domain)},
                                          {"test_sets", sets}};
  write_file(dir / "summary.json", dump(summary));
  nlohmann::ordered_json artifacts = nlohmann::ordered_json::array();
  for (const auto& a : scan_artifacts(dir, true)) artifacts.push_back(to_json(a));
  write_file(dir / "manifest.json", dump({{"format", "fedgrain-eval-manifest"}, {"version", 1}, {"artifacts", artifacts}}));

  char line[160];
  std::snprintf(line, sizeof line, "[%s] %s: global MAP %.3f, MVI %.3f, ARI %.3f", seed_tag(m.seed).c_str(),
                m.method.c_str(), ev.global.map, ev.global.mvi, ev.global.mean_ari);
  note(log, line);
  return {dir};
}

std::vector<fs::path> find_runs(const fs::path& dir) {
  if (is_run_directory(dir)) return {dir};
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (it->is_directory() && is_run_directory(it->path())) {
      out.push_back(it->path());
      it.disable_recursion_pending();
    }
  }
  if (ec) throw IoError("cannot scan " + dir.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

ReportTable cmd_report(const std::vector<fs::path>& inputs, const fs::path& out) {
  std::set<fs::path> seen;
  std::vector<nlohmann::json> summaries;
  for (const auto& in : inputs)
    for (const auto& run : find_runs(in))
      for (const auto& leaf : leaf_runs(run)) {
        if (!seen.insert(fs::weakly_canonical(leaf)).second) continue;
        const fs::path s = leaf / "eval" / "summary.json";
        if (!fs::is_regular_file(s)) throw IoError(leaf.string() + " has not been evaluated; run the eval command first");
        summaries.push_back(read_json(s));
      }
  ReportTable t = build_report(summaries);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  write_file(out / "report.csv", report_csv(t));
  write_file(out / "report.txt", report_text(t));
  write_file(out / "report.dat", report_dat(t));
  return t;
}

void run_parallel(std::size_t jobs, const std::vector<std::function<void()>>& tasks) {
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < tasks.size();) {
      try {
        tasks[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < std::min(jobs, tasks.size()); ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace fedgrain::cli
