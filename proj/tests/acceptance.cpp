// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <malloc.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "fedgrain/cli/commands.hpp"
#include "fedgrain/cli/run_io.hpp"
#include "fedgrain/federated/training.hpp"
#include "fedgrain/metrics/instance_ap.hpp"
#include "fedgrain/metrics/partition.hpp"
#include "fedgrain/models/segmenter.hpp"
#include "fedgrain/models/style_model.hpp"
#include "fedgrain/synthdata/pgm.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fedgrain;
using namespace fedgrain::helpers;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  Outcome() = default;
  Outcome(bool p, std::string d) : pass(p), detail(std::move(d)) {}

  bool pass = false;
  std::string detail;
  std::vector<std::string> notes;  // printed indented below the verdict
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome ari_oracle() {
  Rng rng(101);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    const auto a = oracle::random_partition(n, 1 + rng() % 10, rng);
    const auto b = oracle::random_partition(n, 1 + rng() % 10, rng);
    worst = std::max(worst, std::abs(metrics::adjusted_rand_index(oracle::as_row(a), oracle::as_row(b)) -
                                     oracle::pair_counting_ari(a, b)));
  }
  return {worst < 1e-12, fmt("100 pairs, max |diff| %.2e", worst)};
}

Outcome vi_properties() {
  Rng rng(102);
  std::size_t violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    const auto x = oracle::random_partition(n, 1 + rng() % 8, rng);
    const auto y = oracle::random_partition(n, 1 + rng() % 8, rng);
    const auto z = oracle::random_partition(n, 1 + rng() % 8, rng);
    const auto X = oracle::as_row(x), Y = oracle::as_row(y), Z = oracle::as_row(z);
    // Relabeled copy of x: same partition, different ids.
    std::vector<std::uint32_t> relabeled(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) relabeled[i] = 1000 - x[i] * 7;
    const double xy = metrics::variation_of_information(X, Y), yx = metrics::variation_of_information(Y, X);
    const double yz = metrics::variation_of_information(Y, Z), xz = metrics::variation_of_information(X, Z);
    violations += !(xy >= 0.0);
    violations += !(std::abs(xy - yx) < 1e-12);
    violations += !(xz <= xy + yz + 1e-12);
    violations += metrics::variation_of_information(X, oracle::as_row(relabeled)) != 0.0;
    // Identity of indiscernibles: zero only for equal partitions.
    violations += (xy == 0.0) != (metrics::adjusted_rand_index(X, Y) == 1.0 && xy < 1e-12);
  }
  const double hand = metrics::variation_of_information(oracle::as_row({1, 1, 2, 2}), oracle::as_row({1, 2, 1, 2}));
  return {violations == 0 && hand == 2.0,
          std::to_string(violations) + " property violations over 100 triples, hand case " + fmt("%.17g bits", hand)};
}

Outcome ap_cases() {
  Rng rng(103);
  const InstanceMap m = oracle::random_rect_instances(16, 16, 6, rng);
  const double identical = metrics::average_precision(m, m);
  InstanceMap gt(1, 10, std::vector<std::uint32_t>{1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  InstanceMap pred(1, 10, std::vector<std::uint32_t>{3, 3, 3, 3, 3, 3, 0, 0, 0, 0});  // IoU 6/10
  const double single = metrics::average_precision(pred, gt);
  std::size_t cases = 0, mismatches = 0;
  while (cases < 500) {
    const std::uint32_t k = 1 + static_cast<std::uint32_t>(rng() % 6);
    const InstanceMap g = oracle::random_rect_instances(10, 10, k, rng);
    const InstanceMap p = oracle::perturb_instances(g, uniform(rng, 0.0, 0.35), k, rng);
    const auto ov = metrics::instance_overlaps(p, g);
    std::set<double> ious;
    for (const auto& c : ov.candidates) ious.insert(c.iou);
    if (ious.size() != ov.candidates.size()) continue;
    ++cases;
    for (double t : metrics::kApThresholds)
      mismatches += metrics::match_at_threshold(ov, t).tp != oracle::exhaustive_max_matches(p, g, t);
  }
  return {identical == 1.0 && single == 0.2 && mismatches == 0,
          "identical " + fmt("%.17g", identical) + ", IoU 0.6 pair " + fmt("%.17g", single) + ", " +
              std::to_string(mismatches) + " greedy/exhaustive mismatches in 500 cases"};
}

Outcome gradients() {
  Rng rng(104);
  std::vector<std::string> failed;
  std::size_t checks = 0;
  double worst = 0;
  auto record = [&](const std::string& name, const GradCheckReport& r) {
    ++checks;
    worst = std::max(worst, r.max_rel_error());
    if (!r.passed) failed.push_back(name + ": " + r.summary());
  };
  const LayerKind kinds[] = {LayerKind::kConv2d,      LayerKind::kRelu,           LayerKind::kLeakyRelu,
                             LayerKind::kSigmoid,     LayerKind::kUpsample2x,     LayerKind::kMaxPool2x2,
                             LayerKind::kMeanPool2x2, LayerKind::kConcatChannels, LayerKind::kSoftmaxChannels};
  for (LayerKind kind : kinds)
    for (Padding pad : {Padding::kZero, Padding::kReflect}) {
      if (kind != LayerKind::kConv2d && pad == Padding::kReflect) continue;
      ParamSet p;
      if (kind == LayerKind::kConv2d) {
        p.add("weight", random_tensor({3, 2, 3, 3}, rng));
        p.add("bias", random_tensor({3}, rng));
      }
      p.add("x", kink_free({2, 2, 8, 8}, rng));
      if (kind == LayerKind::kConcatChannels) p.add("x2", kink_free({2, 1, 8, 8}, rng));
      const LayerSpec spec{kind, pad, 0.2};
      Graph probe;
      const Binding pb = probe.bind(p);
      std::vector<NodeId> pp, xx;
      for (std::size_t i = 0; i < layer_param_count(kind); ++i) pp.push_back(pb.node(i));
      for (std::size_t i = 0; i < layer_input_count(kind); ++i) xx.push_back(pb.node(pp.size() + i));
      const Shape out = probe.value(apply_layer(probe, spec, pp, xx)).shape();
      record(std::string(layer_name(kind)),
             finite_diff_check(layer_loss(spec, pp.size(), xx.size(), random_tensor(out, rng)), p, 1e-4));
    }

  const auto lab = random_labels(8, 8, rng);
  const auto img = random_image(8, 8, rng);
  const LabelMap* labs[] = {&lab};
  const GrayImage* ims[] = {&img};
  const auto x_t = models::one_hot_batch(labs);
  const auto y_t = models::image_batch(ims);

  models::SegmenterConfig seg{2, 2, 3};
  const auto seg_params = with_random_biases(models::build_segmenter(seg, 7), rng);
  const auto label_vec = models::label_vector(labs);
  record("segmentation loss", finite_diff_check(
                                  [&](Graph& g, const Binding& b) {
                                    return models::segmentation_loss_node(g, b, seg, y_t, label_vec);
                                  },
                                  seg_params, 1e-4));

  models::StyleModelConfig cfg;
  cfg.generator_base = 2;
  cfg.discriminator_base = 3;
  const auto gen = with_random_biases(models::build_generator(cfg, 10), rng);
  const auto disc = with_random_biases(models::build_discriminator(cfg, 11), rng);
  record("discriminator loss", finite_diff_check(
                                   [&](Graph& g, const Binding& d) {
                                     const auto gb = g.bind(gen, false);
                                     const auto x = g.constant(x_t), y = g.constant(y_t);
                                     const auto fake = models::generator_forward(g, gb, x, cfg);
                                     return models::discriminator_loss_node(
                                         g, models::discriminator_logits(g, d, x, y, cfg),
                                         models::discriminator_logits(g, d, x, fake, cfg));
                                   },
                                   disc, 1e-4));
  record("generator loss", finite_diff_check(
                               [&](Graph& g, const Binding& gb) {
                                 const auto d = g.bind(disc, false);
                                 const auto x = g.constant(x_t), y = g.constant(y_t);
                                 const auto fake = models::generator_forward(g, gb, x, cfg);
                                 return models::generator_loss_node(
                                     g, models::discriminator_logits(g, d, x, fake, cfg), fake, y, cfg.lambda_l1);
                               },
                               gen, 1e-4));
  Outcome o{failed.empty(), std::to_string(checks) + " checks, max relative error " + fmt("%.2e", worst)};
  o.notes = failed;
  return o;
}

synth::DatasetConfig small_two_client(std::size_t samples, std::uint64_t seed) {
  synth::DatasetConfig c = cli::default_experiment().dataset;
  c.seed = seed;
  for (auto& cl : c.clients) cl.samples = samples;
  return c;
}

Outcome fedavg_equivalence() {
  const auto data = synth::make_client_datasets(small_two_client(24, 5));
  fed::FederatedConfig cfg;
  cfg.rounds = 1;
  cfg.local_epochs = 1;
  cfg.batch_size = 1000;
  cfg.optimizer = ad::OptimizerKind::kSgd;
  cfg.learning_rate = 0.1;
  cfg.augment = false;
  cfg.style_transfer = false;
  cfg.seed = 5;
  auto clients = fed::make_clients(data, cfg);
  if (clients[0].n() != clients[1].n()) return {false, "unequal client sizes"};
  const auto result = fed::federated_training(clients, cfg);

  const auto w0 = models::build_segmenter(cfg.segmenter, derive_seed(cfg.seed, {fed::kInitStream}));
  std::vector<const GrayImage*> ims;
  std::vector<const LabelMap*> labs;
  for (const auto& d : data)
    for (const auto& s : d.train) ims.push_back(&s.image), labs.push_back(&s.labels);
  const auto [loss, grad] =
      models::segmentation_loss_and_grad(w0, cfg.segmenter, models::image_batch(ims), models::label_vector(labs));
  const double diff = ad::max_abs_diff(result.best, ad::sgd_step(w0, grad, cfg.learning_rate));
  return {diff < 1e-10, fmt("M=2, n_i=%.0f, max |w_fedavg - w_central| = %.2e", double(clients[0].n()), diff)};
}

Outcome privacy_transcript() {
  fed::FederatedConfig cfg;
  cfg.rounds = 2;
  cfg.style.epochs = 2;
  cfg.seed = 6;
  auto clients = fed::make_clients(synth::make_client_datasets(small_two_client(30, 6)), cfg);
  fed::Server server;
  const auto run = fed::fed_transfer(clients, cfg, server);
  const auto audit = fed::audit_messages(server.archive());
  std::size_t kinds_ok = 0;
  for (const auto& e : server.transcript())
    kinds_ok += e.kind == fed::PayloadKind::kCheckpoint || e.kind == fed::PayloadKind::kMetadata;

  // Negative control: the same audit must catch an image or label map smuggled into the archive.
  auto tampered = server.archive();
  tampered.push_back({1, "A", fed::kServerId, fed::PayloadKind::kMetadata, "leak",
                      synth::encode_pgm(clients[0].data.train[0].labels)});
  ad::ParamSet image_like;
  image_like.add("x", ad::Tensor(ad::Shape{1, 1, 64, 64}, 0.5));
  tampered.push_back(
      {1, "A", fed::kServerId, fed::PayloadKind::kCheckpoint, "leak", ad::serialize_checkpoint(image_like)});
  const auto control = fed::audit_messages(tampered);

  const bool pass = audit.clean() && kinds_ok == server.transcript().size() && !server.transcript().empty() &&
                    control.violations.size() >= 2 && run.training.history.size() == cfg.rounds;
  return {pass, std::to_string(audit.messages) + " messages (" + std::to_string(audit.checkpoints) + " checkpoints, " +
                    std::to_string(audit.metadata) + " metadata), " + std::to_string(audit.violations.size()) +
                    " violations; negative control flagged " + std::to_string(control.violations.size())};
}

struct Cell {
  double sum = 0;
  int n = 0;
  void add(double v) { sum += v, ++n; }
  double mean() const { return sum / n; }
};

Outcome directional_reproduction() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path root = fs::current_path() / "acceptance-runs";
  cli::ExperimentConfig base = cli::default_experiment();
  base.repeat = 3;
  const auto seeds = cli::expand_seeds(base, std::nullopt, std::nullopt);
  const std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::function<void()>> tasks;
  for (const auto& c : seeds) tasks.push_back([&c, &root] { cli::cmd_synth(c, root); });
  cli::run_parallel(jobs, tasks);
  tasks.clear();
  const fed::TrainingMode modes[] = {fed::TrainingMode::kSeparate, fed::TrainingMode::kCentralized,
                                     fed::TrainingMode::kFedAvg, fed::TrainingMode::kFedTransfer};
  for (const auto& c : seeds)
    for (auto m : modes)
      tasks.push_back([&c, &root, m] {
        const auto dir = cli::cmd_train(c, m, root);
        cli::cmd_eval(dir);
      });
  cli::run_parallel(jobs, tasks);
  const auto table = cli::cmd_report({root / "runs"}, root / "report");
  const double minutes = seconds_since(t0) / 60.0;

  // Seed means straight from the per-run eval summaries.
  std::map<std::string, Cell> cell;
  for (const auto& c : seeds) {
    const auto seed_dir = "seed-" + std::to_string(c.federated.seed);
    auto read = [&](const fs::path& run, const std::string& key) {
      const auto s = cli::read_json(run / "eval" / "summary.json");
      for (const auto& ts : s["test_sets"]) cell[key + "/" + ts["test_set"].get<std::string>()].add(ts["MAP"]);
      cell[key + "/global-mvi"].add(s["test_sets"].back()["MVI"]);
    };
    read(root / "runs/separate" / seed_dir / "client-A", "sepA");
    read(root / "runs/separate" / seed_dir / "client-B", "sepB");
    read(root / "runs/central" / seed_dir, "central");
    read(root / "runs/fedavg" / seed_dir, "fedavg");
    read(root / "runs/fedtransfer" / seed_dir, "fedtransfer");
  }
  const double drop_a = cell["sepA/A"].mean() - cell["sepA/B"].mean();
  const double drop_b = cell["sepB/B"].mean() - cell["sepB/A"].mean();
  const bool a = drop_a >= 0.05 && drop_b >= 0.05;
  const double gain = cell["fedtransfer/global"].mean() - cell["fedavg/global"].mean();
  const bool b = gain >= 0.02 && cell["fedtransfer/global-mvi"].mean() < cell["fedavg/global-mvi"].mean();
  const double gap = std::abs(cell["fedtransfer/global"].mean() - cell["central/global"].mean());
  const bool c = gap <= 0.05;
  const bool budget = minutes <= 30.0;

  Outcome o{a && b && c && budget, fmt("3 seeds, %.1f min on %.0f thread(s)", minutes, double(jobs))};
  o.notes.push_back(std::string(a ? "PASS" : "FAIL").insert(0, "7a ") +
                    fmt(": separate-A own-cross MAP %.3f, ", drop_a) + fmt("separate-B own-cross MAP %.3f (need >= 0.05)", drop_b));
  o.notes.push_back(std::string(b ? "PASS" : "FAIL").insert(0, "7b ") +
                    fmt(": global MAP fedtransfer - fedavg %.3f (need >= 0.02), ", gain) +
                    fmt("global MVI fedtransfer %.3f vs fedavg %.3f", cell["fedtransfer/global-mvi"].mean(),
                        cell["fedavg/global-mvi"].mean()));
  o.notes.push_back(std::string(c ? "PASS" : "FAIL").insert(0, "7c ") +
                    fmt(": |global MAP fedtransfer - central| %.3f (need <= 0.05)", gap));
  o.notes.push_back(std::string(budget ? "PASS" : "FAIL").insert(0, "7 budget ") + fmt(": %.1f min (limit 30)", minutes));
  std::istringstream text(cli::report_text(table));
  for (std::string line; std::getline(text, line);) o.notes.push_back(line);
  return o;
}

Outcome style_fidelity() {
  synth::DatasetConfig data_cfg = small_two_client(60, 8);
  for (auto& cl : data_cfg.clients) {
    cl.style.grain_jitter = 0.0;
    cl.style.noise_sigma = 0.0;
    cl.style.texture_amplitude = 0.0;
    cl.style.blur_radius = 0;
  }
  fed::FederatedConfig cfg;
  cfg.style.epochs = 12;
  cfg.seed = 8;
  const auto data = synth::make_client_datasets(data_cfg);
  auto clients = fed::make_clients(data, cfg);
  fed::Server server;
  const auto ex = fed::federated_image_style_transfer(clients, cfg, server);

  double worst = 0;
  std::vector<std::string> notes;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& target = data_cfg.clients[i].style;
    // Own style on held-out structures.
    Cell own_b, own_g;
    for (const auto& s : data[i].test) {
      const auto [mb, mg] = category_means(models::generate_synthetic(ex.models[i], s.labels), s.labels);
      own_b.add(mb), own_g.add(mg);
    }
    // Foreign style on the other client's local structures, as injected by the exchange.
    const auto& other = data_cfg.clients[1 - i].style;
    Cell cross_b, cross_g;
    for (const auto& s : clients[1 - i].data.train)
      if (s.origin == synth::synthetic_origin(data[i].client_id)) {
        const auto [mb, mg] = category_means(s.image, s.labels);
        cross_b.add(mb), cross_g.add(mg);
      }
    const double errs[] = {own_b.mean() - target.boundary_mean, own_g.mean() - target.grain_mean,
                           cross_b.mean() - target.boundary_mean, cross_g.mean() - target.grain_mean};
    for (double e : errs) worst = std::max(worst, std::abs(e));
    notes.push_back("G_" + data[i].client_id + fmt(": own boundary/grain %.3f/%.3f", own_b.mean(), own_g.mean()) +
                    fmt(" (target %.2f/%.2f)", target.boundary_mean, target.grain_mean) +
                    ", on " + data[1 - i].client_id +
                    fmt(" structures %.3f/%.3f", cross_b.mean(), cross_g.mean()) +
                    fmt(" (local style %.2f/%.2f)", other.boundary_mean, other.grain_mean) +
                    fmt(", final L1 %.3f", ex.models[i].final_l1));
  }
  Outcome o{worst <= 0.05, fmt("max |mean - target| %.3f (limit 0.05)", worst)};
  o.notes = notes;
  return o;
}

struct Criterion {
  int id;
  const char* title;
  double limit_s;  // 0: no runtime limit beyond the criterion's own
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  const Criterion criteria[] = {
      {1, "ARI contingency formula equals pair counting", 5, ari_oracle},
      {2, "VI metric properties", 5, vi_properties},
      {3, "AP hand cases and greedy optimality", 30, ap_cases},
      {4, "gradient correctness", 120, gradients},
      {5, "FedAvg one-round equivalence", 10, fedavg_equivalence},
      {6, "privacy transcript audit", 0, privacy_transcript},
      {7, "directional reproduction on the desk benchmark", 0, directional_reproduction},
      {8, "style model fidelity", 300, style_fidelity},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = seconds_since(t0);
    if (c.limit_s > 0 && s >= c.limit_s) {
      o.pass = false;
      o.detail += fmt("; runtime %.1f s over the %.0f s limit", s, c.limit_s);
    }
    failures += !o.pass;
    std::printf("%s criterion %d: %s -- %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), s);
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
