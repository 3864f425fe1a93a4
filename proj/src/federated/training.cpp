#include "fedgrain/federated/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

#include "fedgrain/common/error.hpp"
#include "fedgrain/models/segmenter.hpp"
#include "fedgrain/synthdata/augment.hpp"

namespace fedgrain::fed {

namespace {

constexpr std::size_t kEvalChunk = 8;

// Sends params through the broker and returns what the recipient decodes.
ad::ParamSet relay(Server* server, std::size_t round, const std::string& from, const std::string& to,
                   const std::string& topic, const ad::ParamSet& params) {
  if (!server) return params;
  server->post_checkpoint(round, from, to, topic, params);
  auto inbox = server->receive(to);
  if (inbox.size() != 1 || inbox[0].topic != topic)
    throw std::logic_error("server: unexpected mailbox state for " + to + " (" + std::to_string(inbox.size()) + " messages)");
  return ad::deserialize_checkpoint(inbox[0].payload);
}

double report_metric(Server* server, std::size_t round, const std::string& from, const std::string& topic,
                     const char* key, double value) {
  if (!server) return value;
  server->post_metadata(round, from, kServerId, topic, {{key, value}});
  auto inbox = server->receive(kServerId);
  return nlohmann::json::parse(inbox.at(0).payload).at(key).get<double>();
}

std::string coordinates(const ClientState& c, std::size_t epoch, std::size_t batch) {
  return "client " + c.id + ", epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch);
}

TrainingResult run_rounds(std::vector<ClientState>& clients, const FederatedConfig& cfg, std::size_t rounds,
                          Server* server) {
  if (clients.empty()) throw ConfigError("federated_training: no clients");
  for (const auto& c : clients)
    if (c.n() == 0) throw ConfigError("federated_training: client " + c.id + " has an empty train split");
  for (const auto& c : clients)
    if (c.data.validation.empty()) throw ConfigError("federated_training: client " + c.id + " has no validation split");

  TrainingResult result;
  ad::ParamSet w = models::build_segmenter(cfg.segmenter, derive_seed(cfg.seed, {kInitStream}));
  std::vector<ad::ParamSet> local(clients.size());
  for (std::size_t i = 0; i < clients.size(); ++i) local[i] = relay(server, 0, kServerId, clients[i].id, "initial-model", w);
  ModelSelector selector;

  for (std::size_t t = 1; t <= rounds; ++t) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<ad::ParamSet> updates(clients.size());
    auto train_one = [&](std::size_t i) {
      try {
        updates[i] = client_local_training(clients[i], local[i], cfg);
      } catch (const DivergenceError& e) {
        throw DivergenceError("round " + std::to_string(t) + ", " + e.what());
      }
    };
    if (cfg.jobs > 1 && clients.size() > 1) {
      for (std::size_t first = 0; first < clients.size(); first += cfg.jobs) {
        std::vector<std::future<void>> running;
        for (std::size_t i = first; i < std::min(clients.size(), first + cfg.jobs); ++i)
          running.push_back(std::async(std::launch::async, train_one, i));
        for (auto& f : running) f.get();
      }
    } else {
      for (std::size_t i = 0; i < clients.size(); ++i) train_one(i);
    }

    std::vector<ad::ParamSet> received(clients.size());
    std::vector<WeightedUpdate> weighted;
    for (std::size_t i = 0; i < clients.size(); ++i) {
      received[i] = relay(server, t, clients[i].id, kServerId, "local-update", updates[i]);
      const double n = report_metric(server, t, clients[i].id, "update-info", "n", static_cast<double>(clients[i].n()));
      weighted.push_back({&received[i], static_cast<std::size_t>(n)});
    }
    w = fedavg_aggregate(weighted);

    RoundRecord rec;
    rec.round = t;
    for (std::size_t i = 0; i < clients.size(); ++i) {
      local[i] = relay(server, t, kServerId, clients[i].id, "aggregate", w);
      const double loss = validation_loss(local[i], cfg.segmenter, clients[i].data.validation);
      rec.client_losses.push_back(report_metric(server, t, clients[i].id, "validation", "loss", loss));
    }
    rec.mean_loss = std::accumulate(rec.client_losses.begin(), rec.client_losses.end(), 0.0) /
                    static_cast<double>(rec.client_losses.size());
    if (!std::isfinite(rec.mean_loss)) throw DivergenceError("round " + std::to_string(t) + ": non-finite validation loss");
    if (selector.offer(rec.mean_loss)) {
      rec.selected = true;
      result.best = w;
      result.best_round = t;
    }
    rec.min_loss = selector.min();
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(std::move(rec));
    if (cfg.keep_round_checkpoints) result.round_models.push_back(w);
  }
  return result;
}

}  // namespace

std::vector<ClientState> make_clients(std::vector<synth::ClientDataset> datasets, const FederatedConfig& cfg) {
  validate(cfg);
  std::vector<ClientState> out;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    ClientState c;
    c.id = datasets[i].client_id;
    c.index = i;
    c.data = std::move(datasets[i]);
    c.optimizer = make_optimizer(cfg);
    c.rng = Rng(derive_seed(cfg.seed, {kShuffleStream, i}));
    out.push_back(std::move(c));
  }
  return out;
}

nlohmann::ordered_json to_json(const RoundRecord& r) {
  return {{"round", r.round},       {"client_losses", r.client_losses}, {"mean_loss", r.mean_loss},
          {"min_loss", r.min_loss}, {"selected", r.selected},           {"seconds", r.seconds}};
}

ad::ParamSet fedavg_aggregate(std::span<const WeightedUpdate> updates) {
  if (updates.empty()) throw std::invalid_argument("fedavg_aggregate: no updates");
  std::size_t total = 0;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    if (!updates[i].params) throw std::invalid_argument("fedavg_aggregate: null update");
    if (updates[i].n == 0) throw std::invalid_argument("fedavg_aggregate: update " + std::to_string(i) + " has zero weight");
    ad::require_compatible(*updates[0].params, *updates[i].params, "fedavg_aggregate");
    total += updates[i].n;
  }
  std::vector<double> weight(updates.size());
  for (std::size_t i = 0; i < updates.size(); ++i)
    weight[i] = static_cast<double>(updates[i].n) / static_cast<double>(total);

  ad::ParamSet out = updates[0].params->zeros_like();
  std::vector<double> terms(updates.size());
  for (std::size_t e = 0; e < out.size(); ++e) {
    ad::Tensor& dst = out[e].value;
    for (std::size_t k = 0; k < dst.size(); ++k) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t i = 0; i < updates.size(); ++i) {
        const double v = (*updates[i].params)[e].value[k];
        terms[i] = weight[i] * v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      std::sort(terms.begin(), terms.end());
      double s = 0.0;
      for (double t : terms) s += t;
      dst[k] = std::clamp(s, lo, hi);
    }
  }
  return out;
}

ad::ParamSet client_local_training(ClientState& client, const ad::ParamSet& w, const FederatedConfig& cfg) {
  const auto& train = client.data.train;
  if (train.empty()) throw ConfigError("client_local_training: client " + client.id + " has an empty train split");
  ad::ParamSet params = w;
  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), client.rng);
    std::size_t batch = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<GrayImage> erased;
      erased.reserve(end - start);
      std::vector<const GrayImage*> images;
      std::vector<const LabelMap*> labels;
      for (std::size_t k = start; k < end; ++k) {
        const synth::Sample& s = train[order[k]];
        if (cfg.augment) {
          erased.push_back(synth::random_erasing(s.image, client.rng(), cfg.erasing));
          images.push_back(&erased.back());
        } else {
          images.push_back(&s.image);
        }
        labels.push_back(&s.labels);
      }
      try {
        auto [loss, grad] = models::segmentation_loss_and_grad(params, cfg.segmenter, models::image_batch(images),
                                                               models::label_vector(labels));
        if (!grad.all_finite()) throw DivergenceError("non-finite gradient");
        params = ad::optimizer_step(client.optimizer, params, grad);
        if (!params.all_finite()) throw DivergenceError("non-finite parameters after update");
        if (client.on_step) client.on_step({epoch, batch, {order.begin() + start, order.begin() + end}, loss, &params});
      } catch (const DivergenceError& e) {
        throw DivergenceError(coordinates(client, epoch, batch) + ": " + e.what());
      }
    }
  }
  client.params = params;
  return params;
}

double validation_loss(const ad::ParamSet& params, const models::SegmenterConfig& cfg,
                       std::span<const synth::Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("validation_loss: empty split");
  double total = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += kEvalChunk) {
    const std::size_t end = std::min(samples.size(), start + kEvalChunk);
    std::vector<const GrayImage*> images;
    std::vector<const LabelMap*> labels;
    for (std::size_t k = start; k < end; ++k) {
      images.push_back(&samples[k].image);
      labels.push_back(&samples[k].labels);
    }
    total += models::segmentation_loss(params, cfg, images, labels) * static_cast<double>(end - start);
  }
  return total / static_cast<double>(samples.size());
}

TrainingResult federated_training(std::vector<ClientState>& clients, const FederatedConfig& cfg, Server* server) {
  validate(cfg);
  Server local;
  return run_rounds(clients, cfg, cfg.rounds, server ? server : &local);
}

StyleExchange federated_image_style_transfer(std::vector<ClientState>& clients, const FederatedConfig& cfg,
                                             Server& server) {
  validate(cfg);
  StyleExchange out;
  out.synthetic_added.assign(clients.size(), 0);
  if (clients.size() < 2) return out;

  for (auto& c : clients) {
    models::StyleModel m = models::train_style_model(c.data, cfg.style, derive_seed(cfg.seed, {kStyleStream, c.index}));
    const auto payload = models::serialize_style_model(m);
    server.post_checkpoint_bytes(0, c.id, kServerId, "style-model/generator", payload.generator_checkpoint);
    server.post_checkpoint_bytes(0, c.id, kServerId, "style-model/discriminator", payload.discriminator_checkpoint);
    server.post_metadata(0, c.id, kServerId, "style-model/sidecar", nlohmann::ordered_json::parse(payload.sidecar));
    out.models.push_back(std::move(m));
  }

  // The server's collection G, keyed by owner in upload order.
  struct Collected {
    std::string owner, generator, discriminator, sidecar;
  };
  std::vector<Collected> collected;
  for (const Message& msg : server.receive(kServerId)) {
    if (collected.empty() || collected.back().owner != msg.sender) collected.push_back({msg.sender, {}, {}, {}});
    Collected& g = collected.back();
    if (msg.topic == "style-model/generator") g.generator = msg.payload;
    if (msg.topic == "style-model/discriminator") g.discriminator = msg.payload;
    if (msg.topic == "style-model/sidecar") g.sidecar = msg.payload;
  }

  for (auto& c : clients) {
    for (const Collected& g : collected) {
      if (g.owner == c.id) continue;
      server.post_checkpoint_bytes(0, kServerId, c.id, "style-model/generator", g.generator);
      server.post_checkpoint_bytes(0, kServerId, c.id, "style-model/discriminator", g.discriminator);
      server.post_metadata(0, kServerId, c.id, "style-model/sidecar", nlohmann::ordered_json::parse(g.sidecar));
    }
    // Client side: rebuild each foreign model from the relayed bytes only.
    const auto inbox = server.receive(c.id);
    std::vector<models::StyleModel> foreign;
    if (inbox.size() % 3 != 0) throw std::logic_error("style exchange: incomplete style model delivery to " + c.id);
    for (std::size_t k = 0; k < inbox.size(); k += 3) {
      foreign.push_back(models::deserialize_style_model({inbox[k].payload, inbox[k + 1].payload, inbox[k + 2].payload}));
    }
    const std::size_t real = c.data.train.size();
    for (const auto& g : foreign) {
      for (std::size_t k = 0; k < real; ++k) {
        const synth::Sample& src = c.data.train[k];
        if (!src.is_real()) continue;
        synth::Sample s;
        s.id = src.id + "~" + g.owner;
        s.labels = src.labels;
        s.instances = src.instances;
        s.image = models::generate_synthetic(g, src.labels);
        s.origin = synth::synthetic_origin(g.owner);
        s.structure_seed = src.structure_seed;
        c.data.train.push_back(std::move(s));
        ++out.synthetic_added[c.index];
      }
    }
  }
  return out;
}

FedTransferResult fed_transfer(std::vector<ClientState>& clients, const FederatedConfig& cfg, Server& server) {
  FedTransferResult r;
  if (cfg.style_transfer) r.exchange = federated_image_style_transfer(clients, cfg, server);
  r.training = federated_training(clients, cfg, &server);
  return r;
}

std::vector<TrainingResult> separate_training(std::vector<ClientState>& clients, const FederatedConfig& cfg) {
  validate(cfg);
  std::vector<TrainingResult> out;
  for (auto& c : clients) {
    std::vector<ClientState> alone;
    alone.push_back(std::move(c));
    out.push_back(run_rounds(alone, cfg, cfg.separate_rounds, nullptr));
    c = std::move(alone[0]);
  }
  return out;
}

ClientState pool_clients(const std::vector<ClientState>& clients, const FederatedConfig& cfg) {
  ClientState pooled;
  pooled.id = "pooled";
  pooled.index = 0;
  pooled.data.client_id = "pooled";
  for (const auto& c : clients) {
    pooled.data.train.insert(pooled.data.train.end(), c.data.train.begin(), c.data.train.end());
    pooled.data.validation.insert(pooled.data.validation.end(), c.data.validation.begin(), c.data.validation.end());
    pooled.data.test.insert(pooled.data.test.end(), c.data.test.begin(), c.data.test.end());
  }
  pooled.optimizer = make_optimizer(cfg);
  pooled.rng = Rng(derive_seed(cfg.seed, {kShuffleStream, 0}));
  return pooled;
}

TrainingResult centralized_training(const std::vector<ClientState>& clients, const FederatedConfig& cfg) {
  validate(cfg);
  std::vector<ClientState> one;
  one.push_back(pool_clients(clients, cfg));
  return run_rounds(one, cfg, cfg.rounds, nullptr);
}

}  // namespace fedgrain::fed
