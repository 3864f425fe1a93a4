#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fedgrain/autodiff/optim.hpp"
#include "fedgrain/autodiff/param_set.hpp"
#include "fedgrain/common/rng.hpp"
#include "fedgrain/federated/config.hpp"
#include "fedgrain/federated/server.hpp"
#include "fedgrain/models/style_model.hpp"
#include "fedgrain/synthdata/dataset.hpp"

namespace fedgrain::fed {

// Seed streams, all derived from FederatedConfig::seed:
//   initial segmenter     derive_seed(seed, {kInitStream})
//   client i batching     Rng(derive_seed(seed, {kShuffleStream, i})); per epoch one
//                         std::shuffle of the train indices, then (with augmentation)
//                         one draw per batch sample seeding random_erasing
//   client i style model  derive_seed(seed, {kStyleStream, i})
inline constexpr std::uint64_t kInitStream = 10;
inline constexpr std::uint64_t kShuffleStream = 11;
inline constexpr std::uint64_t kStyleStream = 12;

struct StepTrace {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::vector<std::size_t> indices;  // train-split positions in this batch
  double loss = 0.0;
  const ad::ParamSet* params = nullptr;  // after the update
};

struct ClientState {
  std::string id;
  std::size_t index = 0;  // selects the client's seed streams
  synth::ClientDataset data;
  ad::ParamSet params;  // latest local model
  ad::OptimizerState optimizer;
  Rng rng;
  std::function<void(const StepTrace&)> on_step;

  // n_i: training samples, synthetic ones included.
  std::size_t n() const { return data.train.size(); }
};

std::vector<ClientState> make_clients(std::vector<synth::ClientDataset> datasets, const FederatedConfig& cfg);

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  std::vector<double> client_losses;
  double mean_loss = 0.0;
  double min_loss = 0.0;  // running minimum after this round
  bool selected = false;
  double seconds = 0.0;
};

nlohmann::ordered_json to_json(const RoundRecord& r);

// Keeps the first strict minimum of the mean validation loss.
class ModelSelector {
 public:
  // True when loss strictly improves on everything offered so far.
  bool offer(double loss) {
    if (!(loss < min_)) return false;
    min_ = loss;
    return true;
  }
  double min() const { return min_; }

 private:
  double min_ = std::numeric_limits<double>::infinity();
};

struct TrainingResult {
  ad::ParamSet best;  // w*
  std::size_t best_round = 0;
  std::vector<RoundRecord> history;
  std::vector<ad::ParamSet> round_models;  // aggregated w^t per round, when kept
};

struct WeightedUpdate {
  const ad::ParamSet* params = nullptr;
  std::size_t n = 0;
};

// sum_i (n_i / sum_j n_j) w_i. Per coordinate the weighted terms are summed
// in ascending order, so the result does not depend on the update order, and
// it is clamped to the clients' [min, max].
ad::ParamSet fedavg_aggregate(std::span<const WeightedUpdate> updates);

// E epochs of minibatch updates from w on the client's train split. Updates
// client.params and client.optimizer; returns the new parameters.
ad::ParamSet client_local_training(ClientState& client, const ad::ParamSet& w, const FederatedConfig& cfg);

// Mean per-pixel cross-entropy over a split.
double validation_loss(const ad::ParamSet& params, const models::SegmenterConfig& cfg,
                       std::span<const synth::Sample> samples);

// K rounds of broadcast -> local training -> aggregation -> validation of the
// aggregate. Model selection keeps the first strict minimum of mean loss.
TrainingResult federated_training(std::vector<ClientState>& clients, const FederatedConfig& cfg,
                                  Server* server = nullptr);

struct StyleExchange {
  std::vector<models::StyleModel> models;  // G_i, by client
  std::vector<std::size_t> synthetic_added;
};

// Each client trains G_i locally and uploads it; the server relays every G_j
// (j != i) to client i, which renders its own label maps in each foreign
// style and appends the results to its train split.
StyleExchange federated_image_style_transfer(std::vector<ClientState>& clients, const FederatedConfig& cfg,
                                             Server& server);

struct FedTransferResult {
  StyleExchange exchange;
  TrainingResult training;
};

FedTransferResult fed_transfer(std::vector<ClientState>& clients, const FederatedConfig& cfg, Server& server);

// Each client alone for cfg.separate_rounds rounds.
std::vector<TrainingResult> separate_training(std::vector<ClientState>& clients, const FederatedConfig& cfg);

// All train and validation splits pooled into one client (index 0).
ClientState pool_clients(const std::vector<ClientState>& clients, const FederatedConfig& cfg);
TrainingResult centralized_training(const std::vector<ClientState>& clients, const FederatedConfig& cfg);

}  // namespace fedgrain::fed
