#include "fedgrain/models/style_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedgrain/autodiff/init.hpp"
#include "fedgrain/autodiff/optim.hpp"
#include "fedgrain/common/digest.hpp"
#include "fedgrain/common/error.hpp"
#include "fedgrain/common/rng.hpp"
#include "fedgrain/models/segmenter.hpp"

namespace fedgrain::models {

namespace {

constexpr std::uint64_t kGeneratorInit = 1;
constexpr std::uint64_t kDiscriminatorInit = 2;
constexpr std::uint64_t kShuffle = 3;

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("style_model.") + key + ": " + e.what());
  }
}

std::vector<const synth::Sample*> style_training_set(const synth::ClientDataset& client, const StyleModelConfig& cfg) {
  std::vector<const synth::Sample*> out;
  for (const auto& s : client.train) {
    if (!s.is_real()) continue;
    if (cfg.max_images > 0 && out.size() >= cfg.max_images) break;
    out.push_back(&s);
  }
  return out;
}

}  // namespace

void validate(const StyleModelConfig& c) {
  validate(c.generator_unet());
  if (c.discriminator_base == 0 || c.discriminator_base > 64) throw ConfigError("style_model: discriminator_base must be in 1..64");
  if (!(c.leaky_slope >= 0.0 && c.leaky_slope < 1.0)) throw ConfigError("style_model: leaky_slope must be in [0, 1)");
  if (c.batch_size == 0) throw ConfigError("style_model: batch_size must be >= 1");
  if (!(c.learning_rate > 0.0)) throw ConfigError("style_model: learning_rate must be > 0");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0))
    throw ConfigError("style_model: betas must be in [0, 1)");
  if (!(c.lambda_l1 >= 0.0)) throw ConfigError("style_model: lambda_l1 must be >= 0");
  if (!(c.l1_threshold > 0.0)) throw ConfigError("style_model: l1_threshold must be > 0");
}

nlohmann::ordered_json to_json(const StyleModelConfig& c) {
  return {{"generator_depth", c.generator_depth},
          {"generator_base", c.generator_base},
          {"kernel", c.kernel},
          {"discriminator_base", c.discriminator_base},
          {"leaky_slope", c.leaky_slope},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"lambda_l1", c.lambda_l1},
          {"l1_threshold", c.l1_threshold},
          {"max_images", c.max_images}};
}

StyleModelConfig style_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("style_model: expected a JSON object");
  const auto defaults = to_json(StyleModelConfig{});
  for (const auto& [key, value] : j.items())
    if (!defaults.contains(key)) throw ConfigError("style_model: unknown key '" + key + "'");
  StyleModelConfig c;
  read_key(j, "generator_depth", c.generator_depth);
  read_key(j, "generator_base", c.generator_base);
  read_key(j, "kernel", c.kernel);
  read_key(j, "discriminator_base", c.discriminator_base);
  read_key(j, "leaky_slope", c.leaky_slope);
  read_key(j, "epochs", c.epochs);
  read_key(j, "batch_size", c.batch_size);
  read_key(j, "learning_rate", c.learning_rate);
  read_key(j, "beta1", c.beta1);
  read_key(j, "beta2", c.beta2);
  read_key(j, "lambda_l1", c.lambda_l1);
  read_key(j, "l1_threshold", c.l1_threshold);
  read_key(j, "max_images", c.max_images);
  validate(c);
  return c;
}

ad::ParamSet build_generator(const StyleModelConfig& cfg, std::uint64_t seed) {
  return build_unet(cfg.generator_unet(), seed);
}

ad::ParamSet build_discriminator(const StyleModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t c = cfg.discriminator_base, k = cfg.kernel;
  ad::ParamSet p;
  p.add("d.conv1.w", ad::conv_weight(c, 3, k, rng));
  p.add("d.conv1.b", ad::Tensor(ad::Shape{c}, 0.0));
  p.add("d.conv2.w", ad::conv_weight(2 * c, c, k, rng));
  p.add("d.conv2.b", ad::Tensor(ad::Shape{2 * c}, 0.0));
  p.add("d.conv3.w", ad::conv_weight(1, 2 * c, k, rng));
  p.add("d.conv3.b", ad::Tensor(ad::Shape{1}, 0.0));
  return p;
}

ad::NodeId generator_forward(ad::Graph& g, const ad::Binding& gen, ad::NodeId one_hot, const StyleModelConfig& cfg) {
  return g.sigmoid(unet_forward(g, gen, one_hot, cfg.generator_unet()));
}

ad::NodeId discriminator_logits(ad::Graph& g, const ad::Binding& d, ad::NodeId one_hot, ad::NodeId image,
                                const StyleModelConfig& cfg) {
  const auto& shape = g.value(image).shape();
  if (shape.size() != 4 || shape[2] % 4 != 0 || shape[3] % 4 != 0)
    throw ShapeError("discriminator: image dims must be divisible by 4, got " + ad::shape_str(shape));
  ad::NodeId h = g.concat_channels(one_hot, image);
  h = g.mean_pool2x2(g.leaky_relu(g.conv2d(h, d.node("d.conv1.w"), d.node("d.conv1.b")), cfg.leaky_slope));
  h = g.mean_pool2x2(g.leaky_relu(g.conv2d(h, d.node("d.conv2.w"), d.node("d.conv2.b")), cfg.leaky_slope));
  return g.conv2d(h, d.node("d.conv3.w"), d.node("d.conv3.b"));
}

ad::NodeId discriminator_loss_node(ad::Graph& g, ad::NodeId real_logits, ad::NodeId fake_logits) {
  // -log sigmoid(l) = softplus(-l); -log(1 - sigmoid(l)) = softplus(l).
  return g.add(g.mean(g.softplus(g.scale(real_logits, -1.0))), g.mean(g.softplus(fake_logits)));
}

ad::NodeId generator_loss_node(ad::Graph& g, ad::NodeId fake_logits, ad::NodeId fake, ad::NodeId real,
                               double lambda_l1) {
  if (!(lambda_l1 >= 0.0)) throw std::invalid_argument("generator_loss: lambda_l1 must be >= 0");
  const ad::NodeId adversarial = g.mean(g.softplus(g.scale(fake_logits, -1.0)));
  return g.add(adversarial, g.scale(g.mean_abs_diff(fake, real), lambda_l1));
}

double discriminator_loss(const StyleModel& style, std::span<const LabelMap* const> labels,
                          std::span<const GrayImage* const> images) {
  ad::Graph g;
  const auto gen = g.bind(style.generator, false);
  const auto disc = g.bind(style.discriminator, false);
  const ad::NodeId x = g.constant(one_hot_batch(labels));
  const ad::NodeId y = g.constant(image_batch(images));
  const ad::NodeId fake = generator_forward(g, gen, x, style.config);
  const double v = g.value(discriminator_loss_node(g, discriminator_logits(g, disc, x, y, style.config),
                                                   discriminator_logits(g, disc, x, fake, style.config)))
                       .item();
  if (!std::isfinite(v)) throw DivergenceError("discriminator_loss: non-finite loss");
  return v;
}

double generator_loss(const StyleModel& style, std::span<const LabelMap* const> labels,
                      std::span<const GrayImage* const> images, double lambda_l1) {
  ad::Graph g;
  const auto gen = g.bind(style.generator, false);
  const auto disc = g.bind(style.discriminator, false);
  const ad::NodeId x = g.constant(one_hot_batch(labels));
  const ad::NodeId y = g.constant(image_batch(images));
  const ad::NodeId fake = generator_forward(g, gen, x, style.config);
  const double v =
      g.value(generator_loss_node(g, discriminator_logits(g, disc, x, fake, style.config), fake, y, lambda_l1)).item();
  if (!std::isfinite(v)) throw DivergenceError("generator_loss: non-finite loss");
  return v;
}

StyleModel train_style_model(const synth::ClientDataset& client, const StyleModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const auto samples = style_training_set(client, cfg);
  if (samples.empty()) throw ConfigError("train_style_model: client " + client.client_id + " has no real training samples");

  StyleModel m;
  m.owner = client.client_id;
  m.config = cfg;
  m.seed = seed;
  m.generator = build_generator(cfg, derive_seed(seed, {kGeneratorInit}));
  m.discriminator = build_discriminator(cfg, derive_seed(seed, {kDiscriminatorInit}));
  auto g_opt = ad::OptimizerState::adam(cfg.learning_rate, cfg.beta1, cfg.beta2);
  auto d_opt = ad::OptimizerState::adam(cfg.learning_rate, cfg.beta1, cfg.beta2);
  Rng rng(derive_seed(seed, {kShuffle}));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double l1_sum = 0, d_sum = 0, g_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<const LabelMap*> labels;
      std::vector<const GrayImage*> images;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
        labels.push_back(&samples[order[k]]->labels);
        images.push_back(&samples[order[k]]->image);
      }
      const ad::Tensor x_t = one_hot_batch(labels), y_t = image_batch(images);
      try {
        {
          ad::Graph g;
          const auto gen = g.bind(m.generator, false);
          const auto disc = g.bind(m.discriminator);
          const ad::NodeId x = g.constant(x_t), y = g.constant(y_t);
          const ad::NodeId fake = generator_forward(g, gen, x, cfg);
          const ad::NodeId loss = discriminator_loss_node(g, discriminator_logits(g, disc, x, y, cfg),
                                                          discriminator_logits(g, disc, x, fake, cfg));
          const ad::ParamSet grad = g.backward(loss, disc);
          d_sum += g.value(loss).item();
          m.discriminator = ad::optimizer_step(d_opt, m.discriminator, grad);
        }
        {
          ad::Graph g;
          const auto gen = g.bind(m.generator);
          const auto disc = g.bind(m.discriminator, false);
          const ad::NodeId x = g.constant(x_t), y = g.constant(y_t);
          const ad::NodeId fake = generator_forward(g, gen, x, cfg);
          const ad::NodeId l1 = g.mean_abs_diff(fake, y);
          const ad::NodeId adversarial = g.mean(g.softplus(g.scale(discriminator_logits(g, disc, x, fake, cfg), -1.0)));
          const ad::NodeId loss = g.add(adversarial, g.scale(l1, cfg.lambda_l1));
          const ad::ParamSet grad = g.backward(loss, gen);
          l1_sum += g.value(l1).item();
          g_sum += g.value(loss).item();
          m.generator = ad::optimizer_step(g_opt, m.generator, grad);
        }
      } catch (const DivergenceError& e) {
        throw DivergenceError("style model of client " + client.client_id + ", epoch " + std::to_string(epoch) +
                              ": " + e.what());
      }
      ++batches;
    }
    m.history.l1.push_back(l1_sum / static_cast<double>(batches));
    m.history.discriminator_loss.push_back(d_sum / static_cast<double>(batches));
    m.history.generator_loss.push_back(g_sum / static_cast<double>(batches));
  }

  double total = 0;
  for (const auto* s : samples) {
    const GrayImage out = generate_synthetic(m, s->labels);
    double acc = 0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += std::abs(out[i] - s->image[i]);
    total += acc / static_cast<double>(out.size());
  }
  m.final_l1 = total / static_cast<double>(samples.size());
  return m;
}

GrayImage generate_synthetic(const StyleModel& style, const LabelMap& labels) {
  ad::Graph g;
  const auto gen = g.bind(style.generator, false);
  const LabelMap* one[] = {&labels};
  const ad::Tensor& out = g.value(generator_forward(g, gen, g.constant(one_hot_batch(one)), style.config));
  GrayImage img(labels.height(), labels.width());
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::clamp(out[i], 0.0, 1.0);
  return img;
}

StyleModelPayload serialize_style_model(const StyleModel& s) {
  nlohmann::ordered_json side;
  side["format"] = "fedgrain-style-model";
  side["version"] = 1;
  side["owner"] = s.owner;
  side["seed"] = s.seed;
  side["config"] = to_json(s.config);
  side["final_l1"] = s.final_l1;
  side["history"] = {{"l1", s.history.l1},
                     {"discriminator_loss", s.history.discriminator_loss},
                     {"generator_loss", s.history.generator_loss}};
  return {ad::serialize_checkpoint(s.generator), ad::serialize_checkpoint(s.discriminator), side.dump(2) + "\n"};
}

StyleModel deserialize_style_model(const StyleModelPayload& p) {
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(p.sidecar);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("style model sidecar: ") + e.what(), e.byte);
  }
  if (side.value("format", "") != "fedgrain-style-model") throw FormatError("style model sidecar: wrong format tag", 0);
  StyleModel s;
  try {
    s.owner = side.at("owner").get<std::string>();
    s.seed = side.at("seed").get<std::uint64_t>();
    s.config = style_config_from_json(side.at("config"));
    s.final_l1 = side.at("final_l1").get<double>();
    const auto& h = side.at("history");
    s.history.l1 = h.at("l1").get<std::vector<double>>();
    s.history.discriminator_loss = h.at("discriminator_loss").get<std::vector<double>>();
    s.history.generator_loss = h.at("generator_loss").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("style model sidecar: ") + e.what(), 0);
  }
  s.generator = ad::deserialize_checkpoint(p.generator_checkpoint);
  s.discriminator = ad::deserialize_checkpoint(p.discriminator_checkpoint);
  ad::require_compatible(s.generator, build_generator(s.config, 0), "style model generator");
  ad::require_compatible(s.discriminator, build_discriminator(s.config, 0), "style model discriminator");
  return s;
}

void save_style_model(const std::filesystem::path& dir, const StyleModel& style) {
  const auto p = serialize_style_model(style);
  write_file(dir / "generator.fgps", p.generator_checkpoint);
  write_file(dir / "discriminator.fgps", p.discriminator_checkpoint);
  write_file(dir / "style.json", p.sidecar);
}

StyleModel load_style_model(const std::filesystem::path& dir) {
  return deserialize_style_model(
      {read_file(dir / "generator.fgps"), read_file(dir / "discriminator.fgps"), read_file(dir / "style.json")});
}

}  // namespace fedgrain::models
