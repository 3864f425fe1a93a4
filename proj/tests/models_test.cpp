#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fedgrain/autodiff/gradcheck.hpp"
#include "fedgrain/common/error.hpp"
#include "fedgrain/common/rng.hpp"
#include "fedgrain/metrics/components.hpp"
#include "fedgrain/models/segmenter.hpp"
#include "fedgrain/models/style_model.hpp"
#include "fedgrain/synthdata/dataset.hpp"
#include "fixtures.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fedgrain;
using namespace fedgrain::helpers;
using namespace fedgrain::models;

namespace {

const double kLn2 = std::numbers::ln2;

synth::DatasetConfig flat_style_config(std::size_t samples) {
  synth::DatasetConfig c;
  c.height = 32;
  c.width = 32;
  c.min_grains = 10;
  c.max_grains = 16;
  c.seed = 21;
  c.clients = {{"A", {.boundary_mean = 0.25, .grain_mean = 0.70}, samples},
               {"B", {.boundary_mean = 0.80, .grain_mean = 0.35}, samples}};
  return c;
}

}  // namespace

TEST_CASE("segmenter parameter count") {
  // depth 2, base 8, 3x3, 1 input, 2 classes; each conv is out*in*9 + out:
  //   enc0 1->8, 8->8            80 + 584     =   664
  //   enc1 8->16, 16->16       1168 + 2320    =  3488
  //   mid 16->32, 32->32       4640 + 9248    = 13888
  //   dec1 (32+16)->16, 16->16 6928 + 2320    =  9248
  //   dec0 (16+8)->8, 8->8     1736 + 584     =  2320
  //   head 1x1 8->2                              18
  const SegmenterConfig cfg{2, 8, 3};
  CHECK(segmenter_param_count(cfg) == 29626);
  CHECK(build_segmenter(cfg, 1).total_count() == 29626);
  for (std::size_t d = 1; d <= 3; ++d)
    for (std::size_t b : {2, 4, 6})
      for (std::size_t k : {1, 3, 5}) {
        const SegmenterConfig c{d, b, k};
        CHECK(build_segmenter(c, 2).total_count() == segmenter_param_count(c));
      }
}

TEST_CASE("segmenter forward contract") {
  const SegmenterConfig cfg{2, 4, 3};
  const auto params = build_segmenter(cfg, 3);
  Rng rng(4);
  const auto img = random_image(64, 64, rng);
  const auto probs = segmenter_probabilities(params, cfg, img);
  CHECK(probs.shape() == ad::Shape{1, 2, 64, 64});
  for (std::size_t i = 0; i < 64 * 64; ++i) {
    CHECK(probs[i] > 0.0);
    CHECK(probs[i] + probs[4096 + i] == doctest::Approx(1.0).epsilon(1e-14));
  }
  const auto bad = random_image(62, 64, rng);
  CHECK_THROWS_AS(segmenter_probabilities(params, cfg, bad), ShapeError);
  CHECK(build_segmenter(cfg, 3) == params);
}

TEST_CASE("segmentation loss values") {
  const SegmenterConfig cfg{2, 4, 3};
  Rng rng(5);
  const auto img = random_image(16, 16, rng);
  const auto lab = random_labels(16, 16, rng);
  const GrayImage* ims[] = {&img};
  const LabelMap* labs[] = {&lab};

  SUBCASE("uniform prediction costs ln 2 per pixel") {
    auto p = build_segmenter(cfg, 1);
    p.at("head.w").fill(0.0);
    p.at("head.b").fill(0.0);
    CHECK(segmentation_loss(p, cfg, ims, labs) == doctest::Approx(kLn2).epsilon(1e-15));
  }
  SUBCASE("confident correct prediction drives the loss to zero") {
    GrayImage clean(16, 16);
    for (std::size_t i = 0; i < clean.size(); ++i) clean[i] = lab[i] ? 0.8 : 0.2;
    const GrayImage* cims[] = {&clean};
    const double l10 = segmentation_loss(fixture::perfect_segmenter(cfg, 10), cfg, cims, labs);
    const double l100 = segmentation_loss(fixture::perfect_segmenter(cfg, 100), cfg, cims, labs);
    CHECK(l100 < l10);
    CHECK(l100 < 1e-20);
    CHECK(l100 >= 0.0);
  }
  SUBCASE("two-pixel hand case") {
    // logits (0, ln 9) -> p(grain) = 0.9 with label grain; (ln 9, 0) -> p(grain) = 0.1 with label boundary.
    ad::Graph g;
    const auto logits = g.constant(ad::Tensor(ad::Shape{1, 2, 1, 2}, {0.0, std::log(9.0), std::log(9.0), 0.0}));
    const std::uint8_t labels[] = {1, 0};
    const double expected = -(std::log(0.9) + std::log(0.9)) / 2.0;
    CHECK(g.value(g.softmax_cross_entropy(logits, labels)).item() == doctest::Approx(expected).epsilon(1e-14));
  }
  CHECK_THROWS_AS(segmentation_loss(build_segmenter(cfg, 1), cfg, ims, std::span<const LabelMap* const>{}),
                  ShapeError);
}

TEST_CASE("segmenter gradients pass finite differences on 8x8") {
  const SegmenterConfig cfg{2, 2, 3};
  Rng rng(6);
  std::vector<GrayImage> imgs;
  std::vector<LabelMap> labs;
  for (int i = 0; i < 2; ++i) {
    imgs.push_back(random_image(8, 8, rng));
    labs.push_back(random_labels(8, 8, rng));
  }
  const GrayImage* ims[] = {&imgs[0], &imgs[1]};
  const LabelMap* lps[] = {&labs[0], &labs[1]};
  const auto x = image_batch(ims);
  const auto y = label_vector(lps);
  const auto params = with_random_biases(build_segmenter(cfg, 7), rng);
  const auto report = ad::finite_diff_check(
      [&](ad::Graph& g, const ad::Binding& b) { return segmentation_loss_node(g, b, cfg, x, y); }, params, 1e-4);
  INFO(report.summary());
  CHECK(report.passed);
}

TEST_CASE("cGAN loss hand values") {
  StyleModelConfig cfg;
  Rng rng(8);
  const auto lab = random_labels(8, 8, rng);
  const LabelMap* labs[] = {&lab};

  SUBCASE("discriminator at 0.5 everywhere") {
    const auto m = fixture::constant_style_model(cfg, 0.6);
    const auto img = random_image(8, 8, rng);
    const GrayImage* ims[] = {&img};
    CHECK(discriminator_loss(m, labs, ims) == doctest::Approx(2 * kLn2).epsilon(1e-14));
  }
  SUBCASE("perfect discriminator limit") {
    ad::Graph g;
    const auto real = g.constant(ad::Tensor(ad::Shape{1, 1, 2, 2}, 40.0));
    const auto fake = g.constant(ad::Tensor(ad::Shape{1, 1, 2, 2}, -40.0));
    const double v = g.value(discriminator_loss_node(g, real, fake)).item();
    CHECK(v >= 0.0);
    CHECK(v < 1e-16);
  }
  SUBCASE("2x2 patch grid against scalar evaluation") {
    const std::vector<double> r{0.5, -1.0, 2.0, 0.0}, f{1.0, -2.0, 0.3, 0.0};
    ad::Graph g;
    const auto real = g.constant(ad::Tensor(ad::Shape{1, 1, 2, 2}, r));
    const auto fake = g.constant(ad::Tensor(ad::Shape{1, 1, 2, 2}, f));
    double expected = 0;
    for (int i = 0; i < 4; ++i) {
      const double dr = 1 / (1 + std::exp(-r[i])), df = 1 / (1 + std::exp(-f[i]));
      expected += -(std::log(dr) + std::log(1 - df)) / 4;
    }
    CHECK(g.value(discriminator_loss_node(g, real, fake)).item() == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("generator: y = 0.8, G(x) = 0.6, D = 0.5") {
    const auto m = fixture::constant_style_model(cfg, 0.6);
    const GrayImage y(8, 8, 0.8);
    const GrayImage* ims[] = {&y};
    CHECK(generator_loss(m, labs, ims, 100.0) == doctest::Approx(100 * 0.2 + kLn2).epsilon(1e-12));
    CHECK(generator_loss(m, labs, ims, 0.0) == doctest::Approx(kLn2).epsilon(1e-14));
    const GrayImage exact(8, 8, 0.6);
    const GrayImage* eims[] = {&exact};
    CHECK(generator_loss(m, labs, eims, 100.0) == doctest::Approx(kLn2).epsilon(1e-9));
  }
  SUBCASE("L1 term decreases strictly as G(x) approaches y") {
    const GrayImage y(8, 8, 0.8);
    const GrayImage* ims[] = {&y};
    double prev = INFINITY;
    for (double v : {0.3, 0.5, 0.7, 0.79}) {
      const auto m = fixture::constant_style_model(cfg, v);
      const double loss = generator_loss(m, labs, ims, 10.0);
      CHECK(loss < prev);
      prev = loss;
    }
  }
}

TEST_CASE("cGAN loss gradients pass finite differences on 8x8") {
  StyleModelConfig cfg;
  cfg.generator_base = 2;
  cfg.discriminator_base = 3;
  Rng rng(9);
  const auto lab = random_labels(8, 8, rng);
  const auto img = random_image(8, 8, rng);
  const LabelMap* labs[] = {&lab};
  const GrayImage* ims[] = {&img};
  const auto x_t = one_hot_batch(labs);
  const auto y_t = image_batch(ims);
  const auto gen = with_random_biases(build_generator(cfg, 10), rng);
  const auto disc = with_random_biases(build_discriminator(cfg, 11), rng);

  SUBCASE("discriminator loss w.r.t. D") {
    const auto report = ad::finite_diff_check(
        [&](ad::Graph& g, const ad::Binding& d) {
          const auto gb = g.bind(gen, false);
          const auto x = g.constant(x_t), y = g.constant(y_t);
          const auto fake = generator_forward(g, gb, x, cfg);
          return discriminator_loss_node(g, discriminator_logits(g, d, x, y, cfg),
                                         discriminator_logits(g, d, x, fake, cfg));
        },
        disc, 1e-4);
    INFO(report.summary());
    CHECK(report.passed);
  }
  SUBCASE("generator loss w.r.t. G") {
    const auto report = ad::finite_diff_check(
        [&](ad::Graph& g, const ad::Binding& gb) {
          const auto d = g.bind(disc, false);
          const auto x = g.constant(x_t), y = g.constant(y_t);
          const auto fake = generator_forward(g, gb, x, cfg);
          return generator_loss_node(g, discriminator_logits(g, d, x, fake, cfg), fake, y, 100.0);
        },
        gen, 1e-4);
    INFO(report.summary());
    CHECK(report.passed);
  }
}

TEST_CASE("predict_instances") {
  SUBCASE("6x6 map with two blobs split by a 1-px boundary column") {
    ad::Tensor probs(ad::Shape{1, 2, 6, 6});
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 6; ++x) {
        const double grain = x == 2 ? 0.2 : 0.85;
        probs[y * 6 + x] = 1 - grain;
        probs[36 + y * 6 + x] = grain;
      }
    const auto p = prediction_from_scores(probs);
    CHECK(metrics::count_instances(p.instances) == 2);
    CHECK(p.instances == oracle::flood_fill_components(p.labels));
  }
  SUBCASE("all-boundary prediction") {
    ad::Tensor probs(ad::Shape{1, 2, 6, 6});
    for (std::size_t i = 0; i < 36; ++i) probs[i] = 0.7, probs[36 + i] = 0.3;
    CHECK(metrics::count_instances(prediction_from_scores(probs).instances) == 0);
  }
  SUBCASE("probabilities matching a k-grain ground truth") {
    synth::DatasetConfig c = flat_style_config(12);
    const auto clients = synth::make_client_datasets(c);
    const SegmenterConfig cfg{2, 4, 3};
    const auto perfect = fixture::perfect_segmenter(cfg);
    for (const auto& s : clients[0].test) {
      const auto p = predict_instances(perfect, cfg, s.image);
      CHECK(p.labels == s.labels);
      CHECK(metrics::count_instances(p.instances) == metrics::count_instances(s.instances));
    }
  }
}

TEST_CASE("style model training and transfer") {
  const auto clients = synth::make_client_datasets(flat_style_config(40));
  StyleModelConfig cfg;
  cfg.epochs = 12;
  const auto a = train_style_model(clients[0], cfg, 31);
  const auto b = train_style_model(clients[1], cfg, 32);

  SUBCASE("loss curve and fidelity to the generating style") {
    REQUIRE(a.history.l1.size() == 12);
    CHECK(a.history.l1.back() < a.history.l1.front());
    CHECK(a.shareable());
    for (const auto& s : clients[0].test) {
      const auto [mb, mg] = category_means(generate_synthetic(a, s.labels), s.labels);
      CHECK(std::abs(mb - 0.25) < 0.05);
      CHECK(std::abs(mg - 0.70) < 0.05);
    }
  }
  SUBCASE("foreign style on local structure") {
    for (const auto& s : clients[0].test) {
      const auto img = generate_synthetic(b, s.labels);
      const auto [mb, mg] = category_means(img, s.labels);
      CHECK(std::abs(mg - 0.35) < 0.05);
      CHECK(std::abs(mb - 0.80) < 0.05);
      for (double v : img.pixels()) CHECK((v >= 0.0 && v <= 1.0));
      CHECK(img == generate_synthetic(b, s.labels));
    }
  }
  SUBCASE("determinism and serialization") {
    auto small = cfg;
    small.epochs = 1;
    small.max_images = 6;
    const auto m1 = train_style_model(clients[1], small, 5);
    const auto m2 = train_style_model(clients[1], small, 5);
    CHECK(m1.generator == m2.generator);
    CHECK(m1.discriminator == m2.discriminator);
    const auto back = deserialize_style_model(serialize_style_model(m1));
    CHECK(back.generator == m1.generator);
    CHECK(back.discriminator == m1.discriminator);
    CHECK(back.config == m1.config);
    CHECK(back.owner == "B");
    CHECK(back.history.l1 == m1.history.l1);
    auto p = serialize_style_model(m1);
    p.sidecar = "{\"format\": \"fedgrain-style-model\", \"owner\": 3}";
    CHECK_THROWS_AS(deserialize_style_model(p), FormatError);
  }
  CHECK_THROWS_AS(generate_synthetic(a, LabelMap(30, 32)), ShapeError);
}
