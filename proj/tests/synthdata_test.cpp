#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "fedgrain/common/digest.hpp"
#include "fedgrain/common/error.hpp"
#include "fedgrain/metrics/components.hpp"
#include "fedgrain/synthdata/augment.hpp"
#include "fedgrain/synthdata/dataset.hpp"
#include "fedgrain/synthdata/pgm.hpp"
#include "fedgrain/synthdata/style.hpp"
#include "fedgrain/synthdata/voronoi.hpp"
#include "oracles.hpp"

using namespace fedgrain;
using namespace fedgrain::synth;

namespace {

// Brute-force nearest site per pixel, ties to the lowest index.
Grid<std::uint32_t> nearest_site_oracle(std::size_t h, std::size_t w, const std::vector<Site>& sites) {
  Grid<std::uint32_t> out(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double best = INFINITY;
      for (std::uint32_t k = 0; k < sites.size(); ++k) {
        const double dy = sites[k].y - static_cast<double>(y), dx = sites[k].x - static_cast<double>(x);
        const double d = dy * dy + dx * dx;
        if (d < best) {
          best = d;
          out.at(y, x) = k;
        }
      }
    }
  return out;
}

bool is_boundary_oracle(const Grid<std::uint32_t>& cell, std::size_t y, std::size_t x) {
  const std::uint32_t c = cell.at(y, x);
  return (y > 0 && cell.at(y - 1, x) != c) || (y + 1 < cell.height() && cell.at(y + 1, x) != c) ||
         (x > 0 && cell.at(y, x - 1) != c) || (x + 1 < cell.width() && cell.at(y, x + 1) != c);
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fedgrain_synth_" + name);
  std::filesystem::remove_all(p);
  return p;
}

DatasetConfig two_client_config(std::size_t samples) {
  DatasetConfig c;
  c.height = 32;
  c.width = 32;
  c.min_grains = 8;
  c.max_grains = 14;
  c.seed = 11;
  StyleSpec a{.boundary_mean = 0.2, .grain_mean = 0.75, .grain_jitter = 0.05, .noise_sigma = 0.02};
  StyleSpec b{.boundary_mean = 0.8, .grain_mean = 0.35, .grain_jitter = 0.05, .noise_sigma = 0.08,
              .blur_radius = 1, .texture_amplitude = 0.1, .texture_frequency = 0.15};
  c.clients = {{"A", a, samples}, {"B", b, samples}};
  return c;
}

}  // namespace

TEST_CASE("voronoi matches a brute-force nearest-site scan") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const std::size_t h = 16 + 8 * (seed % 3), w = 64 - 8 * (seed % 4);
    const auto t = voronoi_labels(seed, h, w, 5 + 7 * seed);
    const auto cell = nearest_site_oracle(h, w, t.sites);
    REQUIRE(t.cell == cell);
    // Each instance sits inside one cell, and every cell's interior is covered by its instances.
    std::map<std::uint32_t, std::uint32_t> instance_cell;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const bool boundary = is_boundary_oracle(cell, y, x);
        CHECK((t.labels.at(y, x) == kBoundary) == boundary);
        CHECK((t.instances.at(y, x) == 0) == boundary);
        if (!boundary) {
          auto [it, fresh] = instance_cell.emplace(t.instances.at(y, x), cell.at(y, x));
          CHECK(it->second == cell.at(y, x));
        }
      }
    CHECK(t.instances == oracle::flood_fill_components(t.labels));
  }
}

TEST_CASE("voronoi strip with two sites puts the boundary at the bisector") {
  const std::vector<Site> sites{{0.0, 5.0}, {0.0, 20.0}};
  const auto t = voronoi_from_sites(8, 32, sites);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 32; ++x) {
      CHECK(t.cell.at(y, x) == (x <= 12 ? 0u : 1u));
      CHECK((t.labels.at(y, x) == kBoundary) == (x == 12 || x == 13));
    }
  CHECK(metrics::count_instances(t.instances) == 2);

  // Equidistant column goes to the lower index.
  const std::vector<Site> tie{{0.0, 4.0}, {0.0, 10.0}};
  const auto u = voronoi_from_sites(8, 16, tie);
  CHECK(u.cell.at(3, 7) == 0u);
  CHECK(u.cell.at(3, 8) == 1u);
}

TEST_CASE("voronoi trivial cases and errors") {
  const auto one = voronoi_labels(3, 20, 24, 1);
  CHECK(std::all_of(one.labels.pixels().begin(), one.labels.pixels().end(), [](auto v) { return v == kGrain; }));
  CHECK(metrics::count_instances(one.instances) == 1);
  CHECK(voronoi_labels(9, 32, 32, 40).instances == voronoi_labels(9, 32, 32, 40).instances);
  CHECK_FALSE(voronoi_labels(9, 32, 32, 40).instances == voronoi_labels(10, 32, 32, 40).instances);
  CHECK_THROWS_AS(voronoi_labels(1, 8, 8, 65), std::invalid_argument);
  CHECK_THROWS_AS(voronoi_labels(1, 8, 8, 0), std::invalid_argument);
  CHECK_THROWS_AS(voronoi_labels(1, 7, 8, 2), std::invalid_argument);
}

TEST_CASE("render_style") {
  const auto t = voronoi_labels(5, 32, 32, 12);
  SUBCASE("degenerate style gives exactly two values") {
    StyleSpec s{.boundary_mean = 0.3, .grain_mean = 0.6};
    const auto img = render_style(t.instances, s, 1);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(img[i] == (t.instances[i] == 0 ? 0.3 : 0.6));
    CHECK(img == render_style(t.instances, s, 999));
  }
  SUBCASE("outputs are clamped and deterministic") {
    StyleSpec s{.boundary_mean = 0.95, .grain_mean = 0.05, .grain_jitter = 0.3, .noise_sigma = 0.4,
                .blur_radius = 2, .texture_amplitude = 0.3, .texture_frequency = 0.2};
    const auto img = render_style(t.instances, s, 4);
    for (double v : img.pixels()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(img == render_style(t.instances, s, 4));
    CHECK_FALSE(img == render_style(t.instances, s, 5));
  }
  SUBCASE("noise mean bound on a single grain") {
    const auto single = voronoi_labels(2, 64, 64, 1);
    StyleSpec s{.boundary_mean = 0.2, .grain_mean = 0.55, .noise_sigma = 0.05};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto img = render_style(single.instances, s, seed);
      double sum = 0;
      for (double v : img.pixels()) sum += v;
      CHECK(std::abs(sum / static_cast<double>(img.size()) - 0.55) < 0.01);
    }
  }
  SUBCASE("default-like styles rarely clamp") {
    StyleSpec s{.boundary_mean = 0.25, .grain_mean = 0.7, .grain_jitter = 0.05, .noise_sigma = 0.04,
                .blur_radius = 1, .texture_amplitude = 0.05, .texture_frequency = 0.1};
    const auto img = render_style(t.instances, s, 8);
    const auto clamped = std::count_if(img.pixels().begin(), img.pixels().end(), [](double v) { return v == 0.0 || v == 1.0; });
    CHECK(static_cast<double>(clamped) < 0.01 * static_cast<double>(img.size()));
  }
  CHECK_THROWS_AS(render_style(t.instances, StyleSpec{.grain_mean = 1.2}, 1), std::invalid_argument);
}

TEST_CASE("random_erasing") {
  GrayImage img(40, 50, 0.5);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i % 7) / 7.0;
  ErasingConfig cfg{.probability = 0.0};
  CHECK(random_erasing(img, 3, cfg) == img);

  cfg = {.probability = 1.0, .min_area = 0.05, .max_area = 0.25, .min_aspect = 0.4, .fill = EraseFill::kConstant,
         .constant = 2.0 / 3.0 + 0.01};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    ErasedRegion r;
    const auto out = random_erasing(img, seed, cfg, &r);
    REQUIRE(r.applied);
    const double frac = static_cast<double>(r.height * r.width) / static_cast<double>(img.size());
    CHECK((frac >= 0.05 && frac <= 0.25));
    // Measured directly: count the pixels that now carry the fill value.
    std::size_t changed = 0;
    for (std::size_t i = 0; i < img.size(); ++i) changed += out[i] != img[i];
    CHECK(changed == r.height * r.width);
    CHECK(out == random_erasing(img, seed, cfg));
  }
  cfg.fill = EraseFill::kNoise;
  const auto noisy = random_erasing(img, 1, cfg);
  for (double v : noisy.pixels()) CHECK((v >= 0.0 && v <= 1.0));
  CHECK_THROWS_AS(random_erasing(img, 1, ErasingConfig{.probability = 1.5}), std::invalid_argument);
  CHECK_THROWS_AS(random_erasing(img, 1, ErasingConfig{.min_area = 0.1, .max_area = 0.6}), std::invalid_argument);
}

TEST_CASE("largest-remainder split counts") {
  const std::array<std::size_t, 3> ratio{560, 140, 192};
  CHECK(split_counts(892, ratio) == std::array<std::size_t, 3>{560, 140, 192});
  CHECK(split_counts(89, ratio) == std::array<std::size_t, 3>{56, 14, 19});
  CHECK(split_counts(99, ratio) == std::array<std::size_t, 3>{62, 16, 21});
  CHECK(split_counts(100, ratio) == std::array<std::size_t, 3>{63, 16, 21});
  CHECK(split_counts(200, ratio) == std::array<std::size_t, 3>{126, 31, 43});
  for (std::size_t n = 5; n < 400; ++n) {
    const auto c = split_counts(n, ratio);
    CHECK(c[0] + c[1] + c[2] == n);
    for (int s = 0; s < 3; ++s) {
      const double exact = static_cast<double>(n) * static_cast<double>(ratio[s]) / 892.0;
      CHECK(std::abs(static_cast<double>(c[s]) - exact) < 1.0);
    }
  }
  CHECK_THROWS_AS(split_counts(3, ratio), ConfigError);
  const std::vector<std::size_t> even{1, 1, 1};
  CHECK(largest_remainder(4, even) == std::vector<std::size_t>{2, 1, 1});
}

TEST_CASE("client datasets") {
  const auto cfg = two_client_config(30);
  const auto clients = make_client_datasets(cfg);
  REQUIRE(clients.size() == 2);
  std::set<std::string> ids;
  for (const auto& c : clients) {
    CHECK(c.train.size() == 19);
    CHECK(c.validation.size() == 5);
    CHECK(c.test.size() == 6);
    for (const auto* split : {&c.train, &c.validation, &c.test})
      for (const auto& s : *split) {
        CHECK(ids.insert(s.id).second);
        CHECK(s.origin == kOriginReal);
        CHECK(s.labels == labels_from_instances(s.instances));
        CHECK(s.instances == metrics::connected_components(s.labels));
      }
  }
  CHECK(make_client_datasets(cfg)[1].test[2].image == clients[1].test[2].image);

  SUBCASE("style differs, structure statistics match") {
    const auto big = make_client_datasets(two_client_config(120));
    std::array<std::array<double, 16>, 2> hist{};
    std::array<double, 2> boundary{};
    for (int c = 0; c < 2; ++c) {
      double pixels = 0;
      for (const auto& s : big[c].train) {
        for (double v : s.image.pixels()) hist[c][std::min<std::size_t>(15, static_cast<std::size_t>(v * 16))] += 1;
        for (auto l : s.labels.pixels()) boundary[c] += l == kBoundary;
        pixels += static_cast<double>(s.image.size());
      }
      for (auto& h : hist[c]) h /= pixels;
      boundary[c] /= pixels;
    }
    double l1 = 0;
    for (int b = 0; b < 16; ++b) l1 += std::abs(hist[0][b] - hist[1][b]);
    // Histogram L1 distance is 2 for disjoint supports; these styles measure 1.62.
    CHECK(l1 > 1.2);
    CHECK(std::abs(boundary[0] - boundary[1]) < 0.02);
  }
  auto bad = cfg;
  bad.clients[1].id = "A";
  CHECK_THROWS_AS(make_client_datasets(bad), ConfigError);
  bad = cfg;
  bad.clients[0].samples = 2;
  CHECK_THROWS_AS(make_client_datasets(bad), ConfigError);
}

TEST_CASE("dataset write/read round trip") {
  const auto cfg = two_client_config(12);
  const auto clients = make_client_datasets(cfg);
  const auto dir = scratch_dir("roundtrip");
  write_datasets(dir, cfg, clients);
  CHECK(std::filesystem::exists(dir / "A" / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "B" / "manifest.json"));
  const auto back = read_datasets(dir);
  REQUIRE(back.size() == 2);
  for (int c = 0; c < 2; ++c) {
    CHECK(back[c].client_id == clients[c].client_id);
    CHECK(back[c].style == clients[c].style);
    REQUIRE(back[c].train.size() == clients[c].train.size());
    for (std::size_t i = 0; i < back[c].train.size(); ++i) {
      CHECK(back[c].train[i].image == clients[c].train[i].image);
      CHECK(back[c].train[i].instances == clients[c].train[i].instances);
      CHECK(back[c].train[i].structure_seed == clients[c].train[i].structure_seed);
    }
  }
  const auto cfg_back = read_dataset_config(dir);
  CHECK(to_json(cfg_back) == to_json(cfg));
  const auto again = scratch_dir("roundtrip2");
  write_datasets(again, cfg, make_client_datasets(cfg));
  CHECK(sha256_file(dir / "B" / "manifest.json") == sha256_file(again / "B" / "manifest.json"));
  CHECK(sha256_file(dir / "A" / "test" / "A-00010.image.pgm") == sha256_file(again / "A" / "test" / "A-00010.image.pgm"));
}

TEST_CASE("config json rejects unknown keys") {
  auto j = nlohmann::json(to_json(two_client_config(20)));
  CHECK_NOTHROW(dataset_config_from_json(j));
  j["clients"][0]["style"]["gain"] = 1;
  CHECK_THROWS_AS(dataset_config_from_json(j), ConfigError);
  CHECK_THROWS_AS(style_from_json(nlohmann::json{{"grain_mean", "bright"}}), ConfigError);
}

TEST_CASE("pgm round trips") {
  const auto t = voronoi_labels(4, 24, 40, 20);
  const auto img = quantize8(render_style(t.instances, StyleSpec{.noise_sigma = 0.1}, 2));
  CHECK(decode_gray_pgm(encode_pgm(img)) == img);
  CHECK(decode_label_pgm(encode_pgm(t.labels)) == t.labels);
  CHECK(decode_instance_pgm(encode_pgm(t.instances)) == t.instances);
  InstanceMap wide(8, 8, 0);
  wide.at(3, 3) = 65535;
  wide.at(0, 1) = 256;
  CHECK(decode_instance_pgm(encode_pgm(wide)) == wide);

  const auto dir = scratch_dir("pgm");
  save_image(dir / "x.pgm", img);
  CHECK(load_gray_image(dir / "x.pgm") == img);
  CHECK(encode_pgm(img).substr(0, 13) == "P5\n40 24\n255\n");
}

TEST_CASE("pgm negative cases") {
  const auto t = voronoi_labels(4, 16, 16, 6);
  const std::string good = encode_pgm(t.instances);
  SUBCASE("truncated") {
    const std::string cut = good.substr(0, good.size() - 3);
    try {
      decode_instance_pgm(cut);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == cut.size());
      CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
  }
  SUBCASE("maxval mismatch") {
    CHECK_THROWS_AS(decode_instance_pgm(encode_pgm(t.labels)), FormatError);
    CHECK_THROWS_AS(decode_label_pgm(good), FormatError);
  }
  SUBCASE("bad magic") {
    std::string p2 = good;
    p2[1] = '2';
    try {
      decode_instance_pgm(p2);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("out-of-range pixel values") {
    std::string lab = encode_pgm(t.labels);
    lab[lab.size() - 1] = 7;
    CHECK_THROWS_AS(decode_label_pgm(lab), FormatError);
    GrayImage hot(8, 8, 0.5);
    hot.at(1, 1) = 1.5;
    CHECK_THROWS_AS(encode_pgm(hot), FormatError);
  }
  SUBCASE("trailing bytes and comments") {
    CHECK_THROWS_AS(decode_instance_pgm(good + "x"), FormatError);
    const std::string commented = "P5\n# made by hand\n2 1\n255\n\x10\x20";
    const auto g = decode_gray_pgm(commented);
    CHECK(g.at(0, 1) == 32.0 / 255.0);
  }
  CHECK_THROWS_AS(load_gray_image("/nonexistent/dir/x.pgm"), IoError);
}
