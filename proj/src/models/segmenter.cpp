#include "fedgrain/models/segmenter.hpp"

#include <cmath>

#include "fedgrain/common/error.hpp"
#include "fedgrain/metrics/components.hpp"

namespace fedgrain::models {

ad::ParamSet build_segmenter(const SegmenterConfig& cfg, std::uint64_t seed) { return build_unet(cfg.unet(), seed); }

std::size_t segmenter_param_count(const SegmenterConfig& cfg) { return unet_param_count(cfg.unet()); }

namespace {

template <typename T>
void require_uniform(std::span<const Grid<T>* const> grids, const char* what) {
  if (grids.empty()) throw ShapeError(std::string(what) + ": empty batch");
  for (const auto* g : grids) require_same_grid(*grids[0], *g, what);
}

}  // namespace

ad::Tensor image_batch(std::span<const GrayImage* const> images) {
  require_uniform(images, "image_batch");
  const std::size_t h = images[0]->height(), w = images[0]->width(), plane = h * w;
  ad::Tensor t(ad::Shape{images.size(), 1, h, w});
  for (std::size_t n = 0; n < images.size(); ++n)
    for (std::size_t i = 0; i < plane; ++i) t[n * plane + i] = (*images[n])[i];
  return t;
}

ad::Tensor one_hot_batch(std::span<const LabelMap* const> labels) {
  require_uniform(labels, "one_hot_batch");
  const std::size_t h = labels[0]->height(), w = labels[0]->width(), plane = h * w;
  ad::Tensor t(ad::Shape{labels.size(), 2, h, w});
  for (std::size_t n = 0; n < labels.size(); ++n)
    for (std::size_t i = 0; i < plane; ++i) {
      const auto v = (*labels[n])[i];
      if (v > 1) throw ShapeError("one_hot_batch: label value " + std::to_string(v) + " outside {0, 1}");
      t[(2 * n + v) * plane + i] = 1.0;
    }
  return t;
}

std::vector<std::uint8_t> label_vector(std::span<const LabelMap* const> labels) {
  require_uniform(labels, "label_vector");
  std::vector<std::uint8_t> out;
  out.reserve(labels.size() * labels[0]->size());
  for (const auto* l : labels) out.insert(out.end(), l->pixels().begin(), l->pixels().end());
  return out;
}

ad::NodeId segmenter_logits(ad::Graph& g, const ad::Binding& params, ad::NodeId images, const SegmenterConfig& cfg) {
  return unet_forward(g, params, images, cfg.unet());
}

ad::NodeId segmentation_loss_node(ad::Graph& g, const ad::Binding& params, const SegmenterConfig& cfg,
                                  const ad::Tensor& images, std::span<const std::uint8_t> labels) {
  const ad::NodeId x = g.constant(images);
  return g.softmax_cross_entropy(segmenter_logits(g, params, x, cfg), labels);
}

double segmentation_loss(const ad::ParamSet& params, const SegmenterConfig& cfg,
                         std::span<const GrayImage* const> images, std::span<const LabelMap* const> labels) {
  if (images.size() != labels.size())
    throw ShapeError("segmentation_loss: " + std::to_string(images.size()) + " images but " +
                     std::to_string(labels.size()) + " label maps");
  ad::Graph g;
  const auto b = g.bind(params, false);
  const double loss = g.value(segmentation_loss_node(g, b, cfg, image_batch(images), label_vector(labels))).item();
  if (!std::isfinite(loss)) throw DivergenceError("segmentation_loss: non-finite loss");
  return loss;
}

std::pair<double, ad::ParamSet> segmentation_loss_and_grad(const ad::ParamSet& params, const SegmenterConfig& cfg,
                                                           const ad::Tensor& images,
                                                           std::span<const std::uint8_t> labels) {
  ad::Graph g;
  const auto b = g.bind(params);
  const ad::NodeId loss = segmentation_loss_node(g, b, cfg, images, labels);
  ad::ParamSet grad = g.backward(loss, b);
  return {g.value(loss).item(), std::move(grad)};
}

ad::Tensor segmenter_probabilities(const ad::ParamSet& params, const SegmenterConfig& cfg, const GrayImage& image) {
  ad::Graph g;
  const auto b = g.bind(params, false);
  const GrayImage* one[] = {&image};
  const ad::NodeId x = g.constant(image_batch(one));
  return g.value(g.softmax_channels(segmenter_logits(g, b, x, cfg)));
}

LabelMap argmax_labels(const ad::Tensor& scores) {
  if (scores.rank() != 4 || scores.dim(0) != 1 || scores.dim(1) != 2)
    throw ShapeError("argmax_labels: expected [1,2,H,W], got " + ad::shape_str(scores.shape()));
  const std::size_t h = scores.dim(2), w = scores.dim(3), plane = h * w;
  LabelMap out(h, w);
  for (std::size_t i = 0; i < plane; ++i) out[i] = scores[plane + i] > scores[i] ? kGrain : kBoundary;
  return out;
}

Prediction prediction_from_scores(const ad::Tensor& scores) {
  Prediction p;
  p.labels = argmax_labels(scores);
  p.instances = metrics::connected_components(p.labels);
  return p;
}

Prediction predict_instances(const ad::ParamSet& params, const SegmenterConfig& cfg, const GrayImage& image) {
  return prediction_from_scores(segmenter_probabilities(params, cfg, image));
}

}  // namespace fedgrain::models
