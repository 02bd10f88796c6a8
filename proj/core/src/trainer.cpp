#include "cost/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cost/autograd.hpp"

namespace cost {

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.pairs_per_epoch = 4200;
  c.epochs = 1000;
  c.batch_size = 14;
  return c;
}

void TrainConfig::validate() const {
  if (pairs_per_epoch == 0 || batch_size == 0) throw std::invalid_argument("train config: pairs_per_epoch and batch_size must be positive");
  if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0) || !(grad_clip >= 0.0))
    throw std::invalid_argument("train config: learning_rate, weight_decay and grad_clip must be nonnegative");
  if (brightness < 0.0 || brightness >= 1.0) throw std::invalid_argument("train config: brightness must lie in [0, 1)");
  if (!(scale_jitter >= 0.0) || scale_jitter >= 1.0) throw std::invalid_argument("train config: scale_jitter must lie in [0, 1)");
  if (!(search_scale > 1.0) || !(template_scale > 1.0)) throw std::invalid_argument("train config: crop scales must exceed 1");
  if (weights.l1 < 0.0 || weights.giou < 0.0 || weights.ce < 0.0)
    throw std::invalid_argument("train config: loss weights must be nonnegative");
  if (!(coa.temperature > 0.0)) throw std::invalid_argument("train config: CoA temperature must be positive");
  if (coa_only && !(use_coa && use_language))
    throw std::invalid_argument("train config: coa_only needs both use_coa and use_language");
}

AugmentParams sample_augment(double translate, double brightness, Rng& rng, double scale_jitter) {
  AugmentParams p;
  p.dx = rng.uniform(-translate, translate);
  p.dy = rng.uniform(-translate, translate);
  p.brightness = rng.uniform(1.0 - brightness, 1.0 + brightness);
  if (scale_jitter > 0.0) p.scale = rng.uniform(1.0 - scale_jitter, 1.0 + scale_jitter);
  return p;
}

AugmentedCrop augment_crop(const RgbImage& frame, const BoundingBox& box, double scale, std::size_t out_size,
                           const AugmentParams& params) {
  CropResult c = crop_window(frame, box, scale * params.scale, out_size, params.dx, params.dy);
  return {ImageTensor::normalize(c.raw, params.brightness), c.transform.to_crop(box), c.transform};
}

Trainer::Trainer(CostModel& model, std::vector<SequenceAnnotation> sequences, TrainConfig config)
    : model_(model),
      sequences_(std::move(sequences)),
      config_(std::move(config)),
      optimizer_(tensors_of(model.parameters()), {config_.learning_rate, config_.weight_decay}),
      sample_rng_(config_.seed),
      dropout_rng_(sample_rng_.split()) {
  config_.validate();
  config_.coa.batch_size = config_.batch_size;
  if (sequences_.empty()) throw std::invalid_argument("trainer: empty training set");
  for (const auto& seq : sequences_) {
    seq.check();
    std::vector<std::size_t> usable;
    for (std::size_t t = 0; t < seq.size(); ++t)
      if (seq.visible(t) && !seq.boxes[t].empty()) usable.push_back(t);
    if (usable.empty()) throw std::invalid_argument("trainer: sequence " + seq.id + " has no visible frames");
    usable_.push_back(std::move(usable));
  }
}

const RgbImage& Trainer::frame(std::size_t sequence, std::size_t t) {
  auto key = std::make_pair(sequence, t);
  auto it = frames_.find(key);
  if (it == frames_.end()) it = frames_.emplace(key, sequences_[sequence].load_frame(t)).first;
  return it->second;
}

std::vector<SampleDraw> Trainer::draw_batch(std::size_t size) {
  std::vector<std::size_t> order(sequences_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<SampleDraw> batch;
  for (std::size_t k = 0; k < size; ++k) {
    // Distinct sequences within a batch while they last, so CoA negatives differ.
    const std::size_t slot = k % order.size();
    if (slot == 0) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[sample_rng_.below(i)]);
    }
    SampleDraw d;
    d.sequence = order[slot];
    const auto& usable = usable_[d.sequence];
    d.template_frame = usable[sample_rng_.below(usable.size())];
    std::vector<std::size_t> near;
    for (std::size_t t : usable)
      if ((t > d.template_frame ? t - d.template_frame : d.template_frame - t) <= config_.max_frame_gap) near.push_back(t);
    d.search_frame = near[sample_rng_.below(near.size())];
    d.augment = sample_augment(config_.translation(model_.config.visual.search_size), config_.brightness, sample_rng_,
                               config_.scale_jitter);
    batch.push_back(d);
  }
  return batch;
}

EpochStats Trainer::step(const std::vector<SampleDraw>& batch) {
  const ForwardContext ctx{true, &dropout_rng_};
  const ModelConfig& mc = model_.config;
  const bool with_coa = config_.use_coa && config_.use_language && batch.size() >= 2;
  const double search_px = static_cast<double>(mc.visual.search_size);

  std::vector<Tensor> reg_terms, ce_terms, v_emb, l_emb;
  std::vector<std::string> ids;
  for (const SampleDraw& d : batch) {
    const SequenceAnnotation& seq = sequences_[d.sequence];
    const std::string id = "sample " + std::to_string(sample_counter_++) + " (" + seq.id + ", frames " +
                           std::to_string(d.template_frame) + " -> " + std::to_string(d.search_frame) + ")";
    ids.push_back(id);
    const AugmentedCrop templ = augment_crop(frame(d.sequence, d.template_frame), seq.boxes[d.template_frame],
                                             config_.template_scale, mc.visual.template_size,
                                             {0.0, 0.0, d.augment.brightness});
    const AugmentedCrop search = augment_crop(frame(d.sequence, d.search_frame), seq.boxes[d.search_frame],
                                              config_.search_scale, mc.visual.search_size, d.augment);
    const LanguageTokens tokens = tokenize(seq.description, mc.linguistic);
    const Tensor language = model_.language_features(tokens, config_.use_language, ctx);
    const Tensor template_tokens = model_.visual.stem_tokens(templ.image);

    Tensor visual;
    if (config_.coa_only) {
      visual = model_.visual.forward(search.image, template_tokens, ctx);
    } else {
      const ModelOutput out = model_.forward(search.image, template_tokens, language, ctx);
      visual = out.visual_features;
      const BoundingBox gt{search.target.x / search_px, search.target.y / search_px, search.target.w / search_px,
                           search.target.h / search_px};
      const std::vector<int> labels = assign_labels(out.fused.index, gt);
      Tensor reg = regression_loss(out.head.boxes, gt, labels, config_.weights);
      Tensor ce = bce_loss(out.head.confidence, labels, Reduction::Mean);
      if (!std::isfinite(reg.item()) || !std::isfinite(ce.item()))
        throw NumericError("training: non-finite loss at " + id);
      reg_terms.push_back(reg);
      ce_terms.push_back(ce);
    }
    if (with_coa) {
      EmbeddingPair pair = model_.projection.project(visual, language, tokens.mask);
      v_emb.push_back(reshape(pair.visual, {1, pair.visual.numel()}));
      l_emb.push_back(reshape(pair.language, {1, pair.language.numel()}));
    }
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Tensor coa = with_coa ? coa_loss(concat(v_emb, 0), concat(l_emb, 0), config_.coa) : Tensor::scalar(0.0);
  Tensor loss;
  EpochStats s;
  if (config_.coa_only) {
    loss = coa;
  } else {
    const Tensor reg = mul_scalar(sum(concat(reg_terms, 0)), inv_n);
    const Tensor ce = mul_scalar(sum(concat(ce_terms, 0)), inv_n);
    s.reg = reg.item();
    s.ce = ce.item();
    try {
      loss = total_loss(coa, reg, ce, config_.weights);
    } catch (const NumericError&) {
      throw NumericError("training: non-finite loss in batch starting at " + ids.front());
    }
  }
  s.coa = coa.item();
  s.total = loss.item();
  if (!std::isfinite(s.total)) throw NumericError("training: non-finite loss in batch starting at " + ids.front());

  optimizer_.zero_grad();
  backward(loss);
  if (config_.grad_clip > 0.0) clip_grad_norm(optimizer_.params(), config_.grad_clip);
  optimizer_.step();
  s.samples = batch.size();
  s.steps = 1;
  return s;
}

namespace {
void add_stats(EpochStats& into, const EpochStats& s) {
  into.total += s.total;
  into.coa += s.coa;
  into.reg += s.reg;
  into.ce += s.ce;
  into.samples += s.samples;
  into.steps += s.steps;
}
void finish(EpochStats& s) {
  if (s.steps == 0) return;
  const double f = 1.0 / static_cast<double>(s.steps);
  s.total *= f;
  s.coa *= f;
  s.reg *= f;
  s.ce *= f;
}
}  // namespace

EpochStats Trainer::train_epoch() {
  EpochStats stats;
  std::size_t remaining = config_.pairs_per_epoch;
  while (remaining > 0) {
    const std::size_t n = std::min(remaining, config_.batch_size);
    add_stats(stats, step(draw_batch(n)));
    remaining -= n;
  }
  ++epoch_;
  finish(stats);
  return stats;
}

EpochStats Trainer::train_steps(std::size_t steps) {
  EpochStats stats;
  for (std::size_t i = 0; i < steps; ++i) add_stats(stats, step(draw_batch(config_.batch_size)));
  finish(stats);
  return stats;
}

EmbeddingPair Trainer::embed(std::size_t sequence) {
  NoGradGuard no_grad;
  const auto ctx = ForwardContext::eval();
  const ModelConfig& mc = model_.config;
  const SequenceAnnotation& seq = sequences_.at(sequence);
  const std::size_t t = usable_[sequence].front();
  const AugmentedCrop templ = augment_crop(frame(sequence, t), seq.boxes[t], config_.template_scale,
                                           mc.visual.template_size, {});
  const AugmentedCrop search = augment_crop(frame(sequence, t), seq.boxes[t], config_.search_scale,
                                            mc.visual.search_size, {});
  const LanguageTokens tokens = tokenize(seq.description, mc.linguistic);
  const Tensor language = model_.language_features(tokens, true, ctx);
  const Tensor visual = model_.visual.forward(search.image, model_.visual.stem_tokens(templ.image), ctx);
  EmbeddingPair pair = model_.projection.project(visual, language, tokens.mask);
  return {pair.visual.detach(), pair.language.detach()};
}

}  // namespace cost
