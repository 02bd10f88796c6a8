#include "cost/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace cost {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::string key;
  std::function<std::string(const CostConfig&)> get;
  std::function<void(CostConfig&, std::string_view)> set;
};

std::size_t to_size(std::string_view v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected a nonnegative integer");
  return out;
}

std::uint64_t to_u64(std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected a nonnegative integer");
  return out;
}

double to_double(std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) throw std::invalid_argument("expected a number");
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true or false");
}

template <class T>
Field size_field(std::string key, T CostConfig::*part, std::size_t T::*member) {
  return {std::move(key), [=](const CostConfig& c) { return std::to_string(c.*part.*member); },
          [=](CostConfig& c, std::string_view v) { c.*part.*member = to_size(v); }};
}

template <class T>
Field double_field(std::string key, T CostConfig::*part, double T::*member) {
  return {std::move(key), [=](const CostConfig& c) { return fmt(c.*part.*member); },
          [=](CostConfig& c, std::string_view v) { c.*part.*member = to_double(v); }};
}

template <class T>
Field bool_field(std::string key, T CostConfig::*part, bool T::*member) {
  return {std::move(key), [=](const CostConfig& c) { return std::string(c.*part.*member ? "true" : "false"); },
          [=](CostConfig& c, std::string_view v) { c.*part.*member = to_bool(v); }};
}

template <class T>
Field seed_field(std::string key, T CostConfig::*part, std::uint64_t T::*member) {
  return {std::move(key), [=](const CostConfig& c) { return std::to_string(c.*part.*member); },
          [=](CostConfig& c, std::string_view v) { c.*part.*member = to_u64(v); }};
}

// Nested members of ModelConfig and TrainConfig.
template <class T>
Field nested_size(std::string key, T ModelConfig::*sub, std::size_t T::*member) {
  return {std::move(key), [=](const CostConfig& c) { return std::to_string(c.model.*sub.*member); },
          [=](CostConfig& c, std::string_view v) { c.model.*sub.*member = to_size(v); }};
}
template <class T>
Field nested_double(std::string key, T ModelConfig::*sub, double T::*member) {
  return {std::move(key), [=](const CostConfig& c) { return fmt(c.model.*sub.*member); },
          [=](CostConfig& c, std::string_view v) { c.model.*sub.*member = to_double(v); }};
}
template <class T>
Field nested_bool(std::string key, T ModelConfig::*sub, bool T::*member) {
  return {std::move(key), [=](const CostConfig& c) { return std::string(c.model.*sub.*member ? "true" : "false"); },
          [=](CostConfig& c, std::string_view v) { c.model.*sub.*member = to_bool(v); }};
}
Field loss_field(std::string key, double LossWeights::*member) {
  return {std::move(key), [=](const CostConfig& c) { return fmt(c.train.weights.*member); },
          [=](CostConfig& c, std::string_view v) { c.train.weights.*member = to_double(v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using V = VisualConfig;
    using L = LinguisticConfig;
    using F = FusionConfig;
    using T = TrainConfig;
    using R = RuntimeConfig;
    using S = SynthConfig;
    std::vector<Field> f;
    f.push_back({"model.init_seed", [](const CostConfig& c) { return std::to_string(c.model.init_seed); },
                 [](CostConfig& c, std::string_view v) { c.model.init_seed = to_u64(v); }});
    f.push_back(nested_size("visual.search_size", &ModelConfig::visual, &V::search_size));
    f.push_back(nested_size("visual.template_size", &ModelConfig::visual, &V::template_size));
    f.push_back(nested_size("visual.stem_stride", &ModelConfig::visual, &V::stem_stride));
    f.push_back(nested_size("visual.stem_channels", &ModelConfig::visual, &V::stem_channels));
    f.push_back(nested_size("visual.encoder_repeats", &ModelConfig::visual, &V::encoder_repeats));
    f.push_back(nested_size("visual.num_heads", &ModelConfig::visual, &V::num_heads));
    f.push_back(nested_size("visual.decoder_heads", &ModelConfig::visual, &V::decoder_heads));
    f.push_back(nested_size("visual.ffn_hidden", &ModelConfig::visual, &V::ffn_hidden));
    f.push_back(nested_double("visual.dropout", &ModelConfig::visual, &V::dropout));
    f.push_back(nested_size("visual.post_conv_count", &ModelConfig::visual, &V::post_conv_count));
    f.push_back(nested_size("visual.post_conv_kernel", &ModelConfig::visual, &V::post_conv_kernel));
    f.push_back(nested_bool("visual.post_conv_same_padding", &ModelConfig::visual, &V::post_conv_same_padding));
    f.push_back(nested_size("visual.post_crop", &ModelConfig::visual, &V::post_crop));
    f.push_back(nested_bool("visual.pos_every_layer", &ModelConfig::visual, &V::pos_every_layer));
    f.push_back(nested_size("linguistic.vocab_size", &ModelConfig::linguistic, &L::vocab_size));
    f.push_back(nested_size("linguistic.max_words", &ModelConfig::linguistic, &L::max_words));
    f.push_back(nested_size("linguistic.width", &ModelConfig::linguistic, &L::width));
    f.push_back(nested_size("linguistic.layers", &ModelConfig::linguistic, &L::layers));
    f.push_back(nested_size("linguistic.num_heads", &ModelConfig::linguistic, &L::num_heads));
    f.push_back(nested_size("linguistic.ffn_hidden", &ModelConfig::linguistic, &L::ffn_hidden));
    f.push_back(nested_double("linguistic.dropout", &ModelConfig::linguistic, &L::dropout));
    f.push_back(nested_size("fusion.width", &ModelConfig::fusion, &F::width));
    f.push_back(nested_size("fusion.layers", &ModelConfig::fusion, &F::layers));
    f.push_back(nested_size("fusion.num_heads", &ModelConfig::fusion, &F::num_heads));
    f.push_back(nested_size("fusion.ffn_hidden", &ModelConfig::fusion, &F::ffn_hidden));
    f.push_back(nested_double("fusion.dropout", &ModelConfig::fusion, &F::dropout));
    f.push_back(size_field("train.pairs_per_epoch", &CostConfig::train, &T::pairs_per_epoch));
    f.push_back(size_field("train.epochs", &CostConfig::train, &T::epochs));
    f.push_back(size_field("train.batch_size", &CostConfig::train, &T::batch_size));
    f.push_back(double_field("train.learning_rate", &CostConfig::train, &T::learning_rate));
    f.push_back(double_field("train.weight_decay", &CostConfig::train, &T::weight_decay));
    f.push_back(double_field("train.grad_clip", &CostConfig::train, &T::grad_clip));
    f.push_back(double_field("train.translate", &CostConfig::train, &T::translate));
    f.push_back(double_field("train.brightness", &CostConfig::train, &T::brightness));
    f.push_back(double_field("train.scale_jitter", &CostConfig::train, &T::scale_jitter));
    f.push_back(size_field("train.max_frame_gap", &CostConfig::train, &T::max_frame_gap));
    f.push_back(double_field("train.search_scale", &CostConfig::train, &T::search_scale));
    f.push_back(double_field("train.template_scale", &CostConfig::train, &T::template_scale));
    f.push_back(bool_field("train.use_coa", &CostConfig::train, &T::use_coa));
    f.push_back(bool_field("train.use_language", &CostConfig::train, &T::use_language));
    f.push_back(bool_field("train.coa_only", &CostConfig::train, &T::coa_only));
    f.push_back(seed_field("train.seed", &CostConfig::train, &T::seed));
    f.push_back(loss_field("loss.l1", &LossWeights::l1));
    f.push_back(loss_field("loss.giou", &LossWeights::giou));
    f.push_back(loss_field("loss.ce", &LossWeights::ce));
    f.push_back({"coa.temperature", [](const CostConfig& c) { return fmt(c.train.coa.temperature); },
                 [](CostConfig& c, std::string_view v) { c.train.coa.temperature = to_double(v); }});
    f.push_back({"coa.batch_size", [](const CostConfig& c) { return std::to_string(c.train.coa.batch_size); },
                 [](CostConfig& c, std::string_view v) { c.train.coa.batch_size = to_size(v); }});
    f.push_back({"coa.denominator",
                 [](const CostConfig& c) {
                   return std::string(c.train.coa.mode == DenominatorMode::Standard ? "standard" : "as-written");
                 },
                 [](CostConfig& c, std::string_view v) {
                   if (v == "standard") c.train.coa.mode = DenominatorMode::Standard;
                   else if (v == "as-written") c.train.coa.mode = DenominatorMode::AsWritten;
                   else throw std::invalid_argument("expected standard or as-written");
                 }});
    f.push_back(double_field("runtime.search_scale", &CostConfig::runtime, &R::search_scale));
    f.push_back(double_field("runtime.template_scale", &CostConfig::runtime, &R::template_scale));
    f.push_back(size_field("runtime.search_resize", &CostConfig::runtime, &R::search_resize));
    f.push_back(size_field("runtime.template_resize", &CostConfig::runtime, &R::template_resize));
    f.push_back(size_field("runtime.window_side", &CostConfig::runtime, &R::window_side));
    f.push_back(double_field("runtime.window_weight", &CostConfig::runtime, &R::window_weight));
    f.push_back(bool_field("runtime.use_language", &CostConfig::runtime, &R::use_language));
    f.push_back(size_field("synth.frame_width", &CostConfig::synth, &S::frame_width));
    f.push_back(size_field("synth.frame_height", &CostConfig::synth, &S::frame_height));
    f.push_back(double_field("synth.target_size", &CostConfig::synth, &S::target_size));
    f.push_back(double_field("synth.size_variation", &CostConfig::synth, &S::size_variation));
    f.push_back({"synth.regime", [](const CostConfig& c) { return to_string(c.synth.regime); },
                 [](CostConfig& c, std::string_view v) { c.synth.regime = parse_regime(std::string(v)); }});
    f.push_back(double_field("synth.generic_speed", &CostConfig::synth, &S::generic_speed));
    f.push_back(double_field("synth.high_speed_factor", &CostConfig::synth, &S::high_speed_factor));
    f.push_back(size_field("synth.distractors", &CostConfig::synth, &S::distractors));
    f.push_back(double_field("synth.occlusion_rate", &CostConfig::synth, &S::occlusion_rate));
    f.push_back(double_field("synth.illumination_rate", &CostConfig::synth, &S::illumination_rate));
    f.push_back(size_field("synth.sequence_length", &CostConfig::synth, &S::sequence_length));
    f.push_back(size_field("synth.sequences", &CostConfig::synth, &S::sequences));
    f.push_back({"synth.description", [](const CostConfig& c) { return c.synth.description_template; },
                 [](CostConfig& c, std::string_view v) { c.synth.description_template = std::string(v); }});
    f.push_back(seed_field("synth.seed", &CostConfig::synth, &S::seed));
    return f;
  }();
  return table;
}

}  // namespace

void CostConfig::validate() const {
  model.validate();
  train.validate();
  runtime.validate(model);
  synth.validate();
}

CostConfig parse_config(std::string_view text, const std::string& source) {
  struct Entry {
    std::size_t line;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  const auto fail = [&](std::size_t line, const std::string& msg) {
    throw ConfigError(source + ":" + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    Entry e{line_no, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1)))};
    if (e.key.empty()) fail(line_no, "empty key");
    if (!seen.insert(e.key).second) fail(line_no, "duplicate key '" + e.key + "'");
    entries.push_back(std::move(e));
  }

  CostConfig config;
  for (const auto& e : entries) {
    if (e.key != "model.preset") continue;
    if (e.value == "desk") config.model = ModelConfig::desk();
    else if (e.value == "paper") config.model = ModelConfig::paper();
    else fail(e.line, "model.preset must be desk or paper");
  }

  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;
  for (const auto& e : entries) {
    if (e.key == "model.preset") continue;
    auto it = by_key.find(e.key);
    if (it == by_key.end()) fail(e.line, "unknown key '" + e.key + "'");
    try {
      it->second->set(config, e.value);
    } catch (const std::invalid_argument& err) {
      fail(e.line, e.key + ": " + err.what() + ", got '" + e.value + "'");
    }
  }

  const RuntimeConfig derived = RuntimeConfig::for_model(config.model);
  if (!seen.count("runtime.search_resize")) config.runtime.search_resize = derived.search_resize;
  if (!seen.count("runtime.template_resize")) config.runtime.template_resize = derived.template_resize;
  if (!seen.count("runtime.window_side")) config.runtime.window_side = derived.window_side;
  try {
    config.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(source + ": " + err.what());
  }
  return config;
}

CostConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string to_text(const CostConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace cost
