// cost: synthetic data generation, training, tracking and evaluation.

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cost/checkpoint.hpp"
#include "cost/config.hpp"
#include "cost/dataset.hpp"
#include "cost/metrics.hpp"
#include "cost/synth.hpp"
#include "cost/tracker.hpp"
#include "cost/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cost;

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_boxes(const fs::path& path, const std::vector<BoundingBox>& boxes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  for (const auto& b : boxes)
    out << shortest(b.x) << ',' << shortest(b.y) << ',' << shortest(b.w) << ',' << shortest(b.h) << '\n';
}

std::vector<BoundingBox> read_boxes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::vector<BoundingBox> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::array<double, 4> v{};
    std::istringstream ss(line);
    std::string field;
    std::size_t k = 0;
    for (; k < 4 && std::getline(ss, field, ','); ++k) {
      try {
        v[k] = std::stod(field);
      } catch (const std::exception&) {
        k = 5;
        break;
      }
    }
    if (k != 4) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected x,y,w,h");
    out.push_back({v[0], v[1], v[2], v[3]});
  }
  return out;
}

json metrics_json(const MetricReport& r) {
  return {{"auc", r.auc},         {"precision", r.precision}, {"norm_precision", r.norm_precision},
          {"cauc", r.cauc},       {"macc", r.macc},           {"frames", r.frames},
          {"evaluated_frames", r.evaluated_frames}};
}

void write_curve(const fs::path& path, const Curve& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  out << "threshold,value\n";
  for (std::size_t i = 0; i < c.values.size(); ++i) out << shortest(c.thresholds[i]) << ',' << shortest(c.values[i]) << '\n';
}

CostConfig config_from_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  try {
    return parse_config(ckpt.metadata, path.string() + " (metadata)");
  } catch (const ConfigError& e) {
    throw CheckpointError(e.what());
  }
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string out;
  std::uint64_t seed = 1;
  std::string regime = "generic";
  std::size_t sequences = 10;
  std::size_t frames = 60;
  std::string frame_size;
  std::size_t distractors = 0;
  std::string config;
};

int gen_synthetic(const GenArgs& a) {
  SynthConfig sc = a.config.empty() ? SynthConfig{} : load_config(a.config).synth;
  sc.seed = a.seed;
  sc.regime = parse_regime(a.regime);
  sc.sequences = a.sequences;
  sc.sequence_length = a.frames;
  sc.distractors = a.distractors;
  if (!a.frame_size.empty()) {
    const auto x = a.frame_size.find('x');
    if (x == std::string::npos) throw std::invalid_argument("--frame-size must look like WxH");
    sc.frame_width = std::stoul(a.frame_size.substr(0, x));
    sc.frame_height = std::stoul(a.frame_size.substr(x + 1));
  }
  const auto seqs = generate_synthetic(sc, a.out);
  double speed = 0.0;
  for (const auto& s : seqs) speed += average_relative_speed(s).value_or(0.0);
  spdlog::info("wrote {} sequences to {}; mean relative speed {:.3f}", seqs.size(), a.out,
               speed / static_cast<double>(seqs.size()));
  return 0;
}

struct TrainArgs {
  std::string data, config, out;
  std::optional<std::uint64_t> seed;
};

int train(const TrainArgs& a) {
  CostConfig config = a.config.empty() ? CostConfig{} : load_config(a.config);
  if (a.seed) {
    config.train.seed = *a.seed;
    config.model.init_seed = *a.seed;
  }
  config.validate();
  const auto seqs = load_dataset(a.data);
  CostModel model(config.model);
  Trainer trainer(model, seqs, config.train);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t e = 0; e < config.train.epochs; ++e) {
    const EpochStats s = trainer.train_epoch();
    spdlog::info("epoch {}/{}: loss {:.4f} (coa {:.4f}, reg {:.4f}, ce {:.4f}), {:.1f} s", e + 1, config.train.epochs,
                 s.total, s.coa, s.reg, s.ce,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  save_checkpoint(a.out, Checkpoint::from_parameters(model.parameters(), to_text(config)));
  spdlog::info("saved {}", a.out);
  return 0;
}

struct TrackArgs {
  std::string data, ckpt, out;
  bool no_language = false;
};

int track(const TrackArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const CostConfig config = config_from_checkpoint(ckpt, a.ckpt);
  CostModel model(config.model);
  ckpt.restore(model.parameters());
  RuntimeConfig rc = config.runtime;
  if (a.no_language) rc.use_language = false;
  fs::create_directories(a.out);
  for (const auto& seq : load_dataset(a.data)) {
    const auto boxes = track_sequence(model, rc, seq);
    write_boxes(fs::path(a.out) / (seq.id + ".txt"), boxes);
    spdlog::info("{}: {} frames", seq.id, boxes.size());
  }
  return 0;
}

struct EvalArgs {
  std::string data, pred, out, curves;
};

int eval(const EvalArgs& a) {
  const auto seqs = load_dataset(a.data);
  std::map<std::string, MetricReport> reports;
  json per_sequence = json::array();
  for (const auto& seq : seqs) {
    const auto pred = read_boxes(fs::path(a.pred) / (seq.id + ".txt"));
    const MetricReport r = compute_metrics(pred, seq);
    reports[seq.id] = r;
    json j = metrics_json(r);
    j["id"] = seq.id;
    per_sequence.push_back(j);
  }
  std::vector<MetricReport> all;
  for (const auto& [id, r] : reports) all.push_back(r);
  const MetricReport summary = average_reports(all);
  json attributes = json::array();
  for (const auto& slice : attribute_report(reports, seqs)) {
    json j = metrics_json(slice.report);
    j["label"] = slice.label;
    j["sequences"] = slice.sequences;
    attributes.push_back(j);
  }
  const json report = {{"summary", metrics_json(summary)}, {"sequences", per_sequence}, {"attributes", attributes}};
  std::ofstream(a.out, std::ios::binary) << report.dump(2) << '\n';
  if (!a.curves.empty()) {
    fs::create_directories(a.curves);
    write_curve(fs::path(a.curves) / "success.csv", summary.success);
    write_curve(fs::path(a.curves) / "precision.csv", summary.precision_curve);
    write_curve(fs::path(a.curves) / "norm_precision.csv", summary.norm_precision_curve);
    write_curve(fs::path(a.curves) / "complete_success.csv", summary.complete_success);
  }
  spdlog::info("AUC {:.4f}  P {:.4f}  P_norm {:.4f}  cAUC {:.4f}  mACC {:.4f}", summary.auc, summary.precision,
               summary.norm_precision, summary.cauc, summary.macc);
  return 0;
}

struct ReportArgs {
  std::string in;
  bool attributes = false;
  std::string format = "csv";
};

int report(const ReportArgs& a) {
  std::ifstream in(a.in);
  if (!in) throw std::runtime_error(a.in + ": cannot open");
  const json j = json::parse(in);
  static const char* keys[] = {"auc", "precision", "norm_precision", "cauc", "macc"};
  json rows = json::array();
  if (a.attributes) {
    rows = j.at("attributes");
  } else {
    json s = j.at("summary");
    s["label"] = "all";
    rows.push_back(s);
  }
  if (a.format == "json") {
    std::cout << rows.dump(2) << '\n';
    return 0;
  }
  std::cout << (a.attributes ? "attribute,sequences" : "slice,sequences");
  for (const char* k : keys) std::cout << ',' << k;
  std::cout << '\n';
  for (const auto& r : rows) {
    std::cout << r.at("label").get<std::string>() << ','
              << (r.contains("sequences") ? r["sequences"].size() : j.at("sequences").size());
    for (const char* k : keys) std::cout << ',' << shortest(r.at(k).get<double>());
    std::cout << '\n';
  }
  return 0;
}

int validate(const std::string& data) {
  const ValidationReport r = validate_dataset(data);
  std::cout << "sequence,frames,visible,mean_size,mean_relative_size,small,relative_speed\n";
  for (const auto& s : r.sequences)
    std::cout << s.id << ',' << s.frames << ',' << s.visible << ',' << shortest(s.size.mean_size) << ','
              << shortest(s.size.mean_relative_size) << ',' << (s.size.small ? 1 : 0) << ','
              << (s.relative_speed ? shortest(*s.relative_speed) : "") << '\n';
  for (const auto& e : r.errors) spdlog::error("{}", e);
  return r.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"COST vision-language tracker"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag("-q,--quiet", quiet, "errors only");

  GenArgs gen;
  auto* g = app.add_subcommand("gen-synthetic", "render a synthetic dataset");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--seed", gen.seed, "random seed")->required();
  g->add_option("--regime", gen.regime, "generic or high-speed")->check(CLI::IsMember({"generic", "high-speed"}));
  g->add_option("--sequences", gen.sequences, "number of sequences")->required();
  g->add_option("--frames", gen.frames, "frames per sequence");
  g->add_option("--frame-size", gen.frame_size, "WxH in pixels");
  g->add_option("--distractors", gen.distractors, "same-shape distractors per sequence");
  g->add_option("--config", gen.config, "config file supplying the synth.* keys")->check(CLI::ExistingFile);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model and write a checkpoint");
  t->add_option("--data", tr.data, "dataset root")->required()->check(CLI::ExistingDirectory);
  t->add_option("--config", tr.config, "config file")->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "checkpoint path")->required();
  t->add_option("--seed", tr.seed, "overrides train.seed and model.init_seed");

  TrackArgs tk;
  auto* k = app.add_subcommand("track", "track every sequence with a checkpoint");
  k->add_option("--data", tk.data, "dataset root")->required()->check(CLI::ExistingDirectory);
  k->add_option("--ckpt", tk.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  k->add_option("--out", tk.out, "prediction directory")->required();
  k->add_flag("--no-language", tk.no_language, "zero the language features");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score predictions against ground truth");
  e->add_option("--data", ev.data, "dataset root")->required()->check(CLI::ExistingDirectory);
  e->add_option("--pred", ev.pred, "prediction directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--out", ev.out, "report JSON")->required();
  e->add_option("--curves", ev.curves, "directory for curve CSVs");

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "print a summary or per-attribute table");
  r->add_option("--in", rp.in, "report JSON from eval")->required()->check(CLI::ExistingFile);
  r->add_flag("--attributes", rp.attributes, "per-attribute slices");
  r->add_option("--format", rp.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  std::string vdata;
  auto* v = app.add_subcommand("validate", "check a dataset and print per-sequence statistics");
  v->add_option("--data", vdata, "dataset root")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::info);
  spdlog::set_default_logger(spdlog::stderr_color_mt("cost"));
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::info);

  try {
    if (*g) return gen_synthetic(gen);
    if (*t) return train(tr);
    if (*k) return track(tk);
    if (*e) return eval(ev);
    if (*r) return report(rp);
    if (*v) return validate(vdata);
  } catch (const std::exception& ex) {
    spdlog::error("{}", ex.what());
    return 1;
  }
  return 0;
}
