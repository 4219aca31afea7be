#include "cinexai/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "cinexai/biomarkers.hpp"
#include "cinexai/cav.hpp"
#include "cinexai/dataset_io.hpp"
#include "cinexai/errors.hpp"
#include "cinexai/interp.hpp"
#include "cinexai/metrics.hpp"
#include "cinexai/model_io.hpp"
#include "cinexai/phantom.hpp"
#include "cinexai/text_io.hpp"
#include "cinexai/training.hpp"

namespace cinexai::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenOptions {
  std::size_t n = 0;
  double prevalence = 0.25;
  std::uint64_t seed = 7;
  int frames = 20;
  int width = 32;
  int height = 32;
  int slices = 1;
  bool full_size = false;
  std::uint32_t first_id = 0;
  unsigned threads = 0;
  std::string out;
  std::string truth;
  std::size_t test_n = 0;
  std::string test_out;
};

struct SmoothingOptions {
  int window = 0;
  int order = -1;

  biomarkers::MeasureConfig config() const {
    biomarkers::MeasureConfig c;
    if (window > 0 || order >= 0) {
      if (window <= 0 || order < 0) throw ParameterError("--window and --order must be given together");
      c.smoothing = biomarkers::SmoothingConfig{window, order};
    }
    return c;
  }
};

struct TrainOptions {
  std::string in;
  std::string out;
  std::string log;
  training::TrainConfig config;
  std::size_t latent_dim = 16;
};

struct ConceptOptions {
  std::string concepts = "low_ef,low_per,low_pfr,low_pafr,high_lvt";
  std::size_t k = 100;
  std::string layer = "cav";
  double l2 = 1e-3;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
};

io::Dataset load(const std::string& path) { return io::read_csq1(fs::path(path)); }

// Subjects that survive volume-closure QC; unmeasurable ones fail it too.
bool passes_qc(const SegSequence& seq) {
  try {
    return biomarkers::qc_volume_closure(biomarkers::lv_volume_curve(seq));
  } catch (const DegenerateError&) {
    return false;
  }
}

std::vector<SegSequence> qc_passing(const std::vector<SegSequence>& subjects) {
  std::vector<SegSequence> out;
  for (const auto& s : subjects)
    if (passes_qc(s)) out.push_back(s);
  return out;
}

std::optional<BiomarkerSet> try_measure(const SegSequence& seq, const biomarkers::MeasureConfig& config) {
  try {
    return biomarkers::measure(seq, config);
  } catch (const DegenerateError&) {
    return std::nullopt;
  } catch (const LandmarkError&) {
    return std::nullopt;
  }
}

std::vector<std::string> concept_names(const std::string& list) {
  std::vector<std::string> names;
  for (const auto& part : io::split(list, ',')) {
    const auto name = std::string(io::trim(part));
    if (!name.empty()) names.push_back(name);
  }
  if (names.empty()) throw ParameterError("no concepts given");
  return names;
}

std::vector<double> parse_alphas(const std::string& list) {
  std::vector<double> alphas;
  for (const auto& part : io::split(list, ',')) {
    try {
      alphas.push_back(std::stod(std::string(io::trim(part))));
    } catch (const std::logic_error&) {
      throw ParameterError("invalid alpha: " + part);
    }
  }
  return alphas;
}

const char* describe(const std::string& concept_name) {
  static const std::map<std::string, const char*> kDescriptions{
      {"low_ef", "Low ejection fraction"},
      {"low_per", "Low peak ejection rate"},
      {"low_pfr", "Low peak filling rate"},
      {"low_pafr", "Low peak atrial filling rate"},
      {"high_lvt", "High wall thickening variance"},
      {"rv_offset", "Vertical RV offset (placebo)"},
  };
  const auto it = kDescriptions.find(concept_name);
  return it == kDescriptions.end() ? "" : it->second;
}

struct Evaluation {
  double auc = 0.0;
  double dice = 0.0;
  std::size_t subjects = 0;
};

Evaluation evaluate(const model::Model& m, const std::vector<SegSequence>& subjects) {
  if (subjects.empty()) throw DataError("evaluation set is empty");
  std::vector<double> scores;
  std::vector<int> labels;
  double dice = 0.0;
  for (const auto& s : subjects) {
    const auto mus = model::encode_sequence(m, s).mus;
    if (s.label != DiseaseLabel::unknown) {
      scores.push_back(model::classify(m, mus).logit);
      labels.push_back(s.label == DiseaseLabel::diseased ? 1 : 0);
    }
    const auto rec = model::decode_sequence(m, mus, s.shape());
    dice += metrics::dice(s.frames, rec.frames);
  }
  return {metrics::auc(scores, labels), dice / static_cast<double>(subjects.size()), subjects.size()};
}

std::string format_metrics(const Evaluation& e) {
  return "metric,value\nauc," + io::format_double(e.auc) + "\ndice," + io::format_double(e.dice) + "\nsubjects," +
         std::to_string(e.subjects) + '\n';
}

void check_model_fits(const model::Model& m, const io::Dataset& data) {
  const auto& arch = m.architecture();
  if (arch.input_voxels != data.shape.voxels() || arch.frames != static_cast<std::size_t>(data.frames)) {
    throw ConfigurationError("model expects " + std::to_string(arch.frames) + " frames of " +
                             std::to_string(arch.input_voxels) + " voxels; dataset differs");
  }
}

std::vector<interp::PcaRow> pca_rows(const model::Model& m, const std::vector<SegSequence>& subjects) {
  std::vector<Eigen::MatrixXd> mus;
  std::vector<Eigen::VectorXd> points;
  for (const auto& s : subjects) {
    mus.push_back(model::encode_sequence(m, s).mus);
    points.push_back(interp::time_averaged_latent(mus.back()));
  }
  const auto pca = interp::pca_project(points, 2);
  std::vector<interp::PcaRow> rows;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto arrow = interp::gradient_arrow(m, mus[i], pca.axes);
    const auto row = static_cast<Eigen::Index>(i);
    const int label = subjects[i].label == DiseaseLabel::unknown ? -1 : static_cast<int>(subjects[i].label);
    rows.push_back({subjects[i].subject_id, pca.projections(row, 0), pca.projections(row, 1), arrow[0], arrow[1],
                    label});
  }
  return rows;
}

int cmd_gen(const GenOptions& o, Context& ctx) {
  phantom::CohortConfig cfg;
  cfg.n = o.n;
  cfg.prevalence = o.prevalence;
  cfg.seed = o.seed;
  cfg.frames = o.full_size ? 50 : o.frames;
  cfg.shape = o.full_size ? FrameShape{80, 80, 3} : FrameShape{o.width, o.height, o.slices};
  cfg.threads = o.threads;
  cfg.first_id = o.first_id;
  if (o.test_n > 0 && o.test_out.empty()) throw ParameterError("--test-n needs --test-out");
  const auto cohort = phantom::generate_cohort(cfg);

  std::vector<SegSequence> all;
  std::vector<io::TruthRow> truth;
  for (const auto& s : cohort.subjects) {
    all.push_back(s.sequence);
    truth.push_back({s.sequence.subject_id, s.truth, s.sequence.label});
  }
  if (o.test_n > 0) {
    const auto split = training::stratified_split(all, o.test_n, o.seed);
    std::vector<SegSequence> train;
    std::vector<SegSequence> test;
    for (auto i : split.train) train.push_back(all[i]);
    for (auto i : split.test) test.push_back(all[i]);
    io::write_csq1(fs::path(o.out), train);
    io::write_csq1(fs::path(o.test_out), test);
    ctx.out << "wrote " << train.size() << " training and " << test.size() << " test subjects\n";
  } else {
    io::write_csq1(fs::path(o.out), all);
    ctx.out << "wrote " << all.size() << " subjects\n";
  }
  if (!o.truth.empty()) io::write_truth_csv(fs::path(o.truth), truth);
  return kExitOk;
}

int cmd_biomarkers(const std::string& in, const std::string& out, const SmoothingOptions& sm, Context& ctx) {
  const auto data = load(in);
  const auto config = sm.config();
  std::string csv = "subject_id,ef,per,pfr,pafr,lvt,qc_pass\n";
  std::size_t unmeasurable = 0;
  for (const auto& s : data.subjects) {
    const auto m = try_measure(s, config);
    csv += std::to_string(s.subject_id);
    if (m) {
      for (double v : {m->ef, m->per, m->pfr, m->pafr, m->lvt}) csv += ',' + io::format_double(v);
      csv += m->qc_pass ? ",1\n" : ",0\n";
    } else {
      ++unmeasurable;
      csv += ",nan,nan,nan,nan,nan,0\n";
    }
  }
  io::write_text_file(fs::path(out), csv);
  ctx.out << "measured " << data.subjects.size() - unmeasurable << " of " << data.subjects.size() << " subjects\n";
  return kExitOk;
}

int cmd_qc(const std::string& in, const std::string& out, Context& ctx) {
  const auto data = load(in);
  const auto kept = qc_passing(data.subjects);
  const std::size_t dropped = data.subjects.size() - kept.size();
  ctx.out << "kept " << kept.size() << " dropped " << dropped << '\n';
  if (kept.empty()) {
    ctx.err << "error: every subject failed quality control; nothing written\n";
    return kExitData;
  }
  io::write_csq1(fs::path(out), kept);
  return kExitOk;
}

int cmd_train(const TrainOptions& o, Context& ctx) {
  const auto data = load(o.in);
  auto arch = model::Architecture::desk_default(data.shape, static_cast<std::size_t>(data.frames));
  arch.latent_dim = o.latent_dim;
  std::vector<training::LogRow> log;
  const auto m = training::train_two_stage(data.subjects, arch, o.config, &log);
  io::write_cmdl(fs::path(o.out), m);
  if (!o.log.empty()) io::write_text_file(fs::path(o.log), training::format_log(log));
  if (!log.empty()) ctx.out << "final total loss " << io::format_double(log.back().total, 6) << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& in, const std::string& out, Context& ctx) {
  const auto m = io::read_cmdl(fs::path(model_path));
  const auto data = load(in);
  check_model_fits(m, data);
  const auto e = evaluate(m, data.subjects);
  const auto text = format_metrics(e);
  if (!out.empty()) io::write_text_file(fs::path(out), text);
  ctx.out << text;
  return kExitOk;
}

std::vector<cav::ConceptVector> fit_concepts(const model::Model& m, const io::Dataset& pool_data,
                                             const ConceptOptions& o, const SmoothingOptions& sm) {
  const auto config = sm.config();
  const auto layer = cav::parse_layer(o.layer);
  std::vector<cav::PoolEntry> pool;
  std::map<std::uint32_t, const SegSequence*> by_id;
  for (const auto& s : pool_data.subjects) {
    const auto b = try_measure(s, config);
    if (!b || !b->qc_pass) continue;
    pool.push_back({s.subject_id, *b});
    by_id[s.subject_id] = &s;
  }
  auto activations = [&](const std::vector<std::uint32_t>& ids) {
    std::vector<Eigen::VectorXd> z;
    for (auto id : ids) z.push_back(cav::record_activation(m, *by_id.at(id), layer).z);
    return z;
  };
  std::vector<cav::ConceptVector> out;
  for (const auto& name : concept_names(o.concepts)) {
    const auto spec = cav::ConceptSpec::named(name, o.k);
    const auto sets = cav::select_concept_sets(pool, spec);
    auto cv = cav::train_cav(activations(sets.positives), activations(sets.negatives), {o.l2});
    cv.name = name;
    cv.layer = layer;
    out.push_back(std::move(cv));
  }
  return out;
}

int cmd_cav_train(const std::string& model_path, const std::string& in, const std::string& out,
                  const ConceptOptions& o, const SmoothingOptions& sm, Context& ctx) {
  const auto m = io::read_cmdl(fs::path(model_path));
  const auto pool = load(in);
  check_model_fits(m, pool);
  const auto cavs = fit_concepts(m, pool, o, sm);
  cav::write_cavs(fs::path(out), cavs);
  for (const auto& cv : cavs) ctx.out << cv.name << " held-out accuracy " << io::format_double(cv.accuracy, 4) << '\n';
  return kExitOk;
}

int cmd_cav_score(const std::string& model_path, const std::string& in, const std::string& cav_path,
                  const std::string& out_dir, Context& ctx) {
  const auto m = io::read_cmdl(fs::path(model_path));
  const auto data = load(in);
  check_model_fits(m, data);
  const auto cavs = cav::read_cavs(fs::path(cav_path));
  const auto scored = qc_passing(data.subjects);
  fs::create_directories(fs::path(out_dir));
  for (const auto& cv : cavs) {
    const auto report = cav::aggregate_sensitivity(m, scored, cv);
    io::write_text_file(fs::path(out_dir) / ("sensitivity_" + cv.name + ".csv"), cav::format_report(report));
    ctx.out << cv.name << " fraction_positive " << io::format_double(report.fraction_positive, 4) << " mean "
            << io::format_double(report.mean, 4) << '\n';
  }
  return kExitOk;
}

struct InterpOptions {
  std::string model;
  std::string in;
  std::string pool;
  std::string out;
  std::string concept_name = "disease";
  std::string alphas = "-2,-1,0,1,2";
  std::int64_t subject = -1;
  std::size_t k = 100;
};

int cmd_interp(const InterpOptions& o, const SmoothingOptions& sm, Context& ctx) {
  const auto m = io::read_cmdl(fs::path(o.model));
  const auto data = load(o.in);
  const auto pool = load(o.pool);
  check_model_fits(m, data);
  check_model_fits(m, pool);
  if (data.subjects.empty()) throw DataError("input dataset is empty");

  std::vector<SegSequence> pos;
  std::vector<SegSequence> neg;
  if (o.concept_name == "disease") {
    for (const auto& s : pool.subjects) {
      if (s.label == DiseaseLabel::diseased) pos.push_back(s);
      if (s.label == DiseaseLabel::healthy) neg.push_back(s);
    }
  } else {
    const auto spec = cav::ConceptSpec::named(o.concept_name, o.k);
    std::vector<cav::PoolEntry> entries;
    std::map<std::uint32_t, const SegSequence*> by_id;
    const auto config = sm.config();
    for (const auto& s : pool.subjects) {
      const auto b = try_measure(s, config);
      if (!b || !b->qc_pass) continue;
      entries.push_back({s.subject_id, *b});
      by_id[s.subject_id] = &s;
    }
    const auto sets = cav::select_concept_sets(entries, spec);
    for (auto id : sets.positives) pos.push_back(*by_id.at(id));
    for (auto id : sets.negatives) neg.push_back(*by_id.at(id));
  }
  if (pos.empty() || neg.empty()) throw DataError("concept pool lacks positive or negative subjects");
  const auto dir = interp::latent_concept_direction(m, pos, neg, o.concept_name);

  const SegSequence* subject = &data.subjects.front();
  if (o.subject >= 0) {
    const auto it = std::find_if(data.subjects.begin(), data.subjects.end(),
                                 [&](const SegSequence& s) { return s.subject_id == o.subject; });
    if (it == data.subjects.end()) throw DataError("subject " + std::to_string(o.subject) + " not in dataset");
    subject = &*it;
  }
  const auto alphas = parse_alphas(o.alphas);
  const auto result = interp::interpolate_decode(m, *subject, dir.direction, alphas);
  interp::write_interpolation(fs::path(o.out), result);
  for (const auto& step : result.steps) {
    ctx.out << "alpha " << io::format_double(step.alpha) << " logit " << io::format_double(step.logit, 6) << '\n';
  }
  return kExitOk;
}

int cmd_pca(const std::string& model_path, const std::string& in, const std::string& out, const std::string& svg,
            Context& ctx) {
  const auto m = io::read_cmdl(fs::path(model_path));
  const auto data = load(in);
  check_model_fits(m, data);
  const auto rows = pca_rows(m, data.subjects);
  io::write_text_file(fs::path(out), interp::format_pca_csv(rows));
  if (!svg.empty()) io::write_text_file(fs::path(svg), interp::format_pca_svg(rows));
  ctx.out << "projected " << rows.size() << " subjects\n";
  return kExitOk;
}

int cmd_report(const std::string& model_path, const std::string& in, const std::string& cav_path,
               const std::string& out_dir, const std::vector<std::pair<std::string, std::string>>& config_echo,
               Context& ctx) {
  const auto m = io::read_cmdl(fs::path(model_path));
  const auto data = load(in);
  check_model_fits(m, data);
  const auto cavs = cav::read_cavs(fs::path(cav_path));
  const fs::path dir(out_dir);
  fs::create_directories(dir);

  const auto scored = qc_passing(data.subjects);
  std::string table = "concept,description,fraction_positive,mean\n";
  for (const auto& cv : cavs) {
    const auto r = cav::aggregate_sensitivity(m, scored, cv);
    table += cv.name + ',' + describe(cv.name) + ',' + io::format_double(r.fraction_positive) + ',' +
             io::format_double(r.mean) + '\n';
  }
  const auto rows = pca_rows(m, data.subjects);
  const std::vector<std::pair<std::string, std::string>> files{
      {"table1.csv", table},
      {"metrics.csv", format_metrics(evaluate(m, data.subjects))},
      {"pca.csv", interp::format_pca_csv(rows)},
      {"pca.svg", interp::format_pca_svg(rows)},
  };
  for (const auto& [name, text] : files) io::write_text_file(dir / name, text);

  std::string manifest = "kind,name,value\n";
  manifest += std::string("tool,cinexai,") + kVersion + '\n';
  for (const auto& [key, value] : config_echo) manifest += "config," + key + ',' + value + '\n';
  for (const auto& path : {model_path, in, cav_path}) manifest += "input," + path + ',' + io::sha256_file(path) + '\n';
  for (const auto& [name, text] : files) manifest += "output," + name + ',' + io::sha256_hex(text) + '\n';
  io::write_text_file(dir / "manifest.csv", manifest);
  ctx.out << "report written to " << dir.string() << '\n';
  return kExitOk;
}

void add_smoothing(CLI::App* app, SmoothingOptions& sm) {
  app->add_option("--window", sm.window, "Savitzky-Golay window (odd; default derived from T)");
  app->add_option("--order", sm.order, "Savitzky-Golay polynomial order");
}

// Config-file keys become `--key=value` arguments unless the flag is already
// on the command line, so explicit flags win and unknown keys are rejected by
// the parser like any unknown flag.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path) return rest;
  std::string text;
  try {
    text = io::read_text_file(fs::path(*path));
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  std::map<std::string, std::string> entries;
  try {
    entries = io::parse_key_value(text);
  } catch (const ParameterError& e) {
    throw UsageError(std::string("config file: ") + e.what());
  }
  std::set<std::string> given;
  for (const auto& a : rest) {
    if (a.rfind("--", 0) != 0) continue;
    given.insert(a.substr(0, a.find('=')));
  }
  for (const auto& [raw_key, value] : entries) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string flag = "--" + key;
    if (!given.count(flag)) rest.push_back(flag + "=" + value);
  }
  return rest;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err};
  std::vector<std::string> args;
  try {
    args = merge_config(raw_args);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  CLI::App app{"Interpretable classification of cardiac segmentation sequences", "cinexai"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic phantom cohort (CSQ1)");
  gen_cmd->add_option("--n", gen.n, "Number of subjects")->required();
  gen_cmd->add_option("--prevalence", gen.prevalence, "Fraction of diseased subjects")->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--seed", gen.seed, "Master seed");
  gen_cmd->add_option("--frames", gen.frames, "Frames per cycle");
  gen_cmd->add_option("--width", gen.width, "Frame width in pixels");
  gen_cmd->add_option("--height", gen.height, "Frame height in pixels");
  gen_cmd->add_option("--slices", gen.slices, "Slices per frame");
  gen_cmd->add_flag("--full-size", gen.full_size, "80x80x3 frames, 50 per cycle");
  gen_cmd->add_option("--first-id", gen.first_id, "Id of the first subject");
  gen_cmd->add_option("--threads", gen.threads, "Rendering threads (0 = hardware)");
  gen_cmd->add_option("--out", gen.out, "Output CSQ1 file")->required();
  gen_cmd->add_option("--truth", gen.truth, "Ground-truth biomarker CSV");
  gen_cmd->add_option("--test-n", gen.test_n, "Hold out this many subjects (stratified)");
  gen_cmd->add_option("--test-out", gen.test_out, "CSQ1 file for the held-out subjects");

  std::string bio_in, bio_out;
  SmoothingOptions bio_sm;
  auto* bio_cmd = app.add_subcommand("biomarkers", "Measure clinical biomarkers of every subject");
  bio_cmd->add_option("--in", bio_in, "Input CSQ1 file")->required();
  bio_cmd->add_option("--out", bio_out, "Output CSV")->required();
  add_smoothing(bio_cmd, bio_sm);

  std::string qc_in, qc_out;
  auto* qc_cmd = app.add_subcommand("qc", "Drop subjects failing the volume-closure check");
  qc_cmd->add_option("--in", qc_in, "Input CSQ1 file")->required();
  qc_cmd->add_option("--out", qc_out, "Output CSQ1 file")->required();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train the VAE and classifier in two stages");
  train_cmd->add_option("--in", train.in, "Training CSQ1 file")->required();
  train_cmd->add_option("--out", train.out, "Output CMDL model")->required();
  train_cmd->add_option("--log", train.log, "Training log CSV");
  train_cmd->add_option("--beta", train.config.beta, "KL weight");
  train_cmd->add_option("--lr1", train.config.lr_stage1, "Stage-1 learning rate");
  train_cmd->add_option("--lr2", train.config.lr_stage2, "Stage-2 learning rate");
  train_cmd->add_option("--epochs1", train.config.epochs_stage1, "Stage-1 epochs");
  train_cmd->add_option("--epochs2", train.config.epochs_stage2, "Stage-2 epochs");
  train_cmd->add_option("--batch", train.config.batch_size, "Batch size");
  train_cmd->add_option("--max-shift", train.config.max_shift, "Augmentation shift in pixels");
  train_cmd->add_option("--latent-dim", train.latent_dim, "Latent dimension per frame");
  train_cmd->add_option("--seed", train.config.seed, "Master seed");

  std::string eval_model, eval_in, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "AUC and reconstruction Dice on a labeled set");
  eval_cmd->add_option("--model", eval_model, "CMDL model")->required();
  eval_cmd->add_option("--in", eval_in, "CSQ1 file")->required();
  eval_cmd->add_option("--out", eval_out, "Metrics CSV");

  std::string ct_model, ct_in, ct_out;
  ConceptOptions ct;
  SmoothingOptions ct_sm;
  auto* ct_cmd = app.add_subcommand("cav-train", "Fit concept activation vectors on a held-out pool");
  ct_cmd->add_option("--model", ct_model, "CMDL model")->required();
  ct_cmd->add_option("--in", ct_in, "Concept pool CSQ1 file")->required();
  ct_cmd->add_option("--out", ct_out, "Output CAV CSV")->required();
  ct_cmd->add_option("--concepts", ct.concepts, "Comma-separated concept names");
  ct_cmd->add_option("--k", ct.k, "Subjects per concept side");
  ct_cmd->add_option("--layer", ct.layer, "Activation layer: cav, latent, latent_mean");
  ct_cmd->add_option("--l2", ct.l2, "L2 penalty of the linear probe");
  add_smoothing(ct_cmd, ct_sm);

  std::string cs_model, cs_in, cs_cavs, cs_out;
  auto* cs_cmd = app.add_subcommand("cav-score", "Classifier sensitivity to each concept");
  cs_cmd->add_option("--model", cs_model, "CMDL model")->required();
  cs_cmd->add_option("--in", cs_in, "Test CSQ1 file")->required();
  cs_cmd->add_option("--cavs", cs_cavs, "CAV CSV")->required();
  cs_cmd->add_option("--out", cs_out, "Output directory")->required();

  InterpOptions ip;
  SmoothingOptions ip_sm;
  auto* ip_cmd = app.add_subcommand("interp", "Decode latent walks along a concept direction");
  ip_cmd->add_option("--model", ip.model, "CMDL model")->required();
  ip_cmd->add_option("--in", ip.in, "CSQ1 file with the probe subject")->required();
  ip_cmd->add_option("--pool", ip.pool, "Concept pool CSQ1 file")->required();
  ip_cmd->add_option("--out", ip.out, "Output directory")->required();
  ip_cmd->add_option("--concept", ip.concept_name, "Concept name, or 'disease' for the class labels");
  ip_cmd->add_option("--alphas", ip.alphas, "Comma-separated step sizes");
  ip_cmd->add_option("--subject", ip.subject, "Probe subject id (default: first)");
  ip_cmd->add_option("--k", ip.k, "Subjects per concept side");
  add_smoothing(ip_cmd, ip_sm);

  std::string pca_model, pca_in, pca_out, pca_svg;
  auto* pca_cmd = app.add_subcommand("pca", "Project time-averaged latents with gradient arrows");
  pca_cmd->add_option("--model", pca_model, "CMDL model")->required();
  pca_cmd->add_option("--in", pca_in, "CSQ1 file")->required();
  pca_cmd->add_option("--out", pca_out, "Output CSV")->required();
  pca_cmd->add_option("--svg", pca_svg, "Optional SVG scatter");

  std::string rp_model, rp_in, rp_cavs, rp_out;
  auto* rp_cmd = app.add_subcommand("report", "Sensitivity table, metrics, PCA scatter and manifest");
  rp_cmd->add_option("--model", rp_model, "CMDL model")->required()->check(CLI::ExistingFile);
  rp_cmd->add_option("--in", rp_in, "Test CSQ1 file")->required()->check(CLI::ExistingFile);
  rp_cmd->add_option("--cavs", rp_cavs, "CAV CSV")->required()->check(CLI::ExistingFile);
  rp_cmd->add_option("--out", rp_out, "Output directory")->required();

  std::vector<std::string> argv_storage{"cinexai"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, ctx);
    if (*bio_cmd) return cmd_biomarkers(bio_in, bio_out, bio_sm, ctx);
    if (*qc_cmd) return cmd_qc(qc_in, qc_out, ctx);
    if (*train_cmd) return cmd_train(train, ctx);
    if (*eval_cmd) return cmd_eval(eval_model, eval_in, eval_out, ctx);
    if (*ct_cmd) return cmd_cav_train(ct_model, ct_in, ct_out, ct, ct_sm, ctx);
    if (*cs_cmd) return cmd_cav_score(cs_model, cs_in, cs_cavs, cs_out, ctx);
    if (*ip_cmd) return cmd_interp(ip, ip_sm, ctx);
    if (*pca_cmd) return cmd_pca(pca_model, pca_in, pca_out, pca_svg, ctx);
    if (*rp_cmd) {
      std::vector<std::pair<std::string, std::string>> echo;
      for (const auto* opt : rp_cmd->get_options()) {
        if (opt->count() == 0 || opt->get_single_name() == "help") continue;
        echo.emplace_back(opt->get_single_name(), opt->as<std::string>());
      }
      return cmd_report(rp_model, rp_in, rp_cavs, rp_out, echo, ctx);
    }
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

int parse_and_dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace cinexai::cli
