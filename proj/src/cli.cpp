#include "priornet/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "priornet/config.hpp"
#include "priornet/errors.hpp"
#include "priornet/evaluation.hpp"
#include "priornet/gradcheck.hpp"
#include "priornet/io.hpp"

namespace priornet {

std::filesystem::path make_run_directory(const std::filesystem::path& root, const std::string& command) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm local{};
  localtime_r(&now, &local);
  std::ostringstream stamp;
  stamp << std::put_time(&local, "%Y%m%d-%H%M%S") << "-" << command;
  std::filesystem::create_directories(root);
  std::filesystem::path dir = root / stamp.str();
  for (int n = 2; !std::filesystem::create_directory(dir); ++n) dir = root / (stamp.str() + "-" + std::to_string(n));
  return dir;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

Checkpoint checkpoint_for(const RunConfig& cfg, const std::string& flag) {
  std::filesystem::path path = flag;
  if (path.empty()) {
    if (cfg.train.checkpoint.empty()) throw ConfigError("no checkpoint given (use --checkpoint or [train] checkpoint)");
    path = cfg.train.checkpoint;
    if (path.is_relative()) path = cfg.base_dir / path;
  }
  return load_checkpoint(path, &cfg.network);
}

struct Options {
  std::string config, out_dir, checkpoint, target, templ, template_labels, output, resume;
  std::string runs_dir = "runs";
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> template_seed;
  int n_templates = 5;
};

int gen_data(const Options& o, std::ostream& out) {
  const RunConfig cfg = parse_config(o.config);
  DatasetManifest m = generate_synthetic_dataset(cfg.synthetic, o.out_dir);
  if (cfg.data.test_count || cfg.data.test_fraction) {
    SplitRequest req;
    req.test_count = cfg.data.test_count;
    if (cfg.data.test_fraction) req.test_fraction = *cfg.data.test_fraction;
    m = split_dataset(m, req, cfg.data.split_seed);
    write_manifest(std::filesystem::path(o.out_dir) / "manifest.txt", m);
  }
  out << "wrote " << m.entries.size() << " volumes (" << m.indices(Split::train).size() << " train, "
      << m.indices(Split::test).size() << " test) to " << (std::filesystem::path(o.out_dir) / "manifest.txt").string()
      << "\n";
  return kExitOk;
}

int train(const Options& o, std::ostream& out) {
  RunConfig cfg = parse_config(o.config);
  const DatasetCache data = load_data(cfg);
  std::optional<Checkpoint> resume;
  if (!o.resume.empty()) resume = load_checkpoint(o.resume, &cfg.network);

  const auto dir = make_run_directory(o.runs_dir, "train");
  write_file(dir / "config.txt", cfg.to_text());
  std::ofstream log(dir / "train.log");
  TrainConfig tc = cfg.train;
  tc.checkpoint = (dir / "checkpoint.ckpt").string();
  TrainOptions opts;
  opts.log = &log;
  if (resume) opts.resume = &*resume;
  opts.on_epoch = [&](const Checkpoint& c) {
    out << "epoch " << c.epoch << "/" << tc.epochs << " mean_loss " << std::setprecision(6) << c.epoch_losses.back()
        << std::endl;
  };
  const auto result = train_loop(data, tc, cfg.network, opts);
  if (!cfg.train.checkpoint.empty()) {
    std::filesystem::path extra = cfg.train.checkpoint;
    if (extra.is_relative()) extra = cfg.base_dir / extra;
    save_checkpoint(extra, result.checkpoint);
    out << "checkpoint " << extra.string() << "\n";
  }
  out << "run directory " << dir.string() << "\n";
  return kExitOk;
}

int eval(const Options& o, std::ostream& out) {
  const RunConfig cfg = parse_config(o.config);
  const Checkpoint ckpt = checkpoint_for(cfg, o.checkpoint);
  const DatasetCache data = load_data(cfg);
  const auto report = evaluate_dataset(data, ckpt, o.template_seed.value_or(cfg.eval.template_seed));
  const auto dir = make_run_directory(o.runs_dir, "eval");
  write_file(dir / "config.txt", cfg.to_text());
  write_file(dir / "eval.txt", report.table());
  write_file(dir / "eval.json", report.json());
  out << "template " << data.manifest().entries[report.template_entry].image << "\n" << report.table();
  out << "run directory " << dir.string() << "\n";
  return kExitOk;
}

int predict(const Options& o, std::ostream& out) {
  const RunConfig cfg = parse_config(o.config);
  const Checkpoint ckpt = checkpoint_for(cfg, o.checkpoint);
  const Preprocessing prep = cfg.data.preprocessing();
  const Volume target = prep.apply(read_volume(o.target));
  TemplateBundle bundle;
  if (ckpt.network.uses_template()) {
    if (o.templ.empty() || o.template_labels.empty())
      throw ConfigError("the " + to_string(ckpt.network.variant) + " variant needs --template and --template-labels");
    bundle = extract_foreground_regions(prep.apply(read_volume(o.templ)),
                                        prep.apply(read_labelmap(o.template_labels, ckpt.network.num_classes)));
  }
  const LabelMap pred = predict_segmentation(target, bundle, ckpt);
  write_labelmap(o.output, pred);
  out << "wrote " << o.output << "\n";
  return kExitOk;
}

int ablate(const Options& o, std::ostream& out) {
  const RunConfig cfg = parse_config(o.config);
  const DatasetCache data = load_data(cfg);
  const auto dir = make_run_directory(o.runs_dir, "ablate");
  write_file(dir / "config.txt", cfg.to_text());
  std::ofstream log(dir / "train.log");
  AblationOptions opts;
  opts.template_seed = cfg.eval.template_seed;
  opts.log = &log;
  opts.on_run = [&](Variant v, std::uint64_t seed, const EvaluationReport& r, const Checkpoint& c) {
    out << to_string(v) << " seed " << seed << " mean_dice " << std::fixed << std::setprecision(4)
        << r.aggregate.mean_foreground_dice << std::defaultfloat << std::endl;
    save_checkpoint(dir / (to_string(v) + "-seed" + std::to_string(seed) + ".ckpt"), c);
  };
  const auto report = ablation_study(data, cfg.train, cfg.network, cfg.eval.ablation_seeds, opts);
  write_file(dir / "ablation.txt", report.table());
  write_file(dir / "ablation.json", report.json());
  out << report.table() << "run directory " << dir.string() << "\n";
  return kExitOk;
}

int gradcheck(const Options& o, std::ostream& out) {
  const auto suite = run_gradchecks(o.seed);
  auto line = [&](const char* name, const GradcheckResult& r) {
    out << std::left << std::setw(10) << name << "max_relative_error " << std::scientific << std::setprecision(3)
        << r.max_relative_error << std::defaultfloat << " over " << r.coordinates_checked << " coordinates\n";
  };
  line("csam", suite.csam);
  line("dice", suite.dice);
  line("network", suite.network);
  const bool ok = suite.passed();
  out << (ok ? "PASS" : "FAIL") << " (tolerance " << kGradcheckTolerance << ")\n";
  return ok ? kExitOk : kExitFailure;
}

int robustness(const Options& o, std::ostream& out) {
  const RunConfig cfg = parse_config(o.config);
  const Checkpoint ckpt = checkpoint_for(cfg, o.checkpoint);
  const DatasetCache data = load_data(cfg);
  const auto report = template_robustness_study(data, ckpt, o.n_templates, cfg.eval.robustness_seed);
  const auto dir = make_run_directory(o.runs_dir, "robustness");
  write_file(dir / "config.txt", cfg.to_text());
  write_file(dir / "robustness.txt", report.table());
  write_file(dir / "robustness.json", report.json());
  out << report.table() << "run directory " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Template-guided segmentation with cosine-similarity attention", "priornet"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset from a spec file");
  gen->add_option("spec", o.config, "Spec file ([synthetic] and optional [data] split keys)")->required();
  gen->add_option("out_dir", o.out_dir, "Output directory")->required();

  auto runs = [&o](CLI::App* sub) { sub->add_option("--runs-dir", o.runs_dir, "Root for per-run directories"); };

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("config", o.config)->required();
  tr->add_option("--resume", o.resume, "Continue from a checkpoint");
  runs(tr);

  auto* ev = app.add_subcommand("eval", "Evaluate on the test split");
  ev->add_option("config", o.config)->required();
  ev->add_option("--checkpoint", o.checkpoint, "Defaults to [train] checkpoint");
  ev->add_option("--template-seed", o.template_seed);
  runs(ev);

  auto* pr = app.add_subcommand("predict", "Segment one volume");
  pr->add_option("config", o.config)->required();
  pr->add_option("--target", o.target)->required();
  pr->add_option("--template", o.templ, "Template image");
  pr->add_option("--template-labels", o.template_labels, "Template label map");
  pr->add_option("--out", o.output)->required();
  pr->add_option("--checkpoint", o.checkpoint, "Defaults to [train] checkpoint");

  auto* ab = app.add_subcommand("ablate", "Train and compare the four variants");
  ab->add_option("config", o.config)->required();
  runs(ab);

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc->add_option("--seed", o.seed);

  auto* rb = app.add_subcommand("robustness", "Evaluate with several templates");
  rb->add_option("config", o.config)->required();
  rb->add_option("--n-templates", o.n_templates)->required()->check(CLI::PositiveNumber);
  rb->add_option("--checkpoint", o.checkpoint, "Defaults to [train] checkpoint");
  runs(rb);

  if (!args.empty() && !args[0].starts_with("-") && !app.get_subcommand_no_throw(args[0])) {
    err << "usage error: unknown subcommand '" << args[0] << "' (see --help)\n";
    return kExitUsage;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << " (see --help)\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return gen_data(o, out);
    if (tr->parsed()) return train(o, out);
    if (ev->parsed()) return eval(o, out);
    if (pr->parsed()) return predict(o, out);
    if (ab->parsed()) return ablate(o, out);
    if (gc->parsed()) return gradcheck(o, out);
    if (rb->parsed()) return robustness(o, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << "\n";
    return kExitFailure;
  }
  err << "usage error: no subcommand (see --help)\n";
  return kExitUsage;
}

}  // namespace priornet
