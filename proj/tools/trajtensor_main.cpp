#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "trajtensor/config.hpp"
#include "trajtensor/datagen.hpp"
#include "trajtensor/errors.hpp"
#include "trajtensor/harness.hpp"
#include "trajtensor/kernels.hpp"

namespace fs = std::filesystem;
using namespace trajtensor;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string model;
  std::string task;
  int64_t seed = -1;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* opt = cmd->add_option("--config", args.config_path, "run configuration file");
  if (config_required) opt->required();
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--out", args.out_dir, "override the output directory");
  cmd->add_option("--model", args.model, "override the model family");
  cmd->add_option("--task", args.task, "override the task (which|when|where)");
  cmd->add_option("--threads", args.threads, "kernel thread cap (1 = serial)");
}

Config load_config(const CommonArgs& args) {
  Config cfg = args.config_path.empty() ? Config() : Config::parse_file(args.config_path);
  if (args.seed >= 0) cfg.set_int("run", "seed", args.seed);
  if (!args.out_dir.empty()) cfg.set("run", "out", args.out_dir);
  if (!args.model.empty()) cfg.set("run", "model", args.model);
  if (!args.task.empty()) cfg.set("run", "task", args.task);
  if (args.threads >= 0) cfg.set_int("run", "threads", args.threads);
  return cfg;
}

harness::RunConfig run_config(const Config& cfg) {
  harness::RunConfig rc = harness::RunConfig::from_config(cfg);
  rc.validate();
  kernels::set_max_threads(rc.threads);
  return rc;
}

datagen::Dataset load_run_dataset(const harness::RunConfig& rc) {
  if (rc.dataset_dir.empty()) throw ConfigError("config is missing [run] dataset = <dir>");
  return datagen::load_dataset(rc.dataset_dir);
}

std::string run_stem(const harness::RunConfig& rc) { return rc.to_config().hash_hex8(); }

int cmd_datagen(const CommonArgs& args) {
  Config file_cfg = args.config_path.empty() ? Config() : Config::parse_file(args.config_path);
  datagen::ScenarioConfig sc = datagen::scenario_from_config(file_cfg);
  if (args.seed >= 0) sc.seed = uint64_t(args.seed);
  std::string out = args.out_dir.empty() ? file_cfg.get_string("scenario", "out", "") : args.out_dir;
  if (out.empty()) throw ConfigError("datagen needs --out <dir>");

  datagen::Dataset ds = datagen::generate(sc, sc.seed);
  ds.meta.config_echo = datagen::scenario_to_config(sc).flat();
  datagen::save_dataset(out, ds);
  std::cout << "wrote " << ds.samples.size() << " samples (" << ds.meta.cameras << " cameras, "
            << ds.meta.days << " days) to " << out << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args) {
  Config cfg = load_config(args);
  harness::RunConfig rc = run_config(cfg);
  if (rc.is_baseline()) throw ConfigError("train applies to learned models; baselines need no training");
  datagen::Dataset ds = load_run_dataset(rc);
  auto plan = harness::FoldPlan::build(ds.meta.days, rc.folds, rc.seed);
  std::vector<size_t> train_idx;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (!plan.in_test(size_t(rc.fold_index), ds.samples[i].day)) train_idx.push_back(i);

  harness::TrainedFold trained = harness::train_fold(ds, rc, train_idx, rc.fold_index);
  std::string stem = run_stem(rc);
  trained.save(rc.out_dir, stem, rc.fold_index);

  std::ofstream log(fs::path(rc.out_dir) /
                    ("trainlog-" + stem + "-fold" + std::to_string(rc.fold_index) + ".txt"));
  for (const auto& note : trained.log.notes) log << "# " << note << "\n";
  char buf[80];
  for (size_t e = 0; e < trained.log.train_bce.size(); ++e) {
    std::snprintf(buf, sizeof buf, "epoch %zu bce %.10g val_ap %.10g\n", e,
                  trained.log.train_bce[e],
                  e < trained.log.val_ap.size() ? trained.log.val_ap[e] : 0.0);
    log << buf;
  }
  std::cout << "trained fold " << rc.fold_index << ", weights under " << rc.out_dir << " (stem "
            << stem << ")\n";
  return 0;
}

int cmd_evaluate(const CommonArgs& args) {
  Config cfg = load_config(args);
  harness::RunConfig rc = run_config(cfg);
  datagen::Dataset ds = load_run_dataset(rc);
  auto plan = harness::FoldPlan::build(ds.meta.days, rc.folds, rc.seed);
  std::vector<size_t> train_idx, test_idx;
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    if (plan.in_test(size_t(rc.fold_index), ds.samples[i].day))
      test_idx.push_back(i);
    else
      train_idx.push_back(i);
  }

  metrics::MetricsReport report;
  report.task = rc.task;
  std::string stem = run_stem(rc);
  if (rc.is_baseline()) {
    std::vector<std::shared_ptr<void>> keep_alive;
    auto predict = harness::make_baseline_predictor(ds, rc, train_idx, keep_alive);
    report.folds.push_back(harness::evaluate_fold(ds, rc, test_idx, predict, rc.fold_index));
  } else {
    harness::TrainedFold trained =
        harness::TrainedFold::load(ds, rc, rc.out_dir, stem, rc.fold_index);
    report.folds.push_back(harness::evaluate_fold(
        ds, rc, test_idx,
        [&](const datagen::MctfSample& s) { return trained.predict(s, ds); }, rc.fold_index));
  }
  harness::write_reports(rc.out_dir, stem + "-fold" + std::to_string(rc.fold_index), report,
                         rc.to_config());
  metrics::write_report_text(std::cout, report, {});
  return 0;
}

int cmd_crossval(const CommonArgs& args) {
  Config cfg = load_config(args);
  harness::RunConfig rc = run_config(cfg);
  datagen::Dataset ds = load_run_dataset(rc);
  auto result = harness::cross_validate(ds, rc, /*keep_models=*/!rc.is_baseline());
  std::string stem = run_stem(rc);
  for (size_t f = 0; f < result.fold_models.size(); ++f)
    result.fold_models[f].save(rc.out_dir, stem, int(f));
  harness::write_reports(rc.out_dir, stem, result.report, rc.to_config());
  metrics::write_report_text(std::cout, result.report, {});
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  Config cfg = load_config(args);
  harness::RunConfig rc = run_config(cfg);
  datagen::Dataset ds = load_run_dataset(rc);

  std::vector<std::pair<size_t, size_t>> sizes;
  {
    std::string text = cfg.get_string("sweep", "sizes", "16x9,32x18,48x27");
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto x = item.find('x');
      if (x == std::string::npos) throw ConfigError("sweep size needs WxH: " + item);
      sizes.emplace_back(std::stoul(item.substr(0, x)), std::stoul(item.substr(x + 1)));
    }
  }
  std::vector<double> sigmas;
  {
    std::string text = cfg.get_string("sweep", "sigmas", "0,1,2,3,4");
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) sigmas.push_back(std::stod(item));
  }

  auto rows = harness::sweep(ds, rc, sizes, sigmas);
  std::string stem = run_stem(rc);
  harness::write_sweep_csv(rc.out_dir, stem, rows);
  std::cout << "sweep of " << rows.size() << " cells written under " << rc.out_dir << " (stem "
            << stem << ")\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  Config cfg = load_config(args);
  harness::RunConfig rc = run_config(cfg);
  datagen::Dataset ds = load_run_dataset(rc);
  auto trained = harness::cross_validate(ds, rc, /*keep_models=*/true);
  auto ablation = harness::ablate_single_view(ds, rc, trained);
  std::string stem = run_stem(rc);
  harness::write_reports(rc.out_dir, stem + "-multiview", ablation.multi_view, rc.to_config());
  harness::write_reports(rc.out_dir, stem + "-singleview", ablation.single_view, rc.to_config());
  std::cout << "multi-view:\n";
  metrics::write_report_text(std::cout, ablation.multi_view, {});
  std::cout << "single-view:\n";
  metrics::write_report_text(std::cout, ablation.single_view, {});
  return 0;
}

int cmd_predict_mt(const CommonArgs& args) {
  Config cfg = load_config(args);
  harness::RunConfig rc = run_config(cfg);
  if (rc.is_baseline()) throw ConfigError("predict-mt needs a learned model");
  datagen::Dataset ds = load_run_dataset(rc);
  auto plan = harness::FoldPlan::build(ds.meta.days, rc.folds, rc.seed);
  std::vector<size_t> train_idx;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (!plan.in_test(size_t(rc.fold_index), ds.samples[i].day)) train_idx.push_back(i);

  std::string stem = run_stem(rc);
  harness::TrainedFold trained;
  try {
    trained = harness::TrainedFold::load(ds, rc, rc.out_dir, stem, rc.fold_index);
  } catch (const DataError&) {
    trained = harness::train_fold(ds, rc, train_idx, rc.fold_index);
    trained.save(rc.out_dir, stem, rc.fold_index);
  }

  auto groups = datagen::group_multi_target(ds);
  // Keep only groups fully inside this fold's test days.
  std::vector<datagen::MultiTargetGroup> test_groups;
  for (const auto& g : groups)
    if (plan.in_test(size_t(rc.fold_index), g.day)) test_groups.push_back(g);

  fs::create_directories(rc.out_dir);
  std::ofstream manifest(fs::path(rc.out_dir) / ("groups-" + stem + "-fold" +
                                                 std::to_string(rc.fold_index) + ".txt"));
  std::vector<std::string> notes;
  for (size_t gi = 0; gi < test_groups.size(); ++gi) {
    auto pred = harness::predict_multi_target(ds, rc, trained, test_groups[gi], &notes);
    std::string name = "predmt-" + stem + "-fold" + std::to_string(rc.fold_index) + "-g" +
                       std::to_string(gi) + ".tten";
    write_tten_file((fs::path(rc.out_dir) / name).string(), pred.stacked_scores);
    manifest << gi << " day=" << test_groups[gi].day << " bin=" << test_groups[gi].bin
             << " targets=" << test_groups[gi].sample_indices.size() << " file=" << name << "\n";
  }
  for (const auto& note : notes) std::cerr << "note: " << note << "\n";
  std::cout << "predicted " << test_groups.size() << " multi-target groups under " << rc.out_dir
            << "\n";
  return 0;
}

int cmd_report(const CommonArgs& args, const std::string& in_path) {
  std::ifstream in(in_path);
  if (!in) throw DataError("cannot open: " + in_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(std::string("bad report json: ") + e.what());
  }
  metrics::MetricsReport report;
  report.task = metrics::task_from_name(j.at("task").get<std::string>());
  std::string ap_key = std::string("ap_") + metrics::task_name(report.task);
  for (const auto& jf : j.at("folds")) {
    metrics::FoldMetrics fm;
    fm.fold = jf.at("fold").get<int>();
    fm.sample_count = jf.at("samples").get<size_t>();
    if (jf.contains(ap_key) && !jf.at(ap_key).is_null())
      fm.ap = jf.at(ap_key).get<double>();
    else
      fm.ap_skipped = true;
    if (jf.contains("siou_when")) fm.siou_when = jf.at("siou_when").get<double>();
    if (jf.contains("siou_where")) fm.siou_where = jf.at("siou_where").get<double>();
    if (jf.contains("ade_where_px")) fm.ade = jf.at("ade_where_px").get<double>();
    if (jf.contains("fde_where_px")) fm.fde = jf.at("fde_where_px").get<double>();
    report.folds.push_back(std::move(fm));
  }
  std::vector<std::pair<std::string, std::string>> header;
  if (j.contains("config"))
    for (auto& [key, value] : j.at("config").items())
      header.emplace_back(key, value.get<std::string>());

  std::string out_dir = args.out_dir.empty() ? fs::path(in_path).parent_path().string() : args.out_dir;
  if (out_dir.empty()) out_dir = ".";
  fs::create_directories(out_dir);
  std::string stem = fs::path(in_path).stem().string();
  std::ofstream txt(fs::path(out_dir) / (stem + ".txt"));
  metrics::write_report_text(txt, report, header);
  metrics::write_report_text(std::cout, report, header);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-camera trajectory forecasting toolkit"};
  app.require_subcommand(1);

  CommonArgs datagen_args, train_args, eval_args, crossval_args, sweep_args, ablate_args,
      predict_args, report_args;
  std::string report_in;

  auto* c_datagen = app.add_subcommand("datagen", "generate a synthetic dataset");
  add_common(c_datagen, datagen_args, /*config_required=*/false);

  auto* c_train = app.add_subcommand("train", "train one fold of a model");
  add_common(c_train, train_args);

  auto* c_eval = app.add_subcommand("evaluate", "evaluate one fold (model weights or baseline)");
  add_common(c_eval, eval_args);

  auto* c_crossval = app.add_subcommand("crossval", "5-fold day-split cross-validation");
  add_common(c_crossval, crossval_args);

  auto* c_sweep = app.add_subcommand("sweep", "heatmap size x sigma grid of cross-validations");
  add_common(c_sweep, sweep_args);

  auto* c_ablate = app.add_subcommand("ablate", "multi-view vs single-view input ablation");
  add_common(c_ablate, ablate_args);

  auto* c_predict = app.add_subcommand("predict-mt", "batch-stacked multi-target prediction");
  add_common(c_predict, predict_args);

  auto* c_report = app.add_subcommand("report", "re-render a structured report");
  c_report->add_option("--in", report_in, "report-*.json file")->required();
  c_report->add_option("--out", report_args.out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_datagen->parsed()) return cmd_datagen(datagen_args);
    if (c_train->parsed()) return cmd_train(train_args);
    if (c_eval->parsed()) return cmd_evaluate(eval_args);
    if (c_crossval->parsed()) return cmd_crossval(crossval_args);
    if (c_sweep->parsed()) return cmd_sweep(sweep_args);
    if (c_ablate->parsed()) return cmd_ablate(ablate_args);
    if (c_predict->parsed()) return cmd_predict_mt(predict_args);
    if (c_report->parsed()) return cmd_report(report_args, report_in);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
