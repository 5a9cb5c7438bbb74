// ensimpute command-line driver.
//
// Exit status: 0 success, 1 invalid input or configuration, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ensimpute/ensimpute.hpp"

namespace fs = std::filesystem;
using namespace ensimpute;

namespace {

std::string default_output_dir() {
  const char* env = std::getenv("ENSIMPUTE_OUTPUT_DIR");
  return env && *env ? env : "results";
}

/// Re-index test labels to the model's class order. Classes the model never
/// saw get -1 and always count as errors.
std::vector<int> labels_for_model(const Dataset& test, const EnsembleModel& model) {
  std::vector<int> out(test.rows());
  for (std::size_t r = 0; r < test.rows(); ++r) {
    const std::string& name = test.meta.class_names[static_cast<std::size_t>(test.labels[r])];
    const auto it = std::find(model.class_names.begin(), model.class_names.end(), name);
    out[r] = it == model.class_names.end() ? -1 : static_cast<int>(it - model.class_names.begin());
  }
  return out;
}

void check_features(const Dataset& test, const EnsembleModel& model) {
  if (test.cols() != model.n_features)
    throw ValidationError("test data has " + std::to_string(test.cols()) + " features, model expects " +
                          std::to_string(model.n_features));
}

struct RunArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::string datasets, methods, ratios, data_dir, label_column, out;
  std::size_t B = 0, M = 0, T = 0, folds = 0, workers = 0;
  std::uint64_t seed = 0;
  bool seed_given = false, native = false, quiet = false, print_config = false;
};

int cmd_run(RunArgs& a, CLI::App& app) {
  RunConfig c;
  c.output_dir = default_output_dir();
  if (!a.config_file.empty()) load_config_file(c, a.config_file);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
    set_option(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  auto given = [&](const char* name) { return app.count(name) > 0; };
  if (given("--datasets")) set_option(c, "datasets", a.datasets);
  if (given("--methods")) set_option(c, "methods", a.methods);
  if (given("--ratios")) set_option(c, "ratios", a.ratios);
  if (given("--data-dir")) c.data_dir = a.data_dir;
  if (given("--label-column")) c.label_column = a.label_column;
  if (given("--out")) c.output_dir = a.out;
  if (given("--B")) c.B = a.B;
  if (given("--M")) c.M = a.M;
  if (given("--reps")) c.T = a.T;
  if (given("--folds")) c.folds = a.folds;
  if (given("--workers")) c.workers = a.workers;
  if (given("--seed")) c.seed = a.seed;
  if (a.native) c.test_imputation = false;
  validate(c);
  if (a.print_config) {
    write_config(c, std::cout);
    return 0;
  }

  ExperimentGrid g = make_grid(c);
  int failures = 0;
  for (const auto& entry : c.datasets) {
    const std::string path = resolve_dataset(c, entry);
    try {
      Dataset d = load_csv(path, c.label_column);
      if (!d.complete())
        throw ValidationError(path + ": dataset already has missing cells; the experiment injects its own");
      g.datasets.push_back(std::move(d));
    } catch (const std::exception& e) {
      std::cerr << "skipping dataset '" << entry << "': " << e.what() << '\n';
      ++failures;
    }
  }
  if (g.datasets.empty()) throw std::runtime_error("no dataset could be loaded");

  ProgressFn progress;
  if (!a.quiet)
    progress = [](std::size_t done, std::size_t total) {
      if (done == total || done % 50 == 0) std::cerr << "\r" << done << "/" << total << " cells" << std::flush;
      if (done == total) std::cerr << '\n';
    };
  const auto res = run_experiment(g, progress);
  export_results(res, c.output_dir);
  std::size_t failed_cells = 0;
  for (const auto& r : res.runs)
    if (!r.error.empty()) {
      if (failed_cells++ < 5)
        std::cerr << "cell failed: " << r.dataset << ' ' << to_string(r.method) << " ratio " << r.ratio << " rep "
                  << r.repetition << " fold " << r.fold << ": " << r.error << '\n';
    }
  std::cout << summary_text(res.runs);
  std::cerr << "results written to " << c.output_dir << '\n';
  return failures > 0 || failed_cells > 0 ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble imputation methods for incomplete classification data"};
  app.require_subcommand(1);

  // run
  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run the repeated cross-validation experiment grid");
  run->add_option("--config", ra.config_file, "key=value configuration file");
  run->add_option("--set", ra.sets, "Override one configuration key (key=value); repeatable");
  run->add_option("--datasets", ra.datasets, "Comma-separated dataset names or CSV paths");
  run->add_option("--methods", ra.methods, "Comma-separated methods (default: all twelve)");
  run->add_option("--ratios", ra.ratios, "Comma-separated missingness ratios (default 0,0.05,...,0.3)");
  run->add_option("--data-dir", ra.data_dir, "Directory searched for <name>.csv (default data)");
  run->add_option("--label-column", ra.label_column, "Class column name or index (default class)");
  run->add_option("--B", ra.B, "Ensemble size (default 25)");
  run->add_option("--M", ra.M, "Imputations per dataset (default 5)");
  run->add_option("--reps", ra.T, "Cross-validation repetitions T (default 30)");
  run->add_option("--folds", ra.folds, "Folds per repetition (default 2)");
  run->add_option("--workers", ra.workers, "Parallel grid cells (default 1); results do not depend on it");
  run->add_option("--seed", ra.seed, "Master seed (default 0)");
  run->add_option("--out", ra.out, "Output directory (default $ENSIMPUTE_OUTPUT_DIR or results)");
  run->add_flag("--native-missing", ra.native, "Skip test-time imputation; trees handle missing cells themselves");
  run->add_flag("--quiet", ra.quiet, "No progress output");
  run->add_flag("--print-config", ra.print_config, "Print the effective configuration and exit");

  // inject
  std::string in_path, out_path, mask_path, label = "class";
  double ratio = 0.1;
  std::uint64_t seed = 0;
  auto* inject = app.add_subcommand("inject", "Remove cells completely at random from a complete CSV");
  inject->add_option("input", in_path, "Complete input CSV")->required();
  inject->add_option("output", out_path, "Output CSV with '?' for removed cells")->required();
  inject->add_option("--ratio", ratio, "Fraction of each attribute to remove, in [0, 0.5]")->capture_default_str();
  inject->add_option("--seed", seed, "Random seed")->capture_default_str();
  inject->add_option("--mask", mask_path, "Also write a 0/1 observation mask");
  inject->add_option("--label-column", label, "Class column name or index")->capture_default_str();

  // impute
  std::string imp_method = "em";
  std::size_t multiple = 1;
  bool average = false;
  ImputeConfig icfg;
  auto* impute = app.add_subcommand("impute", "Impute missing cells of a CSV");
  impute->add_option("input", in_path, "Incomplete input CSV")->required();
  impute->add_option("output", out_path,
                     "Output CSV; with --multiple M and no --average, copies go to <stem>_<i>.csv")
      ->required();
  impute->add_option("--method", imp_method, "mei, grandi or em")->capture_default_str();
  impute->add_option("--multiple", multiple, "Number of imputations M")->capture_default_str();
  impute->add_flag("--average", average, "Average the M imputations into one dataset");
  impute->add_option("--seed", seed, "Random seed")->capture_default_str();
  impute->add_option("--z-bound", icfg.z_bound, "GRandI truncation bound Z")->capture_default_str();
  impute->add_option("--em-tol", icfg.em.tol, "EM convergence tolerance")->capture_default_str();
  impute->add_option("--em-max-iter", icfg.em.max_iter, "EM iteration cap")->capture_default_str();
  impute->add_option("--em-ridge", icfg.em.ridge, "Ridge added before inverting covariance blocks")->capture_default_str();
  impute->add_option("--label-column", label, "Class column name or index")->capture_default_str();

  // train
  std::string method_name = "BagEM", model_path;
  EnsembleConfig ecfg;
  bool native = false, dump = false;
  auto* train = app.add_subcommand("train", "Train one method on a CSV and save the model");
  train->add_option("input", in_path, "Training CSV (may contain '?' cells)")->required();
  train->add_option("--method", method_name, "One of the twelve methods")->capture_default_str();
  train->add_option("--model", model_path, "Model output file (JSON)")->required();
  train->add_option("--B", ecfg.B, "Ensemble size")->capture_default_str();
  train->add_option("--M", ecfg.M, "Imputations")->capture_default_str();
  train->add_option("--seed", ecfg.seed, "Random seed")->capture_default_str();
  train->add_option("--z-bound", ecfg.impute.z_bound, "GRandI truncation bound Z")->capture_default_str();
  train->add_option("--min-leaf-weight", ecfg.tree.min_leaf_weight, "Minimum weight on each side of a split")
      ->capture_default_str();
  train->add_flag("--native-missing", native, "Store no test-time imputation; trees handle missing cells");
  train->add_flag("--dump-tree", dump, "Print the first member's tree to stdout");
  train->add_option("--label-column", label, "Class column name or index")->capture_default_str();

  // predict
  std::string test_path;
  auto* predict_cmd = app.add_subcommand("predict", "Predict a labelled CSV with a saved model");
  predict_cmd->add_option("--model", model_path, "Model file")->required();
  predict_cmd->add_option("--test", test_path, "Test CSV (class column required)")->required();
  predict_cmd->add_option("--output", out_path, "Prediction CSV (default stdout)");
  predict_cmd->add_option("--label-column", label, "Class column name or index")->capture_default_str();
  predict_cmd->add_option("--seed", seed, "Accepted for uniformity; prediction is deterministic")->capture_default_str();

  // kappa
  auto* kappa_cmd = app.add_subcommand("kappa", "Pairwise kappa-error points of an ensemble on a test CSV");
  kappa_cmd->add_option("--ensemble", model_path, "Ensemble model file")->required();
  kappa_cmd->add_option("--test", test_path, "Test CSV (class column required)")->required();
  kappa_cmd->add_option("--output", out_path, "Output CSV (default stdout)");
  kappa_cmd->add_option("--label-column", label, "Class column name or index")->capture_default_str();
  kappa_cmd->add_option("--seed", seed, "Accepted for uniformity; prediction is deterministic")->capture_default_str();

  // report
  std::string results_dir = default_output_dir();
  auto* report = app.add_subcommand("report", "Rebuild tables and the summary from runs.csv files");
  report->add_option("dir", results_dir, "Results directory (default $ENSIMPUTE_OUTPUT_DIR or results)");
  report->add_option("--seed", seed, "Accepted for uniformity; reports are deterministic")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(ra, *run);

    if (*inject) {
      const Dataset d = load_csv(in_path, label);
      const Dataset out = inject_mcar(d, {ratio, seed});
      write_csv(out, out_path);
      if (!mask_path.empty()) write_mask(out, mask_path);
      std::cerr << "removed " << out.missing_count() << " cells\n";
      return 0;
    }

    if (*impute) {
      const Dataset d = load_csv(in_path, label);
      const ImputerKind kind = parse_imputer_kind(imp_method);
      if (kind == ImputerKind::MEI) {
        write_csv(apply_mei(fit_mei(d), d), out_path);
        return 0;
      }
      if (multiple < 1) throw ValidationError("--multiple must be >= 1");
      const auto copies = multiple_impute(kind, d, multiple, icfg, RandomStream(seed));
      if (average || multiple == 1) {
        write_csv(average_imputations(copies, d), out_path);
      } else {
        const fs::path p(out_path);
        for (std::size_t i = 0; i < copies.size(); ++i) {
          const fs::path name = p.parent_path() / (p.stem().string() + "_" + std::to_string(i + 1) + p.extension().string());
          write_csv(copies[i], name.string());
        }
      }
      return 0;
    }

    if (*train) {
      const Dataset d = load_csv(in_path, label);
      const MethodId m = parse_method(method_name);
      ecfg.test_imputation = !native;
      const EnsembleModel model = build(m, d, ecfg);
      save_model(model, model_path);
      if (dump) dump_tree(model.members.front().tree, std::cout, model.feature_names, model.class_names);
      std::cerr << "trained " << to_string(m) << " with " << model.members.size() << " member(s)\n";
      return 0;
    }

    if (*predict_cmd) {
      const EnsembleModel model = load_model(model_path);
      const Dataset test = load_csv(test_path, label);
      check_features(test, model);
      const auto pred = predict_all(model, test);
      const auto truth = labels_for_model(test, model);
      std::ofstream file;
      if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cannot write file: " + out_path);
      }
      std::ostream& out = out_path.empty() ? std::cout : file;
      out << "record,predicted,actual\n";
      for (std::size_t r = 0; r < pred.size(); ++r)
        out << r << ',' << model.class_names[static_cast<std::size_t>(pred[r])] << ','
            << test.meta.class_names[static_cast<std::size_t>(test.labels[r])] << '\n';
      std::cerr << "accuracy " << accuracy(pred, truth) << '\n';
      return 0;
    }

    if (*kappa_cmd) {
      const EnsembleModel model = load_model(model_path);
      const Dataset test = load_csv(test_path, label);
      check_features(test, model);
      const auto points = kappa_error_points(member_predictions(model, test), labels_for_model(test, model),
                                             model.n_classes);
      if (out_path.empty()) {
        write_kappa_csv(points, std::cout);
      } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write file: " + out_path);
        write_kappa_csv(points, out);
      }
      return 0;
    }

    if (*report) {
      ExperimentOutput res;
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(results_dir))
        if (e.is_directory() && fs::is_regular_file(e.path() / "runs.csv")) files.push_back(e.path() / "runs.csv");
      std::sort(files.begin(), files.end());
      if (files.empty()) throw ValidationError("no <dataset>/runs.csv files under " + results_dir);
      for (const auto& f : files) {
        auto runs = read_runs_csv(f.string());
        res.runs.insert(res.runs.end(), runs.begin(), runs.end());
      }
      // Rewrites tables only; kappa-error files are left as they are.
      export_results(res, results_dir);
      std::cout << summary_text(res.runs);
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
