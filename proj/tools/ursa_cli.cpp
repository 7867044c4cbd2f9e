// ursa: train, evaluate and inspect constellation point-cloud classifiers.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical abort.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ursa/config.hpp"
#include "ursa/data.hpp"
#include "ursa/error.hpp"
#include "ursa/gradient_check.hpp"
#include "ursa/io.hpp"
#include "ursa/parallel.hpp"
#include "ursa/training.hpp"

namespace fs = std::filesystem;
using namespace ursa;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// Long flags that map one-to-one onto configuration keys.
struct ConfigFlags {
  std::string config_file;
  bool no_augment = false;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "key=value configuration file (flags override it)");
    app.add_flag("--no-augment", no_augment, "disable training augmentation");
    for (const auto& key : config_keys()) {
      const std::string name(key.name);
      options[name] = app.add_option("--" + name, values[name], std::string(key.help))->type_name("VALUE");
    }
  }

  TrainConfig resolve() const {
    TrainConfig config = config_file.empty() ? TrainConfig{} : load_config_file(config_file);
    for (const auto& [name, option] : options)
      if (option->count() > 0) apply_config_value(config, name, values.at(name));
    if (no_augment) config.augmentation.enabled = false;
    config.validate();
    return config;
  }
};

void print_config(const TrainConfig& config) {
  std::cerr << "configuration:\n";
  std::istringstream lines(to_config_text(config));
  for (std::string line; std::getline(lines, line);) std::cerr << "  " << line << '\n';
}

LabeledCloudSet load_archive_or_throw(const std::string& path, Split split) {
  auto contents = load_cloud_archive(path, split);
  if (contents.clouds_outside_unit_sphere > 0)
    std::cerr << "warning: " << path << ": " << contents.clouds_outside_unit_sphere << " of "
              << contents.set.size() << " clouds extend beyond the unit sphere\n";
  return std::move(contents.set);
}

int cmd_convert_mnist(const std::string& images, const std::string& labels, const std::string& out,
                      std::uint64_t seed) {
  const ImageSet raw = load_idx(images, labels);
  Rng rng(seed);
  LabeledCloudSet set;
  try {
    set = images_to_clouds(raw, rng);
  } catch (const ValidationError& e) {
    throw ValidationError(images + ": " + e.what());
  }
  save_cloud_archive(out, set);
  std::cout << "wrote " << set.size() << " clouds (n=" << set.n << ", d=" << set.d << ", classes=" << set.class_count
            << ") to " << out << '\n';
  return kOk;
}

int cmd_synth(const SyntheticSpec& spec, const std::string& out) {
  const LabeledCloudSet set = make_synthetic_set(spec);
  save_cloud_archive(out, set);
  std::cout << "wrote " << set.size() << " synthetic clouds (n=" << set.n << ", d=" << set.d
            << ", classes=" << set.class_count << ") to " << out << '\n';
  return kOk;
}

template <typename T>
int train_impl(const TrainConfig& config, const LabeledCloudSet& train, const LabeledCloudSet* test,
               const std::string& checkpoint, const std::string& report_path, const std::string& snapshot_dir) {
  TrainCallbacks callbacks;
  callbacks.on_epoch = [](const EpochStats& e) {
    std::fprintf(stderr, "epoch %4zu  loss %.5f  train_acc %.4f  test_acc %.4f  (%.1fs)\n", e.epoch, e.train_loss,
                 e.train_accuracy, e.test_accuracy, e.seconds);
  };
  if (!snapshot_dir.empty()) {
    fs::create_directories(snapshot_dir);
    callbacks.on_snapshot = [&](std::size_t epoch, const Matrix<double>& stars) {
      save_snapshot_csv(fs::path(snapshot_dir) / snapshot_file_name(epoch), epoch, stars);
    };
  }
  const TrainResult<T> result = run_training<T>(config, train, test, callbacks, worker_count());
  save_checkpoint(checkpoint, result.model, config);
  std::ofstream report(report_path, std::ios::trunc);
  if (!report) throw DataError("cannot open '" + report_path + "' for writing");
  result.report.write_csv(report);
  if (test) std::printf("final test accuracy: %.4f\n", result.report.final_test_accuracy);
  std::cout << "checkpoint: " << checkpoint << "\nreport: " << report_path << '\n';
  return kOk;
}

int cmd_train(const TrainConfig& config, const std::string& train_path, const std::string& test_path,
              const std::string& checkpoint, std::string report_path, const std::string& snapshot_dir) {
  const LabeledCloudSet train = load_archive_or_throw(train_path, Split::train);
  LabeledCloudSet test;
  if (!test_path.empty()) {
    test = load_archive_or_throw(test_path, Split::test);
    if (test.d != train.d) throw ConfigError("train and test archives have different dimensions");
  }
  if (report_path.empty()) report_path = checkpoint + ".report.csv";
  print_config(config);
  const LabeledCloudSet* test_ptr = test_path.empty() ? nullptr : &test;
  if (config.precision == Precision::f64)
    return train_impl<double>(config, train, test_ptr, checkpoint, report_path, snapshot_dir);
  return train_impl<float>(config, train, test_ptr, checkpoint, report_path, snapshot_dir);
}

int cmd_eval(const std::string& checkpoint_path, const std::string& archive_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const LabeledCloudSet set = load_archive_or_throw(archive_path, Split::test);
  const ModelShape shape = ck.model.shape();
  if (set.d != shape.dim)
    throw ConfigError("archive dimension d=" + std::to_string(set.d) + " does not match the checkpoint's d=" +
                      std::to_string(shape.dim));
  if (set.class_count > shape.classes)
    throw ConfigError("archive has " + std::to_string(set.class_count) + " classes, checkpoint only " +
                      std::to_string(shape.classes));
  const double accuracy = ck.precision == Precision::f64
                              ? evaluate(ck.model, set, worker_count())
                              : evaluate(convert_model<float>(ck.model), set, worker_count());
  std::printf("accuracy: %.4f\n", accuracy);
  return kOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t instances, const GradCheckOptions& options) {
  bool all_passed = true;
  for (Measure measure : {Measure::gaussian, Measure::exponential, Measure::minimum}) {
    InstanceSpec spec;
    spec.measure = measure;

    // Well-conditioned: a random instance with no flagged coordinates.
    {
      const GradCheckInstance inst = make_random_instance(seed, spec);
      const auto r = gradient_check(inst.model, inst.clouds, inst.labels, options);
      const bool ok = r.passed && r.excluded == 0;
      std::cout << to_string(measure) << " / well-conditioned: " << (ok ? "PASS" : "FAIL")
                << "  max_rel_err=" << r.max_rel_error << "  excluded=" << r.excluded << '\n';
      r.print(std::cout);
      all_passed = all_passed && ok;
    }

    // Constructed singularity: a point on star 0 and, for the minimum
    // measure, two points equidistant from star 1.
    {
      GradCheckInstance inst = make_random_instance(seed + 1, spec);
      auto& stars = inst.model.constellation.stars;
      auto& pts = inst.clouds[0].points();
      for (std::size_t k = 0; k < spec.dim; ++k) pts(0, k) = stars(0, k);
      for (std::size_t k = 0; k < spec.dim; ++k) {
        pts(1, k) = stars(1, k) + (k == 0 ? 0.05 : 0.0);
        pts(2, k) = stars(1, k) - (k == 0 ? 0.05 : 0.0);
      }
      const auto r = gradient_check(inst.model, inst.clouds, inst.labels, options);
      const bool ok = measure == Measure::gaussian ? r.passed : r.passed && r.excluded >= 1;
      std::cout << to_string(measure) << " / constructed-singularity: " << (ok ? "PASS" : "FAIL")
                << "  max_rel_err=" << r.max_rel_error << "  excluded=" << r.excluded << '\n';
      all_passed = all_passed && ok;
    }

    // Small random instances.
    {
      std::size_t passed = 0, excluded = 0;
      double worst = 0.0;
      for (std::size_t t = 0; t < instances; ++t) {
        InstanceSpec s = spec;
        s.dim = 2 + t % 2;
        const GradCheckInstance inst = make_random_instance(seed + 1000 + t, s);
        const auto r = gradient_check(inst.model, inst.clouds, inst.labels, options);
        passed += r.passed;
        excluded += r.excluded;
        worst = std::max(worst, r.max_rel_error);
      }
      const bool ok = passed == instances;
      std::cout << to_string(measure) << " / small-random: " << (ok ? "PASS" : "FAIL") << "  " << passed << "/"
                << instances << " instances  worst_rel_err=" << worst << "  excluded=" << excluded << '\n';
      all_passed = all_passed && ok;
    }
  }
  std::cout << (all_passed ? "gradient check passed\n" : "gradient check FAILED\n");
  return all_passed ? kOk : kNumerical;
}

struct SweepCell {
  Measure measure;
  std::size_t stars;
  std::vector<double> accuracies;
  std::vector<std::string> failures;
};

int cmd_sweep(TrainConfig base, const std::string& train_path, const std::string& test_path,
              const std::vector<std::size_t>& m_list, std::size_t runs, const std::vector<Measure>& measures,
              std::size_t subset, const std::string& out_path) {
  if (runs == 0) throw ConfigError("--runs must be >= 1");
  LabeledCloudSet train = load_archive_or_throw(train_path, Split::train);
  const LabeledCloudSet test = load_archive_or_throw(test_path, Split::test);
  if (subset > 0) train = train.head(subset);
  if (test.d != train.d) throw ConfigError("train and test archives have different dimensions");
  print_config(base);

  std::vector<SweepCell> cells;
  for (Measure measure : measures)
    for (std::size_t stars : m_list) cells.push_back({measure, stars, {}, {}});

  std::mutex log_mutex;
  parallel_for(cells.size(), worker_count(), [&](std::size_t c) {
    SweepCell& cell = cells[c];
    for (std::size_t r = 0; r < runs; ++r) {
      TrainConfig config = base;
      config.measure = cell.measure;
      config.stars = cell.stars;
      config.seed = base.seed + r;
      try {
        const double acc = config.precision == Precision::f64
                               ? run_training<double>(config, train, &test).report.final_test_accuracy
                               : run_training<float>(config, train, &test).report.final_test_accuracy;
        cell.accuracies.push_back(acc);
        std::lock_guard lock(log_mutex);
        std::fprintf(stderr, "%s m=%zu run %zu: test accuracy %.4f\n", std::string(to_string(cell.measure)).c_str(),
                     cell.stars, r, acc);
      } catch (const std::exception& e) {
        cell.failures.push_back(e.what());
        std::lock_guard lock(log_mutex);
        std::fprintf(stderr, "%s m=%zu run %zu FAILED: %s\n", std::string(to_string(cell.measure)).c_str(), cell.stars,
                     r, e.what());
      }
    }
  });

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + out_path + "' for writing");
  out << "measure,stars,runs,completed,mean_accuracy,std_accuracy,status\n";
  bool any_failed = false;
  for (const auto& cell : cells) {
    const std::size_t k = cell.accuracies.size();
    double mean = std::numeric_limits<double>::quiet_NaN(), stdev = std::numeric_limits<double>::quiet_NaN();
    if (k > 0) {
      mean = std::accumulate(cell.accuracies.begin(), cell.accuracies.end(), 0.0) / static_cast<double>(k);
      double ss = 0.0;
      for (double a : cell.accuracies) ss += (a - mean) * (a - mean);
      stdev = k > 1 ? std::sqrt(ss / static_cast<double>(k - 1)) : 0.0;
    }
    any_failed = any_failed || !cell.failures.empty();
    char line[256];
    std::snprintf(line, sizeof line, "%s,%zu,%zu,%zu,%.6f,%.6f,%s\n", std::string(to_string(cell.measure)).c_str(),
                  cell.stars, runs, k, mean, stdev,
                  cell.failures.empty() ? "ok" : ("failed:" + std::to_string(cell.failures.size())).c_str());
    out << line;
    std::cout << line;
  }
  return any_failed ? kNumerical : kOk;
}

int cmd_summary(const ModelShape& shape, Measure measure) {
  Rng rng(0);
  ModelInit init;
  init.measure = measure;
  const ModelParams<float> model = init_model<float>(rng, shape, init);
  write_model_summary(std::cout, model);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ursa constellation point-cloud classifier"};
  app.require_subcommand(1);

  // convert-mnist
  std::string images, labels, convert_out;
  std::uint64_t convert_seed = 1;
  auto* convert = app.add_subcommand("convert-mnist", "convert MNIST IDX files into a 312-point cloud archive");
  convert->add_option("--images", images, "IDX image file")->required();
  convert->add_option("--labels", labels, "IDX label file")->required();
  convert->add_option("--out", convert_out, "output cloud archive")->required();
  convert->add_option("--seed", convert_seed, "seed for point padding (default 1)");

  // synth
  SyntheticSpec synth_spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic labeled cloud archive");
  synth->add_option("--classes", synth_spec.classes, "class count (default 2)");
  synth->add_option("--points", synth_spec.points, "points per cloud (default 64)");
  synth->add_option("--dim", synth_spec.dim, "dimension (default 2)");
  synth->add_option("--count", synth_spec.count, "number of clouds (default 100)");
  synth->add_option("--anchors", synth_spec.anchors, "centres per class (default 1)");
  synth->add_option("--spread", synth_spec.spread, "noise std around centres (default 0.1)");
  synth->add_option("--seed", synth_spec.seed, "seed (default 1)");
  synth->add_option("--out", synth_out, "output cloud archive")->required();

  // train
  ConfigFlags train_flags;
  std::string train_archive, test_archive, checkpoint_out, report_out, snapshot_dir;
  auto* train = app.add_subcommand("train", "train a model and write checkpoint, report CSV and snapshots");
  train->add_option("--train", train_archive, "training cloud archive")->required();
  train->add_option("--test", test_archive, "test cloud archive (accuracy after every epoch)");
  train->add_option("--out", checkpoint_out, "output checkpoint")->required();
  train->add_option("--report", report_out, "report CSV (default <out>.report.csv)");
  train->add_option("--snapshot-dir", snapshot_dir, "directory for constellation snapshot CSVs");
  train_flags.attach(*train);

  // eval
  std::string eval_checkpoint, eval_archive;
  auto* eval = app.add_subcommand("eval", "print the accuracy of a checkpoint on an archive");
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
  eval->add_option("--archive", eval_archive, "cloud archive")->required();

  // gradcheck
  std::uint64_t gc_seed = 1;
  std::size_t gc_instances = 20;
  GradCheckOptions gc_options;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every backward pass");
  gradcheck->add_option("--seed", gc_seed, "base seed (default 1)");
  gradcheck->add_option("--instances", gc_instances, "random instances per measure (default 20)");
  gradcheck->add_option("--tolerance", gc_options.tolerance, "max relative error per block (default 1e-4)");
  gradcheck->add_option("--step", gc_options.step, "central-difference step (default 1e-5)");

  // sweep
  ConfigFlags sweep_flags;
  std::string sweep_train, sweep_test, sweep_out, m_list_text, measures_text = "gaussian,exponential,minimum";
  std::size_t sweep_runs = 1, sweep_subset = 0;
  auto* sweep = app.add_subcommand("sweep", "mean/std test accuracy over measures x constellation sizes");
  sweep->add_option("--train", sweep_train, "training cloud archive")->required();
  sweep->add_option("--test", sweep_test, "test cloud archive")->required();
  sweep->add_option("--m-list", m_list_text, "comma-separated star counts, e.g. 32,64,128")->required();
  sweep->add_option("--runs", sweep_runs, "runs per cell; run r uses seed + r (default 1)");
  sweep->add_option("--measures", measures_text, "comma-separated measures (default all three)");
  sweep->add_option("--subset", sweep_subset, "train on the first N samples only");
  sweep->add_option("--out", sweep_out, "output CSV")->required();
  sweep_flags.attach(*sweep);

  // summary
  ModelShape summary_shape{512, 3, 512, 256, 40};
  std::string summary_measure = "gaussian";
  auto* summary = app.add_subcommand("summary", "print per-layer and total trainable parameter counts");
  summary->add_option("--stars", summary_shape.stars, "constellation size (default 512)");
  summary->add_option("--dim", summary_shape.dim, "point dimension (default 3)");
  summary->add_option("--classes", summary_shape.classes, "class count (default 40)");
  summary->add_option("--hidden1", summary_shape.hidden1, "first dense width (default 512)");
  summary->add_option("--hidden2", summary_shape.hidden2, "second dense width (default 256)");
  summary->add_option("--measure", summary_measure, "distance measure (default gaussian)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*convert) return cmd_convert_mnist(images, labels, convert_out, convert_seed);
    if (*synth) return cmd_synth(synth_spec, synth_out);
    if (*train)
      return cmd_train(train_flags.resolve(), train_archive, test_archive, checkpoint_out, report_out, snapshot_dir);
    if (*eval) return cmd_eval(eval_checkpoint, eval_archive);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_instances, gc_options);
    if (*sweep) {
      const auto m_list = parse_count_list(m_list_text, "--m-list");
      std::vector<Measure> measures;
      std::string_view rest = measures_text;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        measures.push_back(parse_measure(rest.substr(0, comma)));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      }
      return cmd_sweep(sweep_flags.resolve(), sweep_train, sweep_test, m_list, sweep_runs, measures, sweep_subset,
                       sweep_out);
    }
    if (*summary) return cmd_summary(summary_shape, parse_measure(summary_measure));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ContractViolation& e) {
    std::cerr << "invalid arguments: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
