#include "grridge/codata.hpp"
#include "grridge/engine.hpp"
#include "grridge/io.hpp"
#include "grridge/pipeline.hpp"
#include "grridge/rng.hpp"
#include "grridge/simgen.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace grridge;

namespace {

struct CommonArgs {
  std::string data_path;
  std::string response_path;
  std::string response_kind = "binary";
  std::string codata_path;
  std::string out_dir;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct PipelineArgs {
  std::string partitions;
  double lambda = 0.0;  // 0 = tune on the grid
  std::string lambda_grid = "1e-3,1e6,25";
  double filter_fdr = -1.0;
  double filter_meandiff = 0.1;
  bool standardize = false;
  std::string method = "iterative";
  int max_outer = 10;
  std::string cv = "10";
  bool do_select = false;
  int p_max = 100;
  double q_marg = 0.01;
  bool order_scan = false;
};

ResponseKind parse_kind(const std::string& s) {
  if (s == "binary") return ResponseKind::binary;
  if (s == "continuous") return ResponseKind::continuous;
  throw CLI::ValidationError("--response-kind", "must be binary or continuous");
}

int parse_cv(const std::string& s, int n) {
  if (s == "loo") return n;
  int k = 0;
  std::istringstream in(s);
  if (!(in >> k) || !in.eof() || k < 2) throw CLI::ValidationError("--cv", "must be an integer >= 2 or 'loo'");
  return std::min(k, n);
}

std::vector<double> parse_grid(const std::string& s) {
  double lo, hi;
  int count;
  char c1, c2;
  std::istringstream in(s);
  if (!(in >> lo >> c1 >> hi >> c2 >> count) || c1 != ',' || c2 != ',' || !in.eof()) {
    throw CLI::ValidationError("--lambda-grid", "expected lo,hi,count");
  }
  return log_spaced_grid(lo, hi, count);
}

void add_common(CLI::App* cmd, CommonArgs& args, bool need_response = true) {
  cmd->add_option("--data", args.data_path, "design matrix CSV (sample_id + variable columns)")->required();
  if (need_response) {
    cmd->add_option("--response", args.response_path, "response CSV (sample_id,y)")->required();
    cmd->add_option("--response-kind", args.response_kind, "binary|continuous")
        ->default_val("binary");
  }
  cmd->add_option("--codata", args.codata_path, "co-data TSV (variable_id + source columns)");
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  cmd->add_option("--seed", args.seed, "base seed; all randomness derives from it")->default_val(1);
  cmd->add_option("--threads", args.threads, "worker threads for fold refits")
      ->default_val(1)
      ->configurable(false);
}

void add_pipeline(CLI::App* cmd, PipelineArgs& args) {
  cmd->add_option("--partitions", args.partitions,
                  "comma-separated specs kind:column[:param=value...]; kinds rank, "
                  "rank_nonuniform, quantile, labels; column @variance uses sample variances");
  cmd->add_option("--lambda", args.lambda, "fixed global penalty (skips tuning)");
  cmd->add_option("--lambda-grid", args.lambda_grid, "tuning grid as lo,hi,count")
      ->default_val("1e-3,1e6,25");
  cmd->add_option("--filter-fdr", args.filter_fdr, "prior filter: max BH-adjusted p (off if unset)");
  cmd->add_option("--filter-meandiff", args.filter_meandiff, "prior filter: min |class mean difference|")
      ->default_val(0.1);
  cmd->add_flag("--standardize", args.standardize, "fold column variances into the penalty multipliers");
  cmd->add_option("--method", args.method, "group-variance estimator: iterative|system")
      ->default_val("iterative");
  cmd->add_option("--max-outer", args.max_outer, "outer re-penalization sweeps")->default_val(10);
  cmd->add_option("--cv", args.cv, "folds for tuning/stopping: k or 'loo'")->default_val("10");
  cmd->add_flag("--select", args.do_select, "run post-hoc variable selection");
  cmd->add_option("--p-max", args.p_max, "selection: maximum variables")->default_val(100);
  cmd->add_option("--q-marg", args.q_marg, "selection: relative CVL margin")->default_val(0.01);
  cmd->add_flag("--order-scan", args.order_scan, "rerun all partition orderings and report final CVLs");
}

PipelineConfig to_pipeline_config(const CommonArgs& common, const PipelineArgs& args, int n) {
  PipelineConfig cfg;
  if (!args.partitions.empty()) cfg.partitions = parse_partition_specs(args.partitions);
  if (args.lambda > 0.0) {
    cfg.lambda = args.lambda;
  } else {
    cfg.lambda_grid = parse_grid(args.lambda_grid);
  }
  if (args.filter_fdr >= 0.0) {
    cfg.filter_fdr = args.filter_fdr;
    cfg.filter_meandiff = args.filter_meandiff;
  }
  cfg.standardize = args.standardize;
  cfg.method = eb_method_from_string(args.method);
  cfg.max_outer_iters = args.max_outer;
  cfg.cv_folds = parse_cv(args.cv, n);
  cfg.seed = common.seed;
  cfg.threads = common.threads;
  if (args.do_select) {
    SelectionConfig sel;
    sel.p_max = args.p_max;
    sel.q_marg = args.q_marg;
    cfg.selection = sel;
  }
  return cfg;
}

// Every run echoes its fully-resolved configuration, seed and version so the
// output directory is enough to reproduce it.
void write_run_config(const CLI::App& app, const CLI::App* cmd, const std::string& out_dir) {
  std::ostringstream out;
  out << "version=" << kVersion << "\n";
  out << "command=" << cmd->get_name() << "\n";
  out << app.config_to_str(true, false);
  write_text_file((fs::path(out_dir) / "run_config.txt").string(), out.str());
}

struct LoadedData {
  DesignMatrix X;
  Response y;
  std::optional<CoDataTable> codata;
};

LoadedData load_data(const CommonArgs& args, bool need_response = true) {
  LoadedData d;
  d.X = read_design_csv(args.data_path);
  if (need_response) {
    const ResponseTable table = read_response_csv(args.response_path);
    d.y = align_response(table, args.response_path, d.X.sample_ids, parse_kind(args.response_kind));
  }
  if (!args.codata_path.empty()) d.codata = read_codata_tsv(args.codata_path);
  return d;
}

int cmd_fit(const CLI::App& app, CLI::App* cmd, const CommonArgs& common, const PipelineArgs& args) {
  const LoadedData d = load_data(common);
  const PipelineConfig cfg = to_pipeline_config(common, args, static_cast<int>(d.X.n()));
  const CoDataTable* codata = d.codata ? &*d.codata : nullptr;

  const PipelineResult result = run_pipeline(d.X, d.y, codata, cfg);

  fs::create_directories(common.out_dir);
  const fs::path out(common.out_dir);
  write_text_file((out / "model.json").string(), model_to_json(result.model).dump(2) + "\n");
  write_cvl_trace_csv((out / "cvl_trace.csv").string(), result.model.cvl_trace);
  write_multiplier_csv((out / "multipliers.csv").string(), result.model.partitions);
  if (result.model.selection) {
    write_selection_csv((out / "selection.csv").string(), *result.model.selection);
  }
  write_run_config(app, cmd, common.out_dir);

  if (args.order_scan && result.model.partitions.size() > 1) {
    std::vector<Partition> parts;
    for (const auto& st : result.model.partitions) parts.push_back(st.partition);
    GRridgeOptions opts;
    opts.method = cfg.method;
    opts.max_outer_iters = cfg.max_outer_iters;
    opts.cv_folds = cfg.cv_folds;
    opts.cv_seed = component_seed(cfg.seed, "cv");
    opts.threads = cfg.threads;
    DesignMatrix Xf = d.X;
    if (cfg.filter_fdr) Xf = d.X.select_columns(result.kept);
    const auto scan = grridge_order_scan(Xf, d.y, parts, result.lambda, opts);
    std::ostringstream sout;
    sout << "ordering,final_cvl\n";
    for (const auto& [order, value] : scan) {
      for (std::size_t i = 0; i < order.size(); ++i) sout << (i ? "|" : "") << order[i];
      sout << ',' << format_double(value) << '\n';
    }
    write_text_file((out / "order_scan.csv").string(), sout.str());
  }

  std::cout << "fit: lambda=" << format_double(result.lambda)
            << " variables=" << result.model.variable_ids.size()
            << " accepted_steps=" << result.model.history.size() << "\n";
  std::cout << "model written to " << (out / "model.json").string() << "\n";
  return 0;
}

int cmd_eval(const CLI::App& app, CLI::App* cmd, const CommonArgs& common, const PipelineArgs& args,
             const std::string& model_path, const std::string& outer_cv) {
  const LoadedData d = load_data(common);
  fs::create_directories(common.out_dir);
  const fs::path out(common.out_dir);

  MetricsReport report;
  std::vector<std::pair<std::string, double>> predictions;
  if (!model_path.empty()) {
    const GRridgeModel model =
        model_from_json(nlohmann::ordered_json::parse(read_text_file(model_path)));
    const Eigen::VectorXd scores = predict(model, d.X);
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
      predictions.emplace_back(d.X.sample_ids[static_cast<std::size_t>(i)], scores[i]);
    }
    if (d.y.kind == ResponseKind::binary) {
      auto [auc, points] = roc_auc(scores, d.y.values);
      report.auc = auc;
      report.roc_points = std::move(points);
      report.brier = brier(scores, d.y.values);
      report.cvl = bernoulli_loglik(scores, d.y.values);
    } else {
      report.brier = (d.y.values - scores).squaredNorm() / static_cast<double>(scores.size());
    }
  } else {
    const PipelineConfig cfg = to_pipeline_config(common, args, static_cast<int>(d.X.n()));
    const int outer_k = parse_cv(outer_cv, static_cast<int>(d.X.n()));
    report = nested_cv_eval(d.X, d.y, d.codata ? &*d.codata : nullptr, cfg, outer_k, &predictions);
  }

  std::ostringstream mout;
  mout << "metric,value\n";
  if (std::isfinite(report.auc)) mout << "auc," << format_double(report.auc) << "\n";
  mout << "brier," << format_double(report.brier) << "\n";
  if (std::isfinite(report.cvl)) mout << "cvl," << format_double(report.cvl) << "\n";
  write_text_file((out / "metrics.csv").string(), mout.str());
  if (!report.roc_points.empty()) write_roc_csv((out / "roc.csv").string(), report.roc_points);
  {
    std::ostringstream pout;
    pout << "sample_id,score\n";
    for (const auto& [id, score] : predictions) pout << id << ',' << format_double(score) << '\n';
    write_text_file((out / "predictions.csv").string(), pout.str());
  }
  write_run_config(app, cmd, common.out_dir);

  if (std::isfinite(report.auc)) std::cout << "auc=" << format_double(report.auc) << " ";
  std::cout << "brier=" << format_double(report.brier) << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path, bool use_selected) {
  const GRridgeModel model =
      model_from_json(nlohmann::ordered_json::parse(read_text_file(model_path)));
  const DesignMatrix X = read_design_csv(data_path);
  const Eigen::VectorXd scores = predict(model, X, use_selected);
  write_predictions_csv(out_path, X.sample_ids, scores);
  std::cout << "wrote " << scores.size() << " predictions to " << out_path << "\n";
  return 0;
}

int cmd_select(const CLI::App& app, CLI::App* cmd, const CommonArgs& common,
               const std::string& model_path, int p_max, double q_marg, const std::string& cv) {
  const LoadedData d = load_data(common);
  GRridgeModel model = model_from_json(nlohmann::ordered_json::parse(read_text_file(model_path)));

  // align data columns to the model's variables
  std::vector<int> cols;
  {
    std::unordered_map<std::string, int> col_of;
    for (std::size_t j = 0; j < d.X.variable_ids.size(); ++j) col_of.emplace(d.X.variable_ids[j], static_cast<int>(j));
    for (const std::string& id : model.variable_ids) {
      auto it = col_of.find(id);
      if (it == col_of.end()) throw std::invalid_argument("select: data is missing model variable " + id);
      cols.push_back(it->second);
    }
  }
  const DesignMatrix X = d.X.select_columns(cols);

  const int k = parse_cv(cv, static_cast<int>(X.n()));
  const std::optional<Eigen::VectorXd> strat =
      d.y.kind == ResponseKind::binary ? std::optional<Eigen::VectorXd>(d.y.values) : std::nullopt;
  const FoldPlan folds = make_folds(static_cast<int>(X.n()), k, strat, component_seed(common.seed, "cv"));
  SelectionConfig cfg;
  cfg.p_max = p_max;
  cfg.q_marg = q_marg;
  model.selection = select_posthoc(model, X, d.y, folds, cfg, {}, common.threads);

  fs::create_directories(common.out_dir);
  const fs::path out(common.out_dir);
  write_text_file((out / "model.json").string(), model_to_json(model).dump(2) + "\n");
  write_selection_csv((out / "selection.csv").string(), *model.selection);
  write_run_config(app, cmd, common.out_dir);
  std::cout << "selected " << model.selection->indices.size() << " variables, cvl="
            << format_double(model.selection->cvl) << "\n";
  return 0;
}

int cmd_simulate(const CLI::App& app, CLI::App* cmd, const SimScenario& scenario,
                 const std::string& out_dir) {
  const SimulatedData d = simulate_scenario(scenario);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  write_design_csv((out / "train.csv").string(), d.train_X);
  write_response_csv((out / "train_response.csv").string(), d.train_X.sample_ids, d.train_y.values);
  write_design_csv((out / "test.csv").string(), d.test_X);
  write_response_csv((out / "test_response.csv").string(), d.test_X.sample_ids, d.test_y.values);

  // group labels as co-data so `--partitions labels:group` reconstructs the truth
  CoDataTable codata;
  codata.variable_ids = d.train_X.variable_ids;
  CoDataColumn col;
  col.name = "group";
  col.numeric = false;
  for (int g : d.partition.group_of) col.labels.push_back(d.partition.group_labels[static_cast<std::size_t>(g)]);
  codata.columns.push_back(std::move(col));
  write_codata_tsv((out / "codata.tsv").string(), codata);

  nlohmann::ordered_json truth;
  truth["scenario"] = {{"G", scenario.G},
                       {"p_g", scenario.p_g},
                       {"n", scenario.n},
                       {"n_test", scenario.n_test},
                       {"rho", scenario.rho},
                       {"signal_skew", scenario.signal_skew},
                       {"sparsity", scenario.sparsity},
                       {"signal_total", scenario.signal_total},
                       {"seed", scenario.seed}};
  truth["beta"] = std::vector<double>(d.beta.data(), d.beta.data() + d.beta.size());
  truth["intercept"] = d.intercept;
  truth["tau2_groups"] =
      std::vector<double>(d.tau2_groups.data(), d.tau2_groups.data() + d.tau2_groups.size());
  write_text_file((out / "truth.json").string(), truth.dump(2) + "\n");
  write_run_config(app, cmd, out_dir);
  std::cout << "simulated " << scenario.n << "x" << d.train_X.p() << " train and " << scenario.n_test
            << "x" << d.train_X.p() << " test into " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive group-regularized ridge regression"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file; flags take precedence");

  CommonArgs fit_common, eval_common, select_common;
  PipelineArgs fit_args, eval_args;

  CLI::App* fit = app.add_subcommand("fit", "fit a group-regularized ridge model");
  add_common(fit, fit_common);
  add_pipeline(fit, fit_args);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a model or a full pipeline by cross-validation");
  add_common(eval, eval_common);
  add_pipeline(eval, eval_args);
  std::string eval_model, eval_outer_cv = "10";
  eval->add_option("--model", eval_model, "model JSON to evaluate; omit to nested-cross-validate the pipeline");
  eval->add_option("--outer-cv", eval_outer_cv, "outer folds for pipeline mode: k or 'loo'")
      ->default_val("10");

  CLI::App* pred = app.add_subcommand("predict", "score new samples with a fitted model");
  std::string pred_model, pred_data, pred_out;
  bool pred_selected = false;
  pred->add_option("--model", pred_model, "model JSON")->required();
  pred->add_option("--data", pred_data, "design matrix CSV")->required();
  pred->add_option("--out", pred_out, "predictions CSV path")->required();
  pred->add_flag("--use-selected", pred_selected, "score with the selected submodel");

  CLI::App* sel = app.add_subcommand("select", "post-hoc variable selection on an existing model");
  std::string sel_model, sel_cv = "10";
  int sel_pmax = 100;
  double sel_qmarg = 0.01;
  add_common(sel, select_common);
  sel->add_option("--model", sel_model, "model JSON")->required();
  sel->add_option("--p-max", sel_pmax, "maximum variables")->default_val(100);
  sel->add_option("--q-marg", sel_qmarg, "relative CVL margin")->default_val(0.01);
  sel->add_option("--cv", sel_cv, "folds: k or 'loo'")->default_val("10");

  CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic scenario dataset");
  SimScenario scenario;
  std::string sim_out;
  sim->add_option("--groups", scenario.G, "number of groups")->default_val(4);
  sim->add_option("--group-size", scenario.p_g, "variables per group")->default_val(50);
  sim->add_option("--n", scenario.n, "training samples")->default_val(100);
  sim->add_option("--n-test", scenario.n_test, "test samples")->default_val(1000);
  sim->add_option("--rho", scenario.rho, "within-group equicorrelation")->default_val(0.0);
  sim->add_option("--signal-skew", scenario.signal_skew, "spread of non-null group variances")
      ->default_val(10.0);
  sim->add_option("--sparsity", scenario.sparsity, "fraction of null groups")->default_val(0.0);
  sim->add_option("--signal-total", scenario.signal_total, "total prior signal")->default_val(4.0);
  sim->add_option("--seed", scenario.seed, "seed")->default_val(1);
  sim->add_option("--out", sim_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return cmd_fit(app, fit, fit_common, fit_args);
    if (eval->parsed()) return cmd_eval(app, eval, eval_common, eval_args, eval_model, eval_outer_cv);
    if (pred->parsed()) return cmd_predict(pred_model, pred_data, pred_out, pred_selected);
    if (sel->parsed()) return cmd_select(app, sel, select_common, sel_model, sel_pmax, sel_qmarg, sel_cv);
    if (sim->parsed()) return cmd_simulate(app, sim, scenario, sim_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
