#include "grridge/engine.hpp"

#include "grridge/codata.hpp"
#include "grridge/eb_penalty.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace grridge {

namespace {

using ordered_json = nlohmann::ordered_json;

struct FitBundle {
  RidgeFit fit;                 // original scale
  Eigen::VectorXd beta_primed;  // on the scaled design, common-lambda scale
  MomentFactors factors;        // of the centered, scaled, weighted design
};

RidgeFit fit_model(const DesignMatrix& X, const Response& y, double lambda,
                   const Eigen::VectorXd& multipliers, const IrlsOptions& irls) {
  PenaltyConfig penalty;
  penalty.lambda_global = lambda;
  penalty.multipliers = multipliers;
  if (y.kind == ResponseKind::binary) return irls_fit(X, y, penalty, irls);
  return linear_fit(X, y, penalty, irls.include_intercept);
}

// Fit at the composed multipliers and derive the quantities the estimation
// equations need: the fit is an ordinary ridge on the column-scaled design, so
// the moment approximations apply there with the common lambda.
FitBundle fit_bundle(const DesignMatrix& X, const Response& y, double lambda,
                     const Eigen::VectorXd& multipliers, const IrlsOptions& irls) {
  FitBundle b;
  b.fit = fit_model(X, y, lambda, multipliers, irls);

  const WorkingState ws = working_state(X, y, b.fit, irls.prob_clip);
  const Eigen::VectorXd u = ws.weights2.array().sqrt().matrix();
  Eigen::MatrixXd Xw = u.asDiagonal() * X.values * multipliers.array().rsqrt().matrix().asDiagonal();
  if (irls.include_intercept) {
    const double uu = u.squaredNorm();
    Xw -= u * ((u.transpose() * Xw) / uu);
  }
  const double noise_var = y.kind == ResponseKind::continuous ? b.fit.sigma2 : 1.0;
  b.factors = moment_factors(Xw, lambda, noise_var);
  b.factors.working_weights = ws.weights2;
  b.factors.working_response = ws.response;
  b.beta_primed = (b.fit.coefficients.array() * multipliers.array().sqrt()).matrix();
  return b;
}

Eigen::VectorXd expand_to_variables(const MultiplierSet& set, const Partition& partition) {
  Eigen::VectorXd m(partition.p());
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    m[k] = set.group_multipliers[partition.group_of[static_cast<std::size_t>(k)]];
  }
  return m;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ordered_json partition_to_json(const Partition& part) {
  return ordered_json{{"id", part.id},
                      {"group_of", part.group_of},
                      {"group_labels", part.group_labels},
                      {"sizes", part.sizes},
                      {"monotone", to_string(part.monotone)}};
}

Partition partition_from_json(const ordered_json& j) {
  Partition part;
  part.id = j.at("id").get<std::string>();
  part.group_of = j.at("group_of").get<std::vector<int>>();
  part.group_labels = j.at("group_labels").get<std::vector<std::string>>();
  part.sizes = j.at("sizes").get<std::vector<int>>();
  part.monotone = monotone_from_string(j.at("monotone").get<std::string>());
  part.validate();
  return part;
}

ordered_json fit_to_json(const RidgeFit& fit) {
  ordered_json j{{"coefficients", to_std(fit.coefficients)},
                 {"intercept", fit.intercept},
                 {"lambda", fit.penalty.lambda_global},
                 {"multipliers", to_std(fit.penalty.multipliers)},
                 {"intercept_penalized", fit.penalty.intercept_penalized},
                 {"converged", fit.converged},
                 {"iterations", fit.iterations},
                 {"penalized_loglik", fit.penalized_loglik}};
  if (std::isfinite(fit.sigma2)) j["sigma2"] = fit.sigma2;
  return j;
}

RidgeFit fit_from_json(const ordered_json& j) {
  RidgeFit fit;
  fit.coefficients = from_std(j.at("coefficients").get<std::vector<double>>());
  fit.intercept = j.at("intercept").get<double>();
  fit.penalty.lambda_global = j.at("lambda").get<double>();
  fit.penalty.multipliers = from_std(j.at("multipliers").get<std::vector<double>>());
  fit.penalty.intercept_penalized = j.at("intercept_penalized").get<bool>();
  fit.converged = j.at("converged").get<bool>();
  fit.iterations = j.at("iterations").get<int>();
  fit.penalized_loglik = j.at("penalized_loglik").get<double>();
  if (j.contains("sigma2")) fit.sigma2 = j.at("sigma2").get<double>();
  return fit;
}

}  // namespace

std::string to_string(EBMethod m) { return m == EBMethod::system ? "system" : "iterative"; }

EBMethod eb_method_from_string(const std::string& s) {
  if (s == "system") return EBMethod::system;
  if (s == "iterative") return EBMethod::iterative;
  throw std::invalid_argument("unknown estimation method: " + s);
}

GRridgeModel grridge(const DesignMatrix& X, const Response& y,
                     const std::vector<Partition>& partitions, double lambda,
                     const GRridgeOptions& opts) {
  X.validate();
  y.validate();
  if (!(lambda > 0.0)) throw std::invalid_argument("grridge: lambda must be positive");
  if (opts.max_outer_iters < 1) throw std::invalid_argument("grridge: max_outer_iters must be >= 1");
  const Eigen::Index p = X.p();
  for (const Partition& part : partitions) {
    part.validate();
    if (part.p() != p) throw std::invalid_argument("grridge: partition " + part.id + " does not cover the variables");
  }

  GRridgeModel model;
  model.response_kind = y.kind;
  model.lambda = lambda;
  model.variable_ids = X.variable_ids;
  model.base_multipliers =
      opts.base_multipliers.size() > 0 ? opts.base_multipliers : Eigen::VectorXd::Ones(p);
  if (model.base_multipliers.size() != p) throw std::invalid_argument("grridge: base multiplier length mismatch");

  const int k = std::min<int>(opts.cv_folds, static_cast<int>(X.n()));
  const std::optional<Eigen::VectorXd> strat =
      y.kind == ResponseKind::binary ? std::optional<Eigen::VectorXd>(y.values) : std::nullopt;
  const FoldPlan folds = make_folds(static_cast<int>(X.n()), k, strat, opts.cv_seed);

  for (const Partition& part : partitions) {
    PartitionState st;
    st.partition = part;
    st.multipliers = Eigen::VectorXd::Ones(part.num_groups());
    st.tau2 = Eigen::VectorXd::Zero(part.num_groups());
    st.active = true;
    model.partitions.push_back(std::move(st));
  }

  Eigen::VectorXd composed = model.base_multipliers;
  double cvl_current = cvl(X, y, lambda, composed, folds, opts.irls, opts.threads);
  model.cvl_trace.push_back({0, "initial", cvl_current, true});
  FitBundle current = fit_bundle(X, y, lambda, composed, opts.irls);

  for (int iter = 1; iter <= opts.max_outer_iters; ++iter) {
    bool any_active = false;
    for (PartitionState& st : model.partitions) {
      if (!st.active) continue;
      any_active = true;
      const Partition& part = st.partition;
      try {
        Eigen::VectorXd tau2;
        if (opts.method == EBMethod::system) {
          EBSystem sys;
          sys.B = group_B(current.beta_primed, current.factors.variances, part);
          sys.alpha = alpha_matrix(current.factors, part, part);
          try {
            tau2 = solve_system(sys);
          } catch (const SingularAlphaError&) {
            // collinear group structure: fall back to the iterative route
            const double t2g = tau_global(current.beta_primed, current.factors.variances, current.factors);
            tau2 = tau_group_iterative(current.beta_primed, current.factors.variances,
                                       current.factors, part, t2g);
          }
        } else {
          const double t2g = tau_global(current.beta_primed, current.factors.variances, current.factors);
          tau2 = tau_group_iterative(current.beta_primed, current.factors.variances,
                                     current.factors, part, t2g);
        }

        if (part.monotone != Monotone::none) {
          Eigen::VectorXd weights(part.num_groups());
          for (int g = 0; g < part.num_groups(); ++g) weights[g] = static_cast<double>(part.sizes[static_cast<std::size_t>(g)]);
          tau2 = isotonic_fit(tau2, weights, part.monotone);
          tau2 = tau2.array().max(kTau2Floor).matrix();  // isotonic pooling can reach the clamp floor
        }

        const MultiplierSet step = calibrate(tau2, part.sizes, part.id);
        const Eigen::VectorXd candidate =
            (composed.array() * expand_to_variables(step, part).array()).matrix();
        const double cvl_candidate = cvl(X, y, lambda, candidate, folds, opts.irls, opts.threads);

        if (cvl_candidate > cvl_current - opts.cvl_tolerance) {
          composed = candidate;
          cvl_current = cvl_candidate;
          st.multipliers = (st.multipliers.array() * step.group_multipliers.array()).matrix();
          st.tau2 = step.tau2;
          model.history.push_back({iter, step});
          model.cvl_trace.push_back({iter, part.id, cvl_candidate, true});
          current = fit_bundle(X, y, lambda, composed, opts.irls);
        } else {
          // roll back (nothing was applied) and retire this partition
          model.cvl_trace.push_back({iter, part.id, cvl_candidate, false});
          st.active = false;
        }
      } catch (const std::exception& e) {
        throw std::runtime_error("grridge: iteration " + std::to_string(iter) + ", partition " +
                                 part.id + ": " + e.what());
      }
    }
    if (!any_active) break;
  }

  model.composed = composed;
  model.final_fit = current.fit;
  if (opts.selection) {
    model.selection = select_posthoc(model, X, y, folds, *opts.selection, opts.irls, opts.threads);
  }
  return model;
}

Eigen::VectorXd predict(const GRridgeModel& model, const DesignMatrix& Xnew, bool use_selected) {
  Xnew.validate();
  const std::vector<std::string>* wanted = &model.variable_ids;
  const RidgeFit* fit = &model.final_fit;
  std::vector<std::string> selected_ids;
  if (use_selected) {
    if (!model.selection) throw std::invalid_argument("predict: model has no selection results");
    for (int idx : model.selection->indices) selected_ids.push_back(model.variable_ids[static_cast<std::size_t>(idx)]);
    wanted = &selected_ids;
    fit = &model.selection->fit;
  }

  std::unordered_map<std::string, int> col_of;
  for (std::size_t j = 0; j < Xnew.variable_ids.size(); ++j) col_of.emplace(Xnew.variable_ids[j], static_cast<int>(j));
  std::vector<int> cols;
  std::vector<std::string> missing;
  for (const std::string& id : *wanted) {
    auto it = col_of.find(id);
    if (it == col_of.end()) {
      missing.push_back(id);
    } else {
      cols.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    std::string msg = "predict: new data is missing model variables:";
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i) msg += " " + missing[i];
    if (missing.size() > 5) msg += " (+" + std::to_string(missing.size() - 5) + " more)";
    throw std::invalid_argument(msg);
  }

  Eigen::VectorXd eta = Eigen::VectorXd::Constant(Xnew.n(), fit->intercept);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    eta += Xnew.values.col(cols[j]) * fit->coefficients[static_cast<Eigen::Index>(j)];
  }
  if (model.response_kind == ResponseKind::binary) {
    return eta.unaryExpr([](double v) { return expit(v); });
  }
  return eta;
}

SelectionResult select_posthoc(const GRridgeModel& model, const DesignMatrix& X,
                               const Response& y, const FoldPlan& folds,
                               const SelectionConfig& cfg, const IrlsOptions& irls, int threads) {
  const Eigen::Index p = X.p();
  if (static_cast<Eigen::Index>(model.variable_ids.size()) != p) {
    throw std::invalid_argument("select_posthoc: model/data variable count mismatch");
  }
  if (cfg.p_max < 1) throw std::invalid_argument("select_posthoc: p_max must be >= 1");
  if (!(cfg.q_marg >= 0.0 && cfg.q_marg < 1.0)) throw std::invalid_argument("select_posthoc: q_marg must lie in [0,1)");
  const int p_max = std::min<int>(cfg.p_max, static_cast<int>(p));

  // rank by |beta| descending, ties by index
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd& beta = model.final_fit.coefficients;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double fa = std::abs(beta[a]), fb = std::abs(beta[b]);
    if (fa != fb) return fa > fb;
    return a < b;
  });

  std::vector<int> schedule;
  for (int s = 1; s <= std::min(cfg.dense_until, p_max); ++s) schedule.push_back(s);
  for (int s = cfg.dense_until + cfg.stride; s < p_max; s += cfg.stride) schedule.push_back(s);
  if (schedule.back() != p_max) schedule.push_back(p_max);

  const auto top_columns = [&](int s) {
    std::vector<int> cols(order.begin(), order.begin() + s);
    std::sort(cols.begin(), cols.end());
    return cols;
  };

  SelectionResult result;
  for (int s : schedule) {
    const std::vector<int> cols = top_columns(s);
    const DesignMatrix Xs = X.select_columns(cols);
    Eigen::VectorXd mult(s);
    for (int j = 0; j < s; ++j) mult[j] = model.composed[cols[static_cast<std::size_t>(j)]];
    double value;
    try {
      value = cvl(Xs, y, model.lambda, mult, folds, irls, threads);
    } catch (const std::exception&) {
      value = -std::numeric_limits<double>::infinity();
    }
    result.cvl_curve.emplace_back(s, value);
  }

  const int s_sel = select_by_margin(result.cvl_curve, cfg.q_marg);
  result.indices = top_columns(s_sel);
  for (const auto& [s, value] : result.cvl_curve) {
    if (s == s_sel) result.cvl = value;
  }
  const DesignMatrix Xs = X.select_columns(result.indices);
  Eigen::VectorXd mult(s_sel);
  for (int j = 0; j < s_sel; ++j) mult[j] = model.composed[result.indices[static_cast<std::size_t>(j)]];
  PenaltyConfig penalty;
  penalty.lambda_global = model.lambda;
  penalty.multipliers = mult;
  result.fit = y.kind == ResponseKind::binary ? irls_fit(Xs, y, penalty, irls)
                                              : linear_fit(Xs, y, penalty, irls.include_intercept);
  return result;
}

int select_by_margin(const std::vector<std::pair<int, double>>& cvl_curve, double q_marg) {
  double cvl_max = -std::numeric_limits<double>::infinity();
  for (const auto& [s, value] : cvl_curve) {
    if (std::isfinite(value) && value > cvl_max) cvl_max = value;
  }
  if (!std::isfinite(cvl_max)) throw std::runtime_error("selection: all subset CVLs non-finite");
  const double threshold = cvl_max - q_marg * std::abs(cvl_max);
  for (const auto& [s, value] : cvl_curve) {
    if (std::isfinite(value) && value >= threshold) return s;
  }
  return cvl_curve.back().first;
}

std::vector<std::pair<std::vector<int>, double>> grridge_order_scan(
    const DesignMatrix& X, const Response& y, const std::vector<Partition>& partitions,
    double lambda, const GRridgeOptions& opts) {
  std::vector<int> order(partitions.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::pair<std::vector<int>, double>> results;
  do {
    std::vector<Partition> permuted;
    for (int i : order) permuted.push_back(partitions[static_cast<std::size_t>(i)]);
    GRridgeOptions run = opts;
    run.selection.reset();
    const GRridgeModel model = grridge(X, y, permuted, lambda, run);
    double final_cvl = model.cvl_trace.front().cvl;
    for (const CvlTraceEntry& e : model.cvl_trace) {
      if (e.accepted) final_cvl = e.cvl;
    }
    results.emplace_back(order, final_cvl);
  } while (std::next_permutation(order.begin(), order.end()));
  return results;
}

ordered_json model_to_json(const GRridgeModel& model) {
  ordered_json j;
  j["format"] = "grridge-model";
  j["version"] = 1;
  j["response_kind"] = model.response_kind == ResponseKind::binary ? "binary" : "continuous";
  j["lambda"] = model.lambda;
  j["variable_ids"] = model.variable_ids;
  j["final_fit"] = fit_to_json(model.final_fit);
  j["composed_multipliers"] = to_std(model.composed);
  j["base_multipliers"] = to_std(model.base_multipliers);

  ordered_json parts = ordered_json::array();
  for (const PartitionState& st : model.partitions) {
    parts.push_back(ordered_json{{"partition", partition_to_json(st.partition)},
                                 {"multipliers", to_std(st.multipliers)},
                                 {"tau2", to_std(st.tau2)},
                                 {"active", st.active}});
  }
  j["partitions"] = parts;

  ordered_json hist = ordered_json::array();
  for (const AcceptedStep& step : model.history) {
    hist.push_back(ordered_json{{"iteration", step.iteration},
                                {"partition_id", step.multipliers.partition_id},
                                {"group_multipliers", to_std(step.multipliers.group_multipliers)},
                                {"tau2", to_std(step.multipliers.tau2)}});
  }
  j["multiplier_history"] = hist;

  ordered_json trace = ordered_json::array();
  for (const CvlTraceEntry& e : model.cvl_trace) {
    trace.push_back(ordered_json{{"iteration", e.iteration},
                                 {"partition", e.partition_id},
                                 {"cvl", e.cvl},
                                 {"accepted", e.accepted}});
  }
  j["cvl_trace"] = trace;

  if (model.selection) {
    ordered_json curve = ordered_json::array();
    for (const auto& [s, value] : model.selection->cvl_curve) {
      curve.push_back(ordered_json{{"s", s}, {"cvl", value}});
    }
    j["selection"] = ordered_json{{"indices", model.selection->indices},
                                  {"fit", fit_to_json(model.selection->fit)},
                                  {"cvl", model.selection->cvl},
                                  {"cvl_curve", curve}};
  } else {
    j["selection"] = nullptr;
  }
  return j;
}

GRridgeModel model_from_json(const ordered_json& j) {
  if (j.value("format", "") != "grridge-model") throw std::invalid_argument("model_from_json: not a model document");
  GRridgeModel model;
  model.response_kind = j.at("response_kind").get<std::string>() == "binary"
                            ? ResponseKind::binary
                            : ResponseKind::continuous;
  model.lambda = j.at("lambda").get<double>();
  model.variable_ids = j.at("variable_ids").get<std::vector<std::string>>();
  model.final_fit = fit_from_json(j.at("final_fit"));
  model.composed = from_std(j.at("composed_multipliers").get<std::vector<double>>());
  model.base_multipliers = from_std(j.at("base_multipliers").get<std::vector<double>>());
  for (const auto& pj : j.at("partitions")) {
    PartitionState st;
    st.partition = partition_from_json(pj.at("partition"));
    st.multipliers = from_std(pj.at("multipliers").get<std::vector<double>>());
    st.tau2 = from_std(pj.at("tau2").get<std::vector<double>>());
    st.active = pj.at("active").get<bool>();
    model.partitions.push_back(std::move(st));
  }
  for (const auto& hj : j.at("multiplier_history")) {
    AcceptedStep step;
    step.iteration = hj.at("iteration").get<int>();
    step.multipliers.partition_id = hj.at("partition_id").get<std::string>();
    step.multipliers.group_multipliers = from_std(hj.at("group_multipliers").get<std::vector<double>>());
    step.multipliers.tau2 = from_std(hj.at("tau2").get<std::vector<double>>());
    model.history.push_back(std::move(step));
  }
  for (const auto& tj : j.at("cvl_trace")) {
    model.cvl_trace.push_back({tj.at("iteration").get<int>(),
                               tj.at("partition").get<std::string>(), tj.at("cvl").get<double>(),
                               tj.at("accepted").get<bool>()});
  }
  if (!j.at("selection").is_null()) {
    SelectionResult sel;
    sel.indices = j.at("selection").at("indices").get<std::vector<int>>();
    sel.fit = fit_from_json(j.at("selection").at("fit"));
    sel.cvl = j.at("selection").at("cvl").get<double>();
    for (const auto& cj : j.at("selection").at("cvl_curve")) {
      sel.cvl_curve.emplace_back(cj.at("s").get<int>(), cj.at("cvl").get<double>());
    }
    model.selection = std::move(sel);
  }
  return model;
}

}  // namespace grridge
