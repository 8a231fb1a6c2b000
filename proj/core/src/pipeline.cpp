#include "dendrostate/pipeline.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dendrostate/csv.hpp"
#include "dendrostate/errors.hpp"
#include "dendrostate/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dendrostate {

Stage stage_from_string(const std::string& name) {
  if (name == "simulate") return Stage::simulate;
  if (name == "water-balance") return Stage::water_balance;
  if (name == "select") return Stage::select;
  if (name == "fit-fce") return Stage::fit_fce;
  if (name == "fit-vce") return Stage::fit_vce;
  if (name == "classify") return Stage::classify;
  if (name == "report") return Stage::report;
  throw ConfigError("unknown stage: '" + name + "'");
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::simulate: return "simulate";
    case Stage::water_balance: return "water-balance";
    case Stage::select: return "select";
    case Stage::fit_fce: return "fit-fce";
    case Stage::fit_vce: return "fit-vce";
    case Stage::classify: return "classify";
    case Stage::report: return "report";
  }
  return "?";
}

std::vector<Stage> parse_stage_list(const std::string& csv_list) {
  std::vector<Stage> stages;
  std::stringstream ss(csv_list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) stages.push_back(stage_from_string(item));
  }
  if (stages.empty()) throw ConfigError("no stages given");
  return stages;
}

namespace {

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / p).string();
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str(), path, fs::path(path).parent_path().string());
}

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin,
                                    const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  RunConfig c;
  c.output_dir = resolve_path(base_dir, get_or<std::string>(j, "output_dir", "out"));
  c.rings_csv = resolve_path(base_dir, get_or<std::string>(j, "rings_csv", ""));
  c.monthly_climate_csv =
      resolve_path(base_dir, get_or<std::string>(j, "monthly_climate_csv", ""));
  c.seasonal_climate_csv =
      resolve_path(base_dir, get_or<std::string>(j, "seasonal_climate_csv", ""));
  c.calendar_file = resolve_path(base_dir, get_or<std::string>(j, "calendar_file", ""));

  if (j.contains("study_window")) {
    const json& w = j.at("study_window");
    c.window.start_year = get_or<int>(w, "start_year", 1897);
    c.window.end_year = get_or<int>(w, "end_year", 2007);
    if (c.window.start_year >= c.window.end_year) {
      throw ConfigError("study_window.start_year must precede end_year");
    }
  }
  if (j.contains("water_balance")) {
    const json& w = j.at("water_balance");
    c.water_balance.awc_mm = get_or<double>(w, "awc_mm", 150.0);
    c.water_balance.snow_temp_c = get_or<double>(w, "snow_temp_c", 0.0);
    c.water_balance.rain_temp_c = get_or<double>(w, "rain_temp_c", 6.0);
    c.water_balance.melt_temp_c = get_or<double>(w, "melt_temp_c", 6.0);
    if (c.water_balance.awc_mm <= 0) throw ConfigError("water_balance.awc_mm must be positive");
  }
  if (j.contains("spline")) {
    const json& s = j.at("spline");
    c.spline.n_interior_knots = get_or<int>(s, "n_interior_knots", 10);
    c.spline.degree = get_or<int>(s, "degree", 3);
    c.spline.penalty_order = get_or<int>(s, "penalty_order", 2);
  }
  c.selected_variables = get_or<std::vector<std::string>>(j, "selected_variables", {});

  if (j.contains("sampler")) {
    const json& s = j.at("sampler");
    c.sampler.iterations = get_or<int>(s, "iterations", 1500);
    c.sampler.burn_in = get_or<int>(s, "burn_in", 500);
    c.sampler.thinning = get_or<int>(s, "thinning", 1);
    c.sampler.chains = get_or<int>(s, "chains", 1);
    c.sampler.seed = get_or<std::uint64_t>(s, "seed", 1);
    c.sampler.threads = get_or<int>(s, "threads", 1);
    c.sampler.store_alpha = get_or<bool>(s, "store_alpha", true);
    std::string mode = get_or<std::string>(s, "window_mode", "strict");
    if (mode == "strict") {
      c.plan.mode = WindowPlan::Mode::strict;
    } else if (mode == "windowed") {
      c.plan.mode = WindowPlan::Mode::windowed;
    } else {
      throw ConfigError("sampler.window_mode must be 'strict' or 'windowed'");
    }
    c.chain_format = get_or<std::string>(s, "chain_format", "csv");
    if (c.chain_format != "csv" && c.chain_format != "binary") {
      throw ConfigError("sampler.chain_format must be 'csv' or 'binary'");
    }
    c.sampler.validate();
  }
  if (j.contains("priors")) {
    const json& p = j.at("priors");
    c.priors.variance_shape = get_or<double>(p, "variance_shape", 0.01);
    c.priors.variance_rate = get_or<double>(p, "variance_rate", 0.01);
    c.priors.coef_sd = get_or<double>(p, "coef_sd", 10.0);
    c.priors.phi_proposal_sd = get_or<double>(p, "phi_proposal_sd", 0.08);
    c.priors.phi_steps = get_or<int>(p, "phi_steps", 2);
    if (!(c.priors.coef_sd > 0)) throw ConfigError("priors.coef_sd must be positive");
  }
  if (j.contains("lasso")) {
    const json& l = j.at("lasso");
    c.lasso.iterations = get_or<int>(l, "iterations", 4000);
    c.lasso.burn_in = get_or<int>(l, "burn_in", 1000);
    c.lasso.thinning = get_or<int>(l, "thinning", 1);
    c.lasso.ci_level = get_or<double>(l, "ci_level", 0.90);
    c.lasso.lambda2_shape = get_or<double>(l, "lambda2_shape", 1.0);
    c.lasso.lambda2_rate = get_or<double>(l, "lambda2_rate", 1.78);
    if (!(c.lasso.ci_level > 0 && c.lasso.ci_level < 1)) {
      throw ConfigError("lasso.ci_level must be in (0,1)");
    }
  }
  if (j.contains("thresholds")) {
    for (auto it = j.at("thresholds").begin(); it != j.at("thresholds").end(); ++it) {
      c.thresholds.quantiles[it.key()] = it.value().get<double>();
    }
    c.thresholds.validate();
  }
  if (j.contains("classifier")) {
    const json& cl = j.at("classifier");
    c.classifier.ci_level = get_or<double>(cl, "ci_level", 0.95);
    c.classifier.r2_cut = get_or<double>(cl, "r2_cut", 0.25);
    c.classifier.window_half_width = get_or<int>(cl, "window_half_width", 2);
    if (!(c.classifier.ci_level > 0 && c.classifier.ci_level < 1)) {
      throw ConfigError("classifier.ci_level must be in (0,1)");
    }
  }
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    c.synth.n_trees = get_or<int>(s, "n_trees", 200);
    c.synth.n_stands = get_or<int>(s, "n_stands", 20);
    c.synth.n_years = get_or<int>(s, "n_years", 60);
    c.synth.p = get_or<int>(s, "p", 5);
    std::string path_kind = get_or<std::string>(s, "path", "constant");
    if (path_kind == "constant") {
      c.synth.path = SynthConfig::Path::constant;
    } else if (path_kind == "step") {
      c.synth.path = SynthConfig::Path::step;
    } else if (path_kind == "ramp") {
      c.synth.path = SynthConfig::Path::ramp;
    } else {
      throw ConfigError("synth.path must be constant|step|ramp");
    }
    c.synth.step_year_index = get_or<int>(s, "step_year_index", -1);
    c.synth.step_component = get_or<int>(s, "step_component", 0);
    c.synth.step_to = get_or<double>(s, "step_to", -0.6);
    c.synth.sigma2_pe = get_or<double>(s, "sigma2_pe", 0.29);
    c.synth.phi = get_or<double>(s, "phi", 0.37);
    c.synth.tau2 = get_or<double>(s, "tau2", 0.05);
    c.synth.staggered_recruitment = get_or<bool>(s, "staggered_recruitment", true);
    c.synth.start_year = get_or<int>(s, "start_year", 1948);
    if (j.at("synth").contains("theta")) {
      auto v = j.at("synth").at("theta").get<std::vector<double>>();
      c.synth.theta = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    c.synth.validate();
  }
  if (j.contains("partial_residual_ranges")) {
    for (const auto& pair : j.at("partial_residual_ranges")) {
      auto v = pair.get<std::vector<int>>();
      if (v.size() != 2) throw ConfigError("partial_residual_ranges entries must be [lo, hi]");
      c.partial_residual_ranges.emplace_back(v[0], v[1]);
    }
  }
  c.rhat_warn = get_or<double>(j, "rhat_warn", 1.1);
  return c;
}

// ---------------------------------------------------------------------
// Manifest

namespace {

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash missing file: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class Manifest {
 public:
  Manifest(const std::string& output_dir, std::uint64_t seed) : path_(fs::path(output_dir) / "manifest.json") {
    if (fs::exists(path_)) {
      std::ifstream in(path_);
      try {
        in >> doc_;
      } catch (const json::exception&) {
        doc_ = json::object();
      }
    }
    doc_["tool"] = "dendrostate";
    doc_["version"] = kToolVersion;
    doc_["seed"] = seed;
    if (!doc_.contains("stages")) doc_["stages"] = json::object();
  }

  void record(Stage stage, const std::vector<std::string>& inputs,
              const std::vector<std::string>& outputs) {
    json entry;
    entry["inputs"] = json::object();
    for (const auto& in : inputs) {
      if (!in.empty()) entry["inputs"][fs::path(in).filename().string()] = hex64(fnv1a_file(in));
    }
    entry["outputs"] = json::array();
    for (const auto& out : outputs) entry["outputs"].push_back(fs::path(out).filename().string());
    doc_["stages"][to_string(stage)] = std::move(entry);
    std::ofstream out(path_);
    out << doc_.dump(2) << "\n";
  }

 private:
  fs::path path_;
  json doc_;
};

struct StageContext {
  const RunConfig* config;
  fs::path out;
  bool convergence_warning = false;

  std::string artifact(const std::string& name) const { return (out / name).string(); }
  void require(const std::string& path, const std::string& producer) const {
    if (!fs::exists(path)) {
      throw DataError("missing artifact '" + path + "': run the " + producer +
                      " stage first (or point the config at an existing file)");
    }
  }
};

std::string rings_path(const StageContext& ctx) {
  if (!ctx.config->rings_csv.empty()) return ctx.config->rings_csv;
  return ctx.artifact("rings.csv");
}

std::string seasonal_path(const StageContext& ctx) {
  if (!ctx.config->seasonal_climate_csv.empty()) return ctx.config->seasonal_climate_csv;
  return ctx.artifact("seasonal_climate.csv");
}

// ---------------------------------------------------------------------
// Stages

void stage_simulate(StageContext& ctx, Manifest& manifest) {
  SynthConfig sc = ctx.config->synth;
  sc.seed = hash_label(ctx.config->sampler.seed, "simulate");
  SynthData data = simulate(sc);
  std::string rings_out = ctx.artifact("rings.csv");
  save_rings(rings_out, data.rings);
  std::string climate_out = ctx.artifact("seasonal_climate.csv");
  write_seasonal_csv(climate_out, data.climate, data.climate);
  std::string truth_out = ctx.artifact("truth.csv");
  write_truth_csv(truth_out, sc, data.truth);
  manifest.record(Stage::simulate, {}, {rings_out, climate_out, truth_out});
}

void stage_water_balance(StageContext& ctx, Manifest& manifest) {
  if (ctx.config->monthly_climate_csv.empty()) {
    throw ConfigError("water-balance stage needs monthly_climate_csv in the config");
  }
  ctx.require(ctx.config->monthly_climate_csv, "data-preparation");
  std::vector<MonthlyClimate> rows = read_monthly_climate(ctx.config->monthly_climate_csv);
  std::map<std::string, std::vector<MonthlyClimate>> by_stand;
  for (auto& r : rows) by_stand[r.stand_id].push_back(r);
  std::vector<WaterBalanceSeries> series;
  for (auto& [stand, recs] : by_stand) {
    series.push_back(run_water_balance(recs, ctx.config->water_balance));
  }
  SeasonalClimate raw = aggregate_seasonal(series);
  SeasonalClimate z = standardize(raw);
  std::string monthly_out = ctx.artifact("monthly_water_balance.csv");
  write_monthly_water_balance(monthly_out, series);
  std::string seasonal_out = ctx.artifact("seasonal_climate.csv");
  write_seasonal_csv(seasonal_out, raw, z);
  std::string params_out = ctx.artifact("standardization_params.csv");
  write_standardization_params(params_out, z);
  manifest.record(Stage::water_balance, {ctx.config->monthly_climate_csv},
                  {monthly_out, seasonal_out, params_out});
}

void stage_select(StageContext& ctx, Manifest& manifest) {
  std::string rings = rings_path(ctx);
  std::string seasonal = seasonal_path(ctx);
  ctx.require(rings, "simulate (or supply rings_csv)");
  ctx.require(seasonal, "water-balance or simulate");
  std::vector<RingSeries> series = load_rings(rings);
  SeasonalClimate z = read_seasonal_csv(seasonal, /*standardized=*/true);
  LassoInput input = build_lasso_input(series, z, ctx.config->window, ctx.config->spline);
  BlassoConfig lc = ctx.config->lasso;
  lc.seed = hash_label(ctx.config->sampler.seed, "select");
  BlassoResult result = fit_blasso(input.response, input.regressors, input.names, lc);
  std::string summary_out = ctx.artifact("lasso_summary.csv");
  write_lasso_summary(summary_out, result);
  manifest.record(Stage::select, {rings, seasonal}, {summary_out});
}

std::vector<std::string> selection_for_fit(const StageContext& ctx) {
  if (!ctx.config->selected_variables.empty()) return ctx.config->selected_variables;
  std::string summary = ctx.artifact("lasso_summary.csv");
  ctx.require(summary, "select (or set selected_variables in the config)");
  std::vector<std::string> vars = read_selected_variables(summary);
  if (vars.empty()) {
    throw DataError("the select stage chose no variables; set selected_variables explicitly");
  }
  return vars;
}

ModelDesign build_design(const StageContext& ctx, const std::vector<RingSeries>& series,
                         const SeasonalClimate& z, const std::vector<std::string>& vars) {
  AssembleOptions opts;
  opts.spline = ctx.config->spline;
  opts.window = ctx.config->window;
  return assemble(series, z, vars, opts);
}

void check_convergence(StageContext& ctx, const PosteriorChain& chain,
                       const std::vector<std::string>& scalar_blocks) {
  for (const auto& name : scalar_blocks) {
    if (!chain.has_block(name)) continue;
    const auto& block = chain.block(name);
    for (std::size_t dim = 0; dim < block.labels.size(); ++dim) {
      std::vector<Eigen::VectorXd> per_chain;
      for (int c = 0; c < chain.n_chains(); ++c) {
        int filled = block.fill.empty() ? 0 : block.fill[static_cast<std::size_t>(c)];
        per_chain.push_back(block.draws[static_cast<std::size_t>(c)]
                                .col(static_cast<Eigen::Index>(dim))
                                .head(filled));
      }
      try {
        Diagnostics d = compute_diagnostics(per_chain);
        if (d.rhat > ctx.config->rhat_warn) {
          ctx.convergence_warning = true;
          std::cerr << "convergence warning: " << name << "[" << block.labels[dim]
                    << "] rhat=" << d.rhat << "\n";
        }
      } catch (const ConfigError&) {
        // too few draws for diagnostics; not a warning by itself
      }
    }
  }
}

void write_alpha_mean_csv(const std::string& path, const ModelDesign& design,
                          const Eigen::VectorXd& alpha_mean) {
  CsvWriter w(path, {"stand_id", "year", "alpha_mean"});
  for (int c = 0; c < design.n_cells(); ++c) {
    auto [j, t] = design.cells[static_cast<std::size_t>(c)];
    w.row({design.stand_ids[static_cast<std::size_t>(j)],
           format_number(static_cast<long long>(design.window.start_year + t)),
           format_number(alpha_mean[c])});
  }
}

Eigen::VectorXd read_alpha_mean_csv(const std::string& path, const ModelDesign& design) {
  CsvTable t = CsvTable::read_file(path);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(design.n_cells());
  std::map<std::string, int> stand_index;
  for (int j = 0; j < design.n_stands(); ++j) {
    stand_index[design.stand_ids[static_cast<std::size_t>(j)]] = j;
  }
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto it = stand_index.find(t.cell(r, "stand_id"));
    if (it == stand_index.end()) continue;
    int year = static_cast<int>(t.integer(r, "year"));
    if (!design.window.contains(year)) continue;
    int cell = design.cell_index(it->second, year - design.window.start_year);
    if (cell >= 0) alpha[cell] = t.num(r, t.column("alpha_mean"));
  }
  return alpha;
}

void write_fitted_trend_csv(const std::string& path, const ModelDesign& design,
                            const std::vector<Eigen::VectorXd>& fitted) {
  CsvWriter w(path, {"tree_id", "year", "trend"});
  for (std::size_t s = 0; s < design.segments.size(); ++s) {
    const auto& seg = design.segments[s];
    for (int r = 0; r < seg.rows(); ++r) {
      w.row({design.tree_ids[static_cast<std::size_t>(seg.tree)],
             format_number(static_cast<long long>(design.window.start_year + seg.first_t + r)),
             format_number(fitted[s][r])});
    }
  }
}

std::vector<Eigen::VectorXd> read_fitted_trend_csv(const std::string& path,
                                                   const ModelDesign& design) {
  CsvTable t = CsvTable::read_file(path);
  std::map<std::pair<std::string, int>, double> values;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    values[{t.cell(r, "tree_id"), static_cast<int>(t.integer(r, "year"))}] =
        t.num(r, t.column("trend"));
  }
  std::vector<Eigen::VectorXd> fitted(design.segments.size());
  for (std::size_t s = 0; s < design.segments.size(); ++s) {
    const auto& seg = design.segments[s];
    fitted[s].resize(seg.rows());
    for (int r = 0; r < seg.rows(); ++r) {
      auto it = values.find({design.tree_ids[static_cast<std::size_t>(seg.tree)],
                             design.window.start_year + seg.first_t + r});
      if (it == values.end()) {
        throw DataError(path + ": missing fitted trend for a design observation");
      }
      fitted[s][r] = it->second;
    }
  }
  return fitted;
}

void write_theta_moments_csv(const std::string& path, const PosteriorChain& chain,
                             const std::vector<std::string>& vars) {
  const Eigen::Index p = static_cast<Eigen::Index>(vars.size());
  Eigen::VectorXd mean_vec = chain.posterior_mean("theta");
  std::vector<std::vector<double>> draws(static_cast<std::size_t>(p));
  for (Eigen::Index v = 0; v < p; ++v) draws[static_cast<std::size_t>(v)] = chain.pooled("theta", static_cast<int>(v));
  std::size_t n = draws.front().size();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd d(p);
    for (Eigen::Index v = 0; v < p; ++v) d[v] = draws[static_cast<std::size_t>(v)][i] - mean_vec[v];
    cov += d * d.transpose();
  }
  if (n > 1) cov /= static_cast<double>(n - 1);
  std::vector<std::string> header = {"row"};
  for (const auto& v : vars) header.push_back(v);
  CsvWriter w(path, header);
  std::vector<std::string> mrow = {"mean"};
  for (Eigen::Index v = 0; v < p; ++v) mrow.push_back(format_number(mean_vec[v]));
  w.row(mrow);
  for (Eigen::Index i = 0; i < p; ++i) {
    std::vector<std::string> crow = {"cov:" + vars[static_cast<std::size_t>(i)]};
    for (Eigen::Index k = 0; k < p; ++k) crow.push_back(format_number(cov(i, k)));
    w.row(crow);
  }
}

bool read_theta_moments_csv(const std::string& path, const std::vector<std::string>& vars,
                            Eigen::VectorXd& mean_out, Eigen::MatrixXd& cov_out) {
  if (!fs::exists(path)) return false;
  CsvTable t = CsvTable::read_file(path);
  for (const auto& v : vars) {
    if (!t.has_column(v)) return false;  // different variable set; ignore
  }
  const Eigen::Index p = static_cast<Eigen::Index>(vars.size());
  mean_out.resize(p);
  cov_out.resize(p, p);
  bool have_mean = false;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const std::string& tag = t.cell(r, "row");
    if (tag == "mean") {
      for (Eigen::Index v = 0; v < p; ++v) {
        mean_out[v] = t.num(r, t.column(vars[static_cast<std::size_t>(v)]));
      }
      have_mean = true;
    } else if (tag.rfind("cov:", 0) == 0) {
      std::string var = tag.substr(4);
      auto it = std::find(vars.begin(), vars.end(), var);
      if (it == vars.end()) return false;
      Eigen::Index i = it - vars.begin();
      for (Eigen::Index k = 0; k < p; ++k) {
        cov_out(i, k) = t.num(r, t.column(vars[static_cast<std::size_t>(k)]));
      }
    }
  }
  return have_mean;
}

void write_chain_outputs(const StageContext& ctx, const std::string& prefix,
                         const PosteriorChain& chain) {
  if (ctx.config->chain_format == "binary") {
    write_chain_binary(ctx.artifact(prefix + "_chain.bin"), chain);
  } else {
    write_chain_csv(ctx.artifact(prefix), chain);
  }
  write_summary_csv(ctx.artifact(prefix + "_summary.csv"), summarize_chain(chain));
}

void stage_fit_fce(StageContext& ctx, Manifest& manifest) {
  std::string rings = rings_path(ctx);
  std::string seasonal = seasonal_path(ctx);
  ctx.require(rings, "simulate (or supply rings_csv)");
  ctx.require(seasonal, "water-balance or simulate");
  std::vector<RingSeries> series = load_rings(rings);
  SeasonalClimate z = read_seasonal_csv(seasonal, true);
  std::vector<std::string> vars = selection_for_fit(ctx);
  ModelDesign design = build_design(ctx, series, z, vars);
  write_design_summary(ctx.artifact("design_summary.csv"), design);

  FceConfig fc;
  fc.mcmc = ctx.config->sampler;
  fc.mcmc.seed = hash_label(ctx.config->sampler.seed, "fit-fce");
  fc.priors = ctx.config->priors;
  FceFit fit = FceSampler(design, fc).fit();

  write_theta_summary(ctx.artifact("theta_summary.csv"), fit.chain, vars);
  write_theta_moments_csv(ctx.artifact("fce_theta_moments.csv"), fit.chain, vars);
  write_alpha_mean_csv(ctx.artifact("fce_alpha_mean.csv"), design,
                       fit.chain.posterior_mean("alpha"));
  write_fitted_trend_csv(ctx.artifact("fce_fitted_trend.csv"), design, fit.fitted_trend_mean);
  write_chain_outputs(ctx, "fce", fit.chain);
  check_convergence(ctx, fit.chain, {"theta", "sigma2_pe", "phi", "tau2", "sigma2_beta"});
  manifest.record(Stage::fit_fce, {rings, seasonal},
                  {ctx.artifact("theta_summary.csv"), ctx.artifact("fce_summary.csv"),
                   ctx.artifact("fce_alpha_mean.csv"), ctx.artifact("fce_fitted_trend.csv"),
                   ctx.artifact("design_summary.csv")});
}

void stage_fit_vce(StageContext& ctx, Manifest& manifest) {
  std::string rings = rings_path(ctx);
  std::string seasonal = seasonal_path(ctx);
  ctx.require(rings, "simulate (or supply rings_csv)");
  ctx.require(seasonal, "water-balance or simulate");
  std::vector<RingSeries> series = load_rings(rings);
  SeasonalClimate z = read_seasonal_csv(seasonal, true);
  std::vector<std::string> vars = selection_for_fit(ctx);
  ModelDesign design = build_design(ctx, series, z, vars);

  VceConfig vc;
  vc.mcmc = ctx.config->sampler;
  vc.mcmc.seed = hash_label(ctx.config->sampler.seed, "fit-vce");
  vc.priors = ctx.config->priors;
  vc.plan = ctx.config->plan;
  // Anchor theta_0 at the fixed-model posterior when one is available.
  Eigen::VectorXd m0;
  Eigen::MatrixXd c0;
  if (read_theta_moments_csv(ctx.artifact("fce_theta_moments.csv"), vars, m0, c0)) {
    vc.theta0_mean = m0;
    vc.theta0_cov = 10.0 * c0 +
                    1e-6 * Eigen::MatrixXd::Identity(m0.size(), m0.size());
  }
  VceFit fit = VceSampler(design, vc).fit();

  std::vector<TrajectoryRow> rows = summarize_trajectory(
      fit.chain, design, ctx.config->classifier.window_half_width,
      ctx.config->classifier.ci_level);
  write_trajectory_csv(ctx.artifact("theta_trajectory.csv"), rows);
  write_alpha_mean_csv(ctx.artifact("vce_alpha_mean.csv"), design,
                       fit.chain.posterior_mean("alpha"));
  write_fitted_trend_csv(ctx.artifact("vce_fitted_trend.csv"), design, fit.fitted_trend_mean);
  write_chain_outputs(ctx, "vce", fit.chain);
  check_convergence(ctx, fit.chain, {"sigma2_pe", "phi", "tau2", "sigma2_beta"});
  manifest.record(Stage::fit_vce, {rings, seasonal},
                  {ctx.artifact("theta_trajectory.csv"), ctx.artifact("vce_summary.csv"),
                   ctx.artifact("vce_alpha_mean.csv"), ctx.artifact("vce_fitted_trend.csv")});
}

void stage_classify(StageContext& ctx, Manifest& manifest) {
  std::string trajectory_path = ctx.artifact("theta_trajectory.csv");
  ctx.require(trajectory_path, "fit-vce");
  std::string rings = rings_path(ctx);
  std::string seasonal = seasonal_path(ctx);
  ctx.require(rings, "simulate (or supply rings_csv)");
  ctx.require(seasonal, "water-balance or simulate");

  std::vector<TrajectoryRow> trajectory = read_trajectory_csv(trajectory_path);
  std::vector<RingSeries> series = load_rings(rings);
  SeasonalClimate raw = read_seasonal_csv(seasonal, /*standardized=*/false);
  SeasonalClimate z = read_seasonal_csv(seasonal, /*standardized=*/true);
  std::vector<std::string> vars;
  for (const auto& row : trajectory) {
    if (std::find(vars.begin(), vars.end(), row.variable) == vars.end()) {
      vars.push_back(row.variable);
    }
  }
  ModelDesign design = build_design(ctx, series, z, vars);

  DisturbanceCalendar calendar = ctx.config->calendar_file.empty()
                                     ? DisturbanceCalendar::ftc_defaults()
                                     : DisturbanceCalendar::parse_file(ctx.config->calendar_file);
  AnnualClimate annual = stand_mean_climate(raw);
  std::vector<ResponseLabel> labels =
      classify(trajectory, ctx.config->thresholds, annual, calendar, ctx.config->classifier);
  write_labels_csv(ctx.artifact("labels.csv"), labels);

  std::vector<ExceedanceRecord> exceedances = exceedance_report(
      annual, ctx.config->thresholds, labels, ctx.config->classifier.window_half_width);
  write_exceedances_csv(ctx.artifact("exceedances.csv"), exceedances);

  // Partial residuals over the configured ranges, defaulting to outbreak
  // intervals that overlap a disturbance-classified response.
  std::vector<std::pair<int, int>> ranges = ctx.config->partial_residual_ranges;
  if (ranges.empty()) {
    for (const auto& iv : calendar.outbreaks) {
      bool overlaps = false;
      for (const auto& label : labels) {
        if (label.category == ResponseCategory::disturbance && label.year >= iv.start_year &&
            label.year <= iv.end_year) {
          overlaps = true;
          break;
        }
      }
      if (overlaps) ranges.emplace_back(iv.start_year, iv.end_year);
    }
  }
  std::string vce_trend = ctx.artifact("vce_fitted_trend.csv");
  std::string vce_alpha = ctx.artifact("vce_alpha_mean.csv");
  std::vector<PartialResidualRow> residual_rows;
  if (fs::exists(vce_trend) && fs::exists(vce_alpha) && !ranges.empty()) {
    std::vector<Eigen::VectorXd> fitted = read_fitted_trend_csv(vce_trend, design);
    Eigen::VectorXd alpha_mean = read_alpha_mean_csv(vce_alpha, design);
    for (auto [lo, hi] : ranges) {
      lo = std::max(lo, design.window.start_year);
      hi = std::min(hi, design.window.end_year);
      if (lo > hi) continue;
      auto rows = partial_residuals(design, fitted, alpha_mean, lo, hi,
                                    calendar.host_species);
      residual_rows.insert(residual_rows.end(), rows.begin(), rows.end());
    }
  }
  write_partial_residuals_csv(ctx.artifact("partial_residuals.csv"), residual_rows);

  write_initiation_curve_csv(ctx.artifact("initiation_curve.csv"),
                             initiation_curve(labels, design));
  manifest.record(Stage::classify, {trajectory_path, rings, seasonal},
                  {ctx.artifact("labels.csv"), ctx.artifact("exceedances.csv"),
                   ctx.artifact("partial_residuals.csv"), ctx.artifact("initiation_curve.csv")});
}

void stage_report(StageContext& ctx, Manifest& manifest) {
  fs::path report_dir = ctx.out / "report";
  fs::create_directories(report_dir);
  struct Item {
    const char* source;
    const char* target;
    const char* producer;
  };
  const Item items[] = {
      {"theta_summary.csv", "fig3_fce_coefficients.csv", "fit-fce"},
      {"theta_trajectory.csv", "fig4_coefficient_evolution.csv", "fit-vce"},
      {"exceedances.csv", "fig5_exceedances.csv", "classify"},
      {"partial_residuals.csv", "fig6_partial_residuals.csv", "classify"},
      {"initiation_curve.csv", "fig7_initiation_curve.csv", "classify"},
  };
  std::vector<std::string> inputs, outputs;
  for (const Item& item : items) {
    std::string src = ctx.artifact(item.source);
    ctx.require(src, item.producer);
    fs::copy_file(src, report_dir / item.target, fs::copy_options::overwrite_existing);
    inputs.push_back(src);
    outputs.push_back((report_dir / item.target).string());
  }
  manifest.record(Stage::report, inputs, outputs);
}

}  // namespace

int run_pipeline(const RunConfig& config, const std::vector<Stage>& stages,
                 std::string* error_message) {
  try {
    StageContext ctx;
    ctx.config = &config;
    ctx.out = config.output_dir;
    fs::create_directories(ctx.out);
    Manifest manifest(config.output_dir, config.sampler.seed);
    for (Stage stage : stages) {
      switch (stage) {
        case Stage::simulate: stage_simulate(ctx, manifest); break;
        case Stage::water_balance: stage_water_balance(ctx, manifest); break;
        case Stage::select: stage_select(ctx, manifest); break;
        case Stage::fit_fce: stage_fit_fce(ctx, manifest); break;
        case Stage::fit_vce: stage_fit_vce(ctx, manifest); break;
        case Stage::classify: stage_classify(ctx, manifest); break;
        case Stage::report: stage_report(ctx, manifest); break;
      }
    }
    return ctx.convergence_warning ? 4 : 0;
  } catch (const ConfigError& e) {
    if (error_message) *error_message = e.what();
    return 2;
  } catch (const DataError& e) {
    if (error_message) *error_message = e.what();
    return 3;
  } catch (const NumericError& e) {
    if (error_message) *error_message = e.what();
    return 3;
  }
}

}  // namespace dendrostate
