#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmsl/config.hpp"
#include "gmsl/csv.hpp"
#include "gmsl/design.hpp"
#include "gmsl/equation.hpp"
#include "gmsl/errors.hpp"
#include "gmsl/flatfile.hpp"
#include "gmsl/mixedfx.hpp"
#include "gmsl/numeric.hpp"
#include "gmsl/records.hpp"
#include "gmsl/stridge.hpp"
#include "gmsl/synth.hpp"
#include "gmsl/terms.hpp"
#include "gmsl/version.hpp"

namespace gmsl {

// Options collected from the command line. Value-bearing flags are overlaid
// onto the config file (so the config hash covers them); paths never enter
// the hash, which keeps outputs byte-identical across directory layouts.
struct CliOptions {
  std::string subcommand;
  std::string config_path;
  std::string in_path;
  std::string out_dir = ".";
  std::string model_path;
  std::string compare_path;
  bool use_builtin = false;
  std::optional<std::string> im;
  std::optional<std::uint64_t> seed;
  std::optional<double> delta;
  std::optional<double> split_km;
  std::optional<long long> events;
  std::optional<std::string> records_per_event;  // a count or a lo..hi range
  std::optional<double> tau;
  std::optional<double> phi;
};

namespace pipeline {

inline Config effective_config(const CliOptions& opts) {
  Config cfg = opts.config_path.empty() ? Config{} : Config::from_file(opts.config_path);
  if (opts.im) cfg.set("cli", "im", *opts.im);
  if (opts.seed) cfg.set("synth", "seed", std::to_string(*opts.seed));
  if (opts.delta) cfg.set("stridge", "delta", format_double(*opts.delta));
  if (opts.split_km) cfg.set("extrapolate", "split_km", format_double(*opts.split_km));
  if (opts.events) cfg.set("synth", "events", std::to_string(*opts.events));
  if (opts.records_per_event) cfg.set("synth", "records_per_event", *opts.records_per_event);
  if (opts.tau) cfg.set("synth", "tau", format_double(*opts.tau));
  if (opts.phi) cfg.set("synth", "phi", format_double(*opts.phi));
  return cfg;
}

inline IntensityMeasure target_im(const Config& cfg) {
  return im_parse(cfg.get("cli", "im", "pga"));
}

inline ParseOptions parse_options_from_config(const Config& cfg) {
  ParseOptions opt;
  for (const auto& field : ColumnMap::field_names()) {
    const std::string mapped = cfg.get("flatfile", "column." + field, field);
    opt.columns.columns[field] = mapped;
  }
  opt.missing_sentinels = cfg.get_list("flatfile", "missing_sentinels", {"NaN", "-999"});
  opt.pga_scale = cfg.get_double("flatfile", "pga_scale", 1.0);
  opt.pgv_scale = cfg.get_double("flatfile", "pgv_scale", 1.0);
  return opt;
}

inline FilterCriteria criteria_from_config(const Config& cfg) {
  FilterCriteria c;
  auto bound = [&](const std::string& field, Bound fallback) {
    Bound b = fallback;
    b.lo = cfg.get_double("flatfile", field + "_min", fallback.lo);
    b.hi = cfg.get_double("flatfile", field + "_max", fallback.hi);
    if (!(b.lo <= b.hi)) throw ConfigError("flatfile " + field + " range is inverted");
    return b;
  };
  c.m_w_range = bound("m_w", Bound{});
  c.r_jb_range = bound("r_jb", Bound{});
  c.v_s30_range = bound("v_s30", Bound{});
  c.depth_range = bound("depth", Bound{1.0, 20.0});
  const long long min_records = cfg.get_int("flatfile", "min_records_per_event", 5);
  if (min_records < 1) throw ConfigError("min_records_per_event must be at least 1");
  c.min_records_per_event = static_cast<int>(min_records);
  c.require_fields = cfg.get_list("flatfile", "require_fields", c.require_fields);
  for (const auto& f : c.require_fields) {
    bool known = false;
    for (const auto& name : numeric_field_names()) known = known || name == f;
    if (!known) throw ConfigError("flatfile require_fields names unknown field '" + f + "'");
  }
  return c;
}

inline TermLibrary library_from_config(const Config& cfg) {
  TermLibrary lib = default_library();
  lib.v_s30_reference = cfg.get_double("library", "v_s30_reference", 1500.0);
  if (cfg.has("library", "terms")) {
    lib.terms.clear();
    for (const auto& descr : cfg.get_list("library", "terms", {}))
      lib.terms.push_back(TermSpec::parse(descr));
  }
  lib.validate();
  return lib;
}

inline NormMode norm_mode_from_config(const Config& cfg) {
  return norm_mode_parse(cfg.get("library", "normalization", "maxabs"));
}

inline SolverConfig solver_from_config(const Config& cfg) {
  SolverConfig s;
  s.lambda = cfg.get_double("stridge", "lambda", 1e-7);
  s.max_iterations = static_cast<int>(cfg.get_int("stridge", "max_iterations", 25));
  s.final_refit_unregularized = cfg.get_bool("stridge", "final_refit_unregularized", true);
  s.delta = cfg.get_double("stridge", "delta", 0.0);
  s.validate();
  return s;
}

struct Dataset {
  std::vector<GroundMotionRecord> records;
  IngestReport parse_report;
  IngestReport filter_report;
};

inline Dataset load_dataset(const std::string& path, const Config& cfg) {
  if (path.empty()) throw ConfigError("no input dataset given (use --in)");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset: " + path);
  ParseResult parsed = parse_flatfile(in, parse_options_from_config(cfg));
  ParseResult filtered = filter_records(parsed.records, criteria_from_config(cfg));
  return {std::move(filtered.records), std::move(parsed.report), std::move(filtered.report)};
}

inline std::string version_comment(const Config& cfg) {
  return std::string(kToolName) + " " + kVersion + " config=" + cfg.hash_hex();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path.string());
  out << content;
  if (!out.good()) throw ConfigError("failed while writing: " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline std::filesystem::path prepare_out_dir(const CliOptions& opts) {
  std::filesystem::path dir(opts.out_dir.empty() ? "." : opts.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory: " + dir.string());
  return dir;
}

inline nlohmann::json provenance_header(const Config& cfg) {
  return {{"tool", kToolName}, {"version", kVersion}, {"config_hash", cfg.hash_hex()}};
}

// Model source for subcommands that evaluate an equation: --builtin picks
// the published fixture for the target intensity measure, --model loads a
// fitted JSON file.
inline PhysicalEquation resolve_model(const CliOptions& opts, const Config& cfg) {
  const IntensityMeasure im = target_im(cfg);
  if (opts.use_builtin && !opts.model_path.empty())
    throw ConfigError("--builtin and --model are mutually exclusive");
  if (opts.use_builtin) {
    const auto builtins = builtin_models();
    return im == IntensityMeasure::PGA ? builtins.pga : builtins.pgv;
  }
  if (opts.model_path.empty()) throw ConfigError("no model given (use --model or --builtin)");
  std::ifstream in(opts.model_path);
  if (!in) throw ConfigError("cannot read model: " + opts.model_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed model JSON in " + opts.model_path + ": " + e.what());
  }
  if (j.contains("equation")) j = j.at("equation");
  PhysicalEquation eq = equation_from_json(j);
  if (static_cast<int>(eq.im) != static_cast<int>(im) && cfg.has("cli", "im"))
    throw ConfigError(std::string("model is for ") + im_name(eq.im) + " but --im asked for " +
                      im_name(im));
  return eq;
}

inline std::string sweep_csv(const ThresholdSweep& sweep, std::optional<std::size_t> selected,
                             const Config& cfg) {
  std::ostringstream out;
  out << "# " << version_comment(cfg) << "\n";
  out << "delta,n_terms,rss,r_squared,selected\n";
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const auto& p = sweep.points[i];
    out << format_double(p.delta) << ',' << p.n_terms << ',';
    if (p.model)
      out << format_double(p.model->fit_stats.rss) << ',' << format_double(p.model->fit_stats.r_squared);
    else
      out << ',';
    out << ',' << (selected && *selected == i ? 1 : 0) << '\n';
  }
  return out.str();
}

inline nlohmann::json model_to_json(const SparseModel& model, const DesignMatrix& matrix,
                                    const Config& cfg) {
  nlohmann::json j = provenance_header(cfg);
  j["equation"] = equation_to_json(model.physical);
  j["equation_text"] = equation_text(model.physical);
  j["fit"] = {{"rss", model.fit_stats.rss},
              {"r_squared", model.fit_stats.r_squared},
              {"n_terms", model.fit_stats.n_terms}};
  j["solver"] = {{"lambda", model.config.lambda},
                 {"delta", model.config.delta},
                 {"max_iterations", model.config.max_iterations},
                 {"final_refit_unregularized", model.config.final_refit_unregularized}};
  j["support"] = model.support;
  std::vector<double> xi(model.xi_normalized.data(),
                         model.xi_normalized.data() + model.xi_normalized.size());
  j["xi_normalized"] = xi;
  j["normalization"] = {{"mode", norm_mode_name(matrix.norm.mode)},
                        {"shift", matrix.norm.shift},
                        {"scale", matrix.norm.scale}};
  std::vector<std::string> terms;
  for (const auto& t : matrix.library.terms) terms.push_back(t.to_string());
  j["library"] = terms;
  j["n_records"] = matrix.theta.rows();
  return j;
}

// Shared fit flow: an explicit delta skips the sweep; otherwise sweep the
// grid and select the knee. Returns the model plus the sweep when one ran.
struct FitOutcome {
  SparseModel model;
  std::optional<ThresholdSweep> sweep;
  std::optional<std::size_t> selected;
};

inline FitOutcome fit_with_selection(const DesignMatrix& matrix, const Config& cfg,
                                     bool explicit_delta) {
  SolverConfig solver = solver_from_config(cfg);
  FitOutcome out;
  if (explicit_delta) {
    out.model = stridge_fit(matrix, solver);
    return out;
  }
  const std::vector<double> grid = cfg.get_grid("stridge", "delta_grid", default_delta_grid());
  ThresholdSweep sweep = threshold_sweep(matrix, solver.lambda, grid, solver);
  const std::size_t idx = select_threshold_index(sweep);
  out.model = *sweep.points[idx].model;
  out.selected = idx;
  out.sweep = std::move(sweep);
  return out;
}

inline int cmd_ingest(const CliOptions& opts, const Config& cfg, std::ostream& log) {
  const auto out_dir = prepare_out_dir(opts);
  Dataset ds = load_dataset(opts.in_path, cfg);
  std::ostringstream csv;
  write_records_csv(csv, ds.records, {version_comment(cfg)});
  write_text_file(out_dir / "filtered.csv", csv.str());
  nlohmann::json j = provenance_header(cfg);
  j["parse"] = ds.parse_report.to_json();
  j["filter"] = ds.filter_report.to_json();
  j["n_records"] = ds.records.size();
  write_json_file(out_dir / "ingest_report.json", j);
  log << "ingest: " << ds.records.size() << " records, " << ds.filter_report.n_events
      << " events, " << ds.filter_report.n_stations << " stations\n";
  return 0;
}

inline int cmd_fit(const CliOptions& opts, const Config& cfg, std::ostream& log) {
  const auto out_dir = prepare_out_dir(opts);
  Dataset ds = load_dataset(opts.in_path, cfg);
  const DesignMatrix matrix = build_design_matrix(ds.records, library_from_config(cfg),
                                                  target_im(cfg), norm_mode_from_config(cfg));
  const bool explicit_delta = opts.delta.has_value() || cfg.has("stridge", "delta");
  FitOutcome fit = fit_with_selection(matrix, cfg, explicit_delta);
  if (fit.sweep) write_text_file(out_dir / "sweep.csv", sweep_csv(*fit.sweep, fit.selected, cfg));
  write_json_file(out_dir / "model.json", model_to_json(fit.model, matrix, cfg));
  const std::string text = equation_text(fit.model.physical) + "\nv = V_S30/" +
                           format_double(matrix.library.v_s30_reference) + "\n";
  write_text_file(out_dir / "equation.txt", text);
  log << equation_text(fit.model.physical) << "\n";
  return 0;
}

inline int cmd_sweep(const CliOptions& opts, const Config& cfg, std::ostream& log) {
  const auto out_dir = prepare_out_dir(opts);
  Dataset ds = load_dataset(opts.in_path, cfg);
  const DesignMatrix matrix = build_design_matrix(ds.records, library_from_config(cfg),
                                                  target_im(cfg), norm_mode_from_config(cfg));
  SolverConfig solver = solver_from_config(cfg);
  const std::vector<double> grid = cfg.get_grid("stridge", "delta_grid", default_delta_grid());
  ThresholdSweep sweep = threshold_sweep(matrix, solver.lambda, grid, solver);
  std::optional<std::size_t> selected;
  try {
    selected = select_threshold_index(sweep);
  } catch (const NoKneeError&) {
    // No defensible knee: emit the sweep with nothing marked.
  }
  write_text_file(out_dir / "sweep.csv", sweep_csv(sweep, selected, cfg));
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : sweep.points) {
    nlohmann::json entry{{"delta", p.delta}, {"n_terms", p.n_terms}};
    if (p.model) entry["model"] = model_to_json(*p.model, matrix, cfg);
    points.push_back(std::move(entry));
  }
  nlohmann::json j = provenance_header(cfg);
  j["lambda"] = sweep.lambda;
  j["points"] = points;
  j["monotonicity_violations"] = sweep.monotonicity_violations;
  if (selected) j["selected_index"] = *selected;
  write_json_file(out_dir / "sweep_models.json", j);
  if (selected)
    log << "sweep: selected delta = " << format_double(sweep.points[*selected].delta) << "\n";
  else
    log << "sweep: no knee; pass an explicit --delta to fit\n";
  return 0;
}

inline int cmd_residuals(const CliOptions& opts, const Config& cfg, std::ostream& log) {
  const auto out_dir = prepare_out_dir(opts);
  Dataset ds = load_dataset(opts.in_path, cfg);
  const PhysicalEquation eq = resolve_model(opts, cfg);
  std::vector<double> residuals;
  residuals.reserve(ds.records.size());
  for (const auto& r : ds.records) residuals.push_back(std::log(im_value(r, eq.im)) - predict(eq, r));
  const auto groups = group_residuals(ds.records, residuals);
  const VarianceEstimate est = estimate_variance_components(groups);
  const ResidualDecomposition dec = decompose(groups, est.tau, std::max(est.phi, 1e-8));

  std::ostringstream eta_csv;
  eta_csv << "# " << version_comment(cfg) << "\n";
  eta_csv << "event_id,m_w,n_records,eta\n";
  for (const auto& g : groups)
    eta_csv << g.event_id << ',' << format_double(g.m_w) << ',' << g.residuals.size() << ','
            << format_double(dec.eta_for(g.event_id)) << '\n';
  write_text_file(out_dir / "eta.csv", eta_csv.str());

  std::ostringstream eps_csv;
  eps_csv << "# " << version_comment(cfg) << "\n";
  eps_csv << "record_id,event_id,m_w,r_jb,v_s30,epsilon\n";
  std::vector<double> eps_flat(ds.records.size(), 0.0);
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (std::size_t k = 0; k < groups[gi].residuals.size(); ++k)
      eps_flat[groups[gi].record_index[k]] = dec.epsilon[gi][k];
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    eps_csv << i << ',' << r.event_id << ',' << format_double(r.m_w) << ','
            << format_double(r.r_jb) << ',' << format_double(r.v_s30) << ','
            << format_double(eps_flat[i]) << '\n';
  }
  write_text_file(out_dir / "epsilon.csv", eps_csv.str());

  nlohmann::json vj = provenance_header(cfg);
  vj["tau"] = est.tau;
  vj["phi"] = est.phi;
  vj["log_likelihood"] = est.log_likelihood;
  vj["degenerate"] = est.degenerate;
  vj["tau_at_boundary"] = est.tau_at_boundary;
  vj["n_events"] = groups.size();
  vj["n_records"] = ds.records.size();
  write_json_file(out_dir / "variance.json", vj);

  const SigmaModel sigma = fit_sigma_model(groups, dec);
  nlohmann::json sj = provenance_header(cfg);
  sj["sigma_model"] = sigma.to_json();
  sj["im"] = im_name(eq.im);
  write_json_file(out_dir / "sigma_model.json", sj);

  auto emit_bins = [&](const std::string& name, const std::vector<double>& values,
                       const std::vector<double>& by, const std::vector<double>& edges,
                       BinSpacing spacing) {
    const auto stats = binned_residual_stats(values, by, edges, spacing);
    std::ostringstream bcsv;
    bcsv << "# " << version_comment(cfg) << "\n";
    bcsv << "bin_center,mean,sd,count\n";
    for (const auto& b : stats)
      bcsv << format_double(b.center) << ',' << format_double(b.mean) << ','
           << format_double(b.sd) << ',' << b.count << '\n';
    write_text_file(out_dir / name, bcsv.str());
  };
  std::vector<double> rec_m, rec_r, rec_v;
  for (const auto& r : ds.records) {
    rec_m.push_back(r.m_w);
    rec_r.push_back(r.r_jb);
    rec_v.push_back(r.v_s30);
  }
  emit_bins("binned_epsilon_r_jb.csv", eps_flat, rec_r,
            cfg.get_grid("mixedfx", "r_jb_bins", log_spaced(1.0, 400.0, 13)), BinSpacing::Log);
  emit_bins("binned_epsilon_v_s30.csv", eps_flat, rec_v,
            cfg.get_grid("mixedfx", "v_s30_bins", log_spaced(89.0, 1500.0, 13)), BinSpacing::Log);
  emit_bins("binned_epsilon_m_w.csv", eps_flat, rec_m,
            cfg.get_grid("mixedfx", "m_w_bins", linear_spaced(3.0, 7.6, 11)), BinSpacing::Linear);
  std::vector<double> eta_values, eta_m;
  for (const auto& g : groups) {
    eta_values.push_back(dec.eta_for(g.event_id));
    eta_m.push_back(g.m_w);
  }
  emit_bins("binned_eta_m_w.csv", eta_values, eta_m,
            cfg.get_grid("mixedfx", "m_w_bins", linear_spaced(3.0, 7.6, 11)), BinSpacing::Linear);

  log << "residuals: tau = " << format_double(est.tau) << ", phi = " << format_double(est.phi)
      << " over " << groups.size() << " events\n";
  return 0;
}

inline ScenarioGrid scenario_from_config(const Config& cfg, const std::string& section) {
  ScenarioGrid grid;
  grid.m_w = cfg.get_grid(section, "m_w", grid.m_w);
  grid.v_s30 = cfg.get_grid(section, "v_s30", grid.v_s30);
  grid.r_jb = cfg.get_grid(section, "r_jb", grid.r_jb);
  const long long fm = cfg.get_int(section, "fm", 1);
  if (fm < 1 || fm > 3) throw ConfigError(section + ".fm must be 1, 2, or 3");
  grid.fm = static_cast<int>(fm);
  grid.z_1_0 = cfg.get_double(section, "z_1_0", 100.0);
  grid.validate();
  return grid;
}

inline int cmd_curves(const CliOptions& opts, const Config& cfg, std::ostream& log) {
  const auto out_dir = prepare_out_dir(opts);
  const PhysicalEquation eq = resolve_model(opts, cfg);
  const ScenarioGrid grid = scenario_from_config(cfg, "curves");
  const auto points = attenuation_curves(eq, grid);
  std::ostringstream csv;
  csv << "# " << version_comment(cfg) << "\n";
  csv << "im,series,m_w,v_s30,r_jb,ln_y,y\n";
  const char* im = im_name(eq.im);
  for (const auto& p : points)
    csv << im << ",model," << format_double(p.m_w) << ',' << format_double(p.v_s30) << ','
        << format_double(p.r_jb) << ',' << format_double(p.ln_y) << ','
        << format_double(std::exp(p.ln_y)) << '\n';

  if (!opts.compare_path.empty()) {
    std::ifstream in(opts.compare_path);
    if (!in) throw ConfigError("cannot read comparison CSV: " + opts.compare_path);
    CsvReader reader(in);
    std::vector<std::string> row;
    if (!reader.next(row)) throw ConfigError("comparison CSV is empty");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < row.size(); ++i) index[std::string(trim(row[i]))] = i;
    for (const char* col : {"m_w", "v_s30", "r_jb", "ln_y"})
      if (index.find(col) == index.end())
        throw ConfigError(std::string("comparison CSV lacks column '") + col + "'");
    const auto series_it = index.find("series");
    const std::size_t width = row.size();
    while (reader.next(row)) {
      if (row.size() != width)
        throw ParseError(reader.line(), "comparison CSV row has wrong field count");
      auto cell = [&](const char* col) {
        double v = 0.0;
        if (!try_parse_double(trim(row[index[col]]), v))
          throw ParseError(reader.line(), std::string("comparison CSV column '") + col +
                                              "': not a number: '" + row[index[col]] + "'");
        return v;
      };
      const double m = cell("m_w"), v = cell("v_s30"), r = cell("r_jb"), ln_y = cell("ln_y");
      const std::string series =
          series_it != index.end() ? std::string(trim(row[series_it->second])) : "comparison";
      csv << im << ',' << series << ',' << format_double(m) << ',' << format_double(v) << ','
          << format_double(r) << ',' << format_double(ln_y) << ','
          << format_double(std::exp(ln_y)) << '\n';
    }
  }
  write_text_file(out_dir / "curves.csv", csv.str());
  log << "curves: " << points.size() << " model points\n";
  return 0;
}

inline int cmd_extrapolate(const CliOptions& opts, const Config& cfg, std::ostream& log) {
  const auto out_dir = prepare_out_dir(opts);
  Dataset ds = load_dataset(opts.in_path, cfg);
  const double split = cfg.get_double("extrapolate", "split_km", 30.0);
  if (!(split > 0.0)) throw ConfigError("extrapolate.split_km must be positive");
  std::vector<GroundMotionRecord> far;
  for (const auto& r : ds.records)
    if (r.r_jb >= split) far.push_back(r);
  if (far.empty())
    throw DomainError("no records at r_jb >= " + format_double(split) + "; cannot train the far-field model");

  const TermLibrary lib = library_from_config(cfg);
  const IntensityMeasure im = target_im(cfg);
  const NormMode mode = norm_mode_from_config(cfg);
  const bool explicit_delta = opts.delta.has_value() || cfg.has("stridge", "delta");
  const DesignMatrix full_matrix = build_design_matrix(ds.records, lib, im, mode);
  const DesignMatrix far_matrix = build_design_matrix(far, lib, im, mode);
  FitOutcome full_fit = fit_with_selection(full_matrix, cfg, explicit_delta);
  FitOutcome far_fit = fit_with_selection(far_matrix, cfg, explicit_delta);
  write_json_file(out_dir / "model_full.json", model_to_json(full_fit.model, full_matrix, cfg));
  write_json_file(out_dir / "model_far.json", model_to_json(far_fit.model, far_matrix, cfg));

  ScenarioGrid grid;
  grid.m_w = cfg.get_grid("extrapolate", "m_w", {4.0, 5.0, 6.0, 7.0});
  grid.v_s30 = cfg.get_grid("extrapolate", "v_s30", {760.0});
  // The near-field table covers (0, split) by default; an explicit grid must
  // stay on that side of the cut too.
  grid.r_jb = cfg.get_grid("extrapolate", "r_jb", linear_spaced(split / 60.0, split * 59.0 / 60.0, 59));
  const long long fm = cfg.get_int("extrapolate", "fm", 1);
  if (fm < 1 || fm > 3) throw ConfigError("extrapolate.fm must be 1, 2, or 3");
  grid.fm = static_cast<int>(fm);
  grid.z_1_0 = cfg.get_double("extrapolate", "z_1_0", 100.0);
  grid.validate();
  for (double r : grid.r_jb)
    if (!(r < split)) throw ConfigError("extrapolate.r_jb grid must stay below split_km");

  std::ostringstream csv;
  csv << "# " << version_comment(cfg) << "\n";
  csv << "im,m_w,v_s30,r_jb,ln_full,ln_far\n";
  for (double m : grid.m_w)
    for (double v : grid.v_s30)
      for (double r : grid.r_jb)
        csv << im_name(im) << ',' << format_double(m) << ',' << format_double(v) << ','
            << format_double(r) << ','
            << format_double(predict(full_fit.model.physical, m, r, v, grid.fm, grid.z_1_0)) << ','
            << format_double(predict(far_fit.model.physical, m, r, v, grid.fm, grid.z_1_0)) << '\n';
  write_text_file(out_dir / "nearfield.csv", csv.str());

  nlohmann::json slopes = nlohmann::json::array();
  const double v0 = grid.v_s30.front();
  for (double m : grid.m_w) {
    slopes.push_back({{"m_w", m},
                      {"full", near_field_slope(full_fit.model.physical, m, v0, grid.fm, grid.z_1_0)},
                      {"far", near_field_slope(far_fit.model.physical, m, v0, grid.fm, grid.z_1_0)},
                      {"bound_full", saturation_bound(full_fit.model.physical, m)},
                      {"bound_far", saturation_bound(far_fit.model.physical, m)}});
  }
  nlohmann::json j = provenance_header(cfg);
  j["split_km"] = split;
  j["n_records_full"] = ds.records.size();
  j["n_records_far"] = far.size();
  j["slopes"] = slopes;
  write_json_file(out_dir / "slopes.json", j);
  log << "extrapolate: far subset " << far.size() << "/" << ds.records.size() << " records\n";
  return 0;
}

inline int cmd_synth(const CliOptions& opts, const Config& cfg, std::ostream& log) {
  const auto out_dir = prepare_out_dir(opts);
  SynthSpec spec;
  const std::string truth = cfg.get("synth", "truth", "builtin");
  if (truth == "builtin") {
    const auto builtins = builtin_models();
    spec.truth = target_im(cfg) == IntensityMeasure::PGA ? builtins.pga : builtins.pgv;
  } else {
    CliOptions model_opts = opts;
    model_opts.use_builtin = false;
    model_opts.model_path = truth;
    spec.truth = resolve_model(model_opts, cfg);
  }
  spec.n_events = static_cast<int>(cfg.get_int("synth", "events", 250));
  const std::string count = cfg.get("synth", "records_per_event", "20");
  const auto dots = count.find("..");
  long long lo = 0, hi = 0;
  if (dots == std::string::npos) {
    if (!try_parse_long(count, lo)) throw ConfigError("synth.records_per_event: not a count: " + count);
    hi = lo;
  } else if (!try_parse_long(count.substr(0, dots), lo) ||
             !try_parse_long(count.substr(dots + 2), hi)) {
    throw ConfigError("synth.records_per_event: malformed range: " + count);
  }
  spec.records_per_event = {static_cast<int>(lo), static_cast<int>(hi)};
  spec.tau = cfg.get_double("synth", "tau", 0.0);
  spec.phi = cfg.get_double("synth", "phi", 0.0);
  spec.seed = static_cast<std::uint64_t>(cfg.get_int("synth", "seed", 0));
  auto range_u = [&](const char* key, Uniform fallback) {
    return Uniform{cfg.get_double("synth", std::string(key) + "_lo", fallback.lo),
                   cfg.get_double("synth", std::string(key) + "_hi", fallback.hi)};
  };
  auto range_lu = [&](const char* key, LogUniform fallback) {
    return LogUniform{cfg.get_double("synth", std::string(key) + "_lo", fallback.lo),
                      cfg.get_double("synth", std::string(key) + "_hi", fallback.hi)};
  };
  spec.covariates.m_w = range_u("m_w", spec.covariates.m_w);
  spec.covariates.r_jb = range_lu("r_jb", spec.covariates.r_jb);
  spec.covariates.v_s30 = range_lu("v_s30", spec.covariates.v_s30);
  spec.covariates.z_1_0 = range_lu("z_1_0", spec.covariates.z_1_0);
  spec.covariates.depth = range_u("depth", spec.covariates.depth);

  const auto records = generate(spec);
  std::ostringstream csv;
  write_records_csv(csv, records, {version_comment(cfg)});
  write_text_file(out_dir / "synth.csv", csv.str());
  log << "synth: " << records.size() << " records over " << spec.n_events << " events\n";
  return 0;
}

} // namespace pipeline

// Dispatches one subcommand; throws gmsl errors on failure, which the CLI
// maps to exit codes (1 domain/estimation, 2 config/IO).
inline int run_command(const CliOptions& opts, std::ostream& log) {
  const Config cfg = pipeline::effective_config(opts);
  if (opts.subcommand == "ingest") return pipeline::cmd_ingest(opts, cfg, log);
  if (opts.subcommand == "fit") return pipeline::cmd_fit(opts, cfg, log);
  if (opts.subcommand == "sweep") return pipeline::cmd_sweep(opts, cfg, log);
  if (opts.subcommand == "residuals") return pipeline::cmd_residuals(opts, cfg, log);
  if (opts.subcommand == "curves") return pipeline::cmd_curves(opts, cfg, log);
  if (opts.subcommand == "extrapolate") return pipeline::cmd_extrapolate(opts, cfg, log);
  if (opts.subcommand == "synth") return pipeline::cmd_synth(opts, cfg, log);
  throw ConfigError("unknown subcommand: " + opts.subcommand);
}

} // namespace gmsl
