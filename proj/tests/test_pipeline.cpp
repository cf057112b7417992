#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "gmsl/pipeline.hpp"

using namespace gmsl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const fs::path p =
      fs::temp_directory_path() / ("gmsl_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
  REQUIRE(out.good());
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("GMSL_CLI");
  REQUIRE(cli != nullptr);
  const int rc = std::system((std::string(cli) + " " + args + " >/dev/null 2>&1").c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

int run_in_process(CliOptions opts) {
  std::ostringstream log;
  try {
    return run_command(opts, log);
  } catch (const Error& e) {
    return exit_code_for(e);
  }
}

CliOptions synth_opts(const fs::path& out) {
  CliOptions opts;
  opts.subcommand = "synth";
  opts.out_dir = out.string();
  opts.seed = 404;
  opts.events = 80;
  opts.records_per_event = "12";
  opts.tau = 0.0;
  opts.phi = 0.1;
  return opts;
}

} // namespace

TEST_CASE("in-process commands and the CLI produce identical bytes") {
  const fs::path a = fresh_dir("inproc");
  const fs::path b = fresh_dir("cli");

  REQUIRE(run_in_process(synth_opts(a)) == 0);
  REQUIRE(run_cli("synth --out " + b.string() +
                  " --seed 404 --events 80 --records-per-event 12 --tau 0 --phi 0.1") == 0);
  REQUIRE(slurp(a / "synth.csv") == slurp(b / "synth.csv"));

  CliOptions fit;
  fit.subcommand = "fit";
  fit.in_path = (a / "synth.csv").string();
  fit.out_dir = (a / "fit").string();
  REQUIRE(run_in_process(fit) == 0);
  REQUIRE(run_cli("fit --in " + (b / "synth.csv").string() + " --out " + (b / "fit").string()) ==
          0);
  REQUIRE(slurp(a / "fit" / "model.json") == slurp(b / "fit" / "model.json"));
  REQUIRE(slurp(a / "fit" / "equation.txt") == slurp(b / "fit" / "equation.txt"));
  REQUIRE(slurp(a / "fit" / "sweep.csv") == slurp(b / "fit" / "sweep.csv"));

  // Re-running with the same seed overwrites with the same bytes.
  REQUIRE(run_in_process(synth_opts(a)) == 0);
  REQUIRE(slurp(a / "synth.csv") == slurp(b / "synth.csv"));
}

TEST_CASE("every emitted table starts with the version-and-config comment") {
  const fs::path dir = fresh_dir("comment");
  REQUIRE(run_in_process(synth_opts(dir)) == 0);
  CliOptions ing;
  ing.subcommand = "ingest";
  ing.in_path = (dir / "synth.csv").string();
  ing.out_dir = (dir / "ing").string();
  REQUIRE(run_in_process(ing) == 0);
  for (const fs::path& p : {dir / "synth.csv", dir / "ing" / "filtered.csv"}) {
    const std::string head = slurp(p).substr(0, 64);
    REQUIRE(head.rfind("# gmsl 0.1.0 config=", 0) == 0);
  }
  // The report carries the same hash and the ingest invariant holds.
  const auto report = nlohmann::json::parse(slurp(dir / "ing" / "ingest_report.json"));
  REQUIRE(report.at("config_hash").get<std::string>().size() == 16);
  const auto& parse = report.at("parse");
  REQUIRE(parse.at("rows_read").get<std::size_t>() ==
          parse.at("n_records").get<std::size_t>() + parse.at("rows_dropped").get<std::size_t>());
}

TEST_CASE("ingest of an empty flatfile succeeds with zero records") {
  const fs::path dir = fresh_dir("empty");
  spit(dir / "empty.csv", "");
  CliOptions ing;
  ing.subcommand = "ingest";
  ing.in_path = (dir / "empty.csv").string();
  ing.out_dir = (dir / "out").string();
  REQUIRE(run_in_process(ing) == 0);
  REQUIRE(run_cli("ingest --in " + (dir / "empty.csv").string() + " --out " +
                  (dir / "out2").string()) == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "out" / "ingest_report.json"));
  REQUIRE(report.at("n_records").get<int>() == 0);
  REQUIRE(report.at("parse").at("rows_read").get<int>() == 0);
}

TEST_CASE("missing inputs and models are config errors with exit 2") {
  const fs::path dir = fresh_dir("missing");
  CliOptions opts;
  opts.subcommand = "fit";
  opts.in_path = (dir / "nope.csv").string();
  opts.out_dir = dir.string();
  REQUIRE(run_in_process(opts) == 2);
  REQUIRE(run_cli("fit --in " + (dir / "nope.csv").string() + " --out " + dir.string()) == 2);

  CliOptions res;
  res.subcommand = "residuals";
  res.in_path = (dir / "nope.csv").string();
  res.out_dir = dir.string();
  res.use_builtin = true;
  REQUIRE(run_in_process(res) == 2);

  CliOptions cur;
  cur.subcommand = "curves";
  cur.out_dir = dir.string();
  REQUIRE(run_in_process(cur) == 2);  // neither --model nor --builtin
}

TEST_CASE("fit with an explicit delta skips the sweep") {
  const fs::path dir = fresh_dir("delta");
  REQUIRE(run_in_process(synth_opts(dir)) == 0);
  CliOptions fit;
  fit.subcommand = "fit";
  fit.in_path = (dir / "synth.csv").string();
  fit.out_dir = (dir / "out").string();
  fit.delta = 0.1;
  REQUIRE(run_in_process(fit) == 0);
  REQUIRE(fs::exists(dir / "out" / "model.json"));
  REQUIRE_FALSE(fs::exists(dir / "out" / "sweep.csv"));
  const auto model = nlohmann::json::parse(slurp(dir / "out" / "model.json"));
  REQUIRE(model.at("solver").at("delta").get<double>() == 0.1);
  REQUIRE(model.at("fit").at("n_terms").get<int>() == 7);
}

TEST_CASE("a knee-less sweep marks nothing and fit asks for a delta") {
  // A constant-1.0 intensity column makes y identically zero, so every
  // threshold empties the model: no knee anywhere.
  const fs::path dir = fresh_dir("noknee");
  // Truth with no terms and constant 0 -> ln y = 0 -> pga = 1 everywhere.
  SynthSpec spec;
  spec.truth = PhysicalEquation{};
  spec.n_events = 40;
  spec.records_per_event = {8, 8};
  spec.seed = 5;
  std::ostringstream csv;
  write_records_csv(csv, generate(spec), {"flat"});
  spit(dir / "flat.csv", csv.str());

  CliOptions sweep;
  sweep.subcommand = "sweep";
  sweep.in_path = (dir / "flat.csv").string();
  sweep.out_dir = (dir / "sw").string();
  REQUIRE(run_in_process(sweep) == 0);
  const std::string table = slurp(dir / "sw" / "sweep.csv");
  REQUIRE(table.find(",1\n") == std::string::npos);  // no selected row

  CliOptions fit;
  fit.subcommand = "fit";
  fit.in_path = (dir / "flat.csv").string();
  fit.out_dir = (dir / "fit").string();
  REQUIRE(run_in_process(fit) == 1);
  REQUIRE(run_cli("fit --in " + (dir / "flat.csv").string() + " --out " +
                  (dir / "fit2").string()) == 1);
}

TEST_CASE("sweep marks exactly one selected grid point when a knee exists") {
  const fs::path dir = fresh_dir("swsel");
  REQUIRE(run_in_process(synth_opts(dir)) == 0);
  CliOptions sweep;
  sweep.subcommand = "sweep";
  sweep.in_path = (dir / "synth.csv").string();
  sweep.out_dir = (dir / "sw").string();
  REQUIRE(run_in_process(sweep) == 0);
  const std::string table = slurp(dir / "sw" / "sweep.csv");
  std::size_t marks = 0, pos = 0;
  while ((pos = table.find(",1\n", pos)) != std::string::npos) {
    ++marks;
    pos += 3;
  }
  REQUIRE(marks == 1);
  const auto models = nlohmann::json::parse(slurp(dir / "sw" / "sweep_models.json"));
  REQUIRE(models.at("points").size() == 50);
  const auto idx = models.at("selected_index").get<std::size_t>();
  REQUIRE(models.at("points").at(idx).at("model").at("fit").at("n_terms").get<int>() == 7);
}

TEST_CASE("an empty delta grid is a usage error") {
  const fs::path dir = fresh_dir("badgrid");
  REQUIRE(run_in_process(synth_opts(dir)) == 0);
  spit(dir / "bad.cfg", "[stridge]\ndelta_grid = \n");
  CliOptions sweep;
  sweep.subcommand = "sweep";
  sweep.config_path = (dir / "bad.cfg").string();
  sweep.in_path = (dir / "synth.csv").string();
  sweep.out_dir = (dir / "sw").string();
  REQUIRE(run_in_process(sweep) == 2);
}

TEST_CASE("residuals emits aligned decomposition tables") {
  const fs::path dir = fresh_dir("resid");
  CliOptions synth = synth_opts(dir);
  synth.tau = 0.4;
  synth.phi = 0.6;
  synth.events = 150;
  REQUIRE(run_in_process(synth) == 0);
  CliOptions res;
  res.subcommand = "residuals";
  res.in_path = (dir / "synth.csv").string();
  res.out_dir = (dir / "out").string();
  res.use_builtin = true;
  REQUIRE(run_in_process(res) == 0);

  const auto variance = nlohmann::json::parse(slurp(dir / "out" / "variance.json"));
  REQUIRE(variance.at("tau").get<double>() == Catch::Approx(0.4).margin(0.08));
  REQUIRE(variance.at("phi").get<double>() == Catch::Approx(0.6).margin(0.08));
  REQUIRE(variance.at("n_events").get<int>() == 150);

  const std::string eta = slurp(dir / "out" / "eta.csv");
  REQUIRE(static_cast<int>(std::count(eta.begin(), eta.end(), '\n')) == 150 + 2);
  const std::string eps = slurp(dir / "out" / "epsilon.csv");
  REQUIRE(std::count(eps.begin(), eps.end(), '\n') == 150 * 12 + 2);

  const auto sigma = nlohmann::json::parse(slurp(dir / "out" / "sigma_model.json"));
  REQUIRE(sigma.at("sigma_model").contains("tau1"));
  for (const char* name : {"binned_epsilon_r_jb.csv", "binned_epsilon_v_s30.csv",
                           "binned_epsilon_m_w.csv", "binned_eta_m_w.csv"})
    REQUIRE(fs::exists(dir / "out" / name));
}

TEST_CASE("curves compares against an external table and validates its schema") {
  const fs::path dir = fresh_dir("curves");
  spit(dir / "cmp.csv",
       "series,m_w,v_s30,r_jb,ln_y\n"
       "published,6,760,10,5.26\n"
       "published,6,760,20,4.7\n");
  CliOptions cur;
  cur.subcommand = "curves";
  cur.out_dir = (dir / "out").string();
  cur.use_builtin = true;
  cur.compare_path = (dir / "cmp.csv").string();
  REQUIRE(run_in_process(cur) == 0);
  const std::string table = slurp(dir / "out" / "curves.csv");
  REQUIRE(table.find("pga,model,4,") != std::string::npos);
  REQUIRE(table.find("pga,published,6,760,10,5.26,") != std::string::npos);

  spit(dir / "bad.csv", "series,m_w,v_s30,r_jb\npublished,6,760,10\n");
  cur.compare_path = (dir / "bad.csv").string();
  REQUIRE(run_in_process(cur) == 2);

  spit(dir / "nan.csv", "m_w,v_s30,r_jb,ln_y\n6,760,ten,5.2\n");
  cur.compare_path = (dir / "nan.csv").string();
  REQUIRE(run_in_process(cur) == 2);
}

TEST_CASE("extrapolate needs far-field records") {
  const fs::path dir = fresh_dir("extrap");
  REQUIRE(run_in_process(synth_opts(dir)) == 0);
  CliOptions ext;
  ext.subcommand = "extrapolate";
  ext.in_path = (dir / "synth.csv").string();
  ext.out_dir = (dir / "out").string();
  ext.split_km = 1e5;  // beyond every record
  REQUIRE(run_in_process(ext) == 1);
  ext.split_km = 30.0;
  REQUIRE(run_in_process(ext) == 0);
  for (const char* name : {"model_full.json", "model_far.json", "nearfield.csv", "slopes.json"})
    REQUIRE(fs::exists(dir / "out" / name));
  const auto slopes = nlohmann::json::parse(slurp(dir / "out" / "slopes.json"));
  REQUIRE(slopes.at("split_km").get<double>() == 30.0);
  for (const auto& row : slopes.at("slopes")) {
    REQUIRE(row.at("full").get<double>() <= row.at("bound_full").get<double>() + 1e-9);
    REQUIRE(row.at("far").get<double>() <= row.at("bound_far").get<double>() + 1e-9);
  }
}

TEST_CASE("config filters narrow the ingested dataset") {
  const fs::path dir = fresh_dir("cfgfilter");
  REQUIRE(run_in_process(synth_opts(dir)) == 0);
  spit(dir / "narrow.cfg", "[flatfile]\nm_w_min = 5.0\nm_w_max = 6.0\nmin_records_per_event = 1\n");
  CliOptions ing;
  ing.subcommand = "ingest";
  ing.in_path = (dir / "synth.csv").string();
  ing.out_dir = (dir / "narrow").string();
  ing.config_path = (dir / "narrow.cfg").string();
  REQUIRE(run_in_process(ing) == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "narrow" / "ingest_report.json"));
  REQUIRE(report.at("filter").at("rows_dropped_by_rule").contains("range:m_w"));
  const auto ranges = report.at("filter").at("covariate_ranges");
  REQUIRE(ranges.at("m_w").at("min").get<double>() >= 5.0);
  REQUIRE(ranges.at("m_w").at("max").get<double>() <= 6.0);

  // A different config changes the hash stamped into outputs.
  const std::string narrowed = slurp(dir / "narrow" / "filtered.csv");
  CliOptions plain = ing;
  plain.config_path.clear();
  plain.out_dir = (dir / "plain").string();
  REQUIRE(run_in_process(plain) == 0);
  const std::string full = slurp(dir / "plain" / "filtered.csv");
  REQUIRE(narrowed.substr(0, 40) != full.substr(0, 40));
}

TEST_CASE("the records-per-event flag accepts a range") {
  const fs::path dir = fresh_dir("countrange");
  REQUIRE(run_cli("synth --out " + dir.string() +
                  " --seed 12 --events 30 --records-per-event 3..5 --tau 0 --phi 0.1") == 0);
  std::ifstream in(dir / "synth.csv");
  const auto parsed = parse_flatfile(in);
  std::map<std::string, int> counts;
  for (const auto& r : parsed.records) ++counts[r.event_id];
  REQUIRE(counts.size() == 30);
  for (const auto& [id, n] : counts) {
    REQUIRE(n >= 3);
    REQUIRE(n <= 5);
  }
  REQUIRE(run_cli("synth --out " + dir.string() + " --records-per-event nonsense") == 2);
}

TEST_CASE("the im flag selects the pgv column end to end") {
  const fs::path dir = fresh_dir("impgv");
  CliOptions synth = synth_opts(dir);
  synth.im = "pgv";
  REQUIRE(run_in_process(synth) == 0);
  CliOptions fit;
  fit.subcommand = "fit";
  fit.in_path = (dir / "synth.csv").string();
  fit.out_dir = (dir / "fit").string();
  fit.im = "pgv";
  REQUIRE(run_in_process(fit) == 0);
  const auto model = nlohmann::json::parse(slurp(dir / "fit" / "model.json"));
  REQUIRE(model.at("equation").at("im").get<std::string>() == "pgv");
  const std::string text = slurp(dir / "fit" / "equation.txt");
  REQUIRE(text.find("ln(PGV) = ") != std::string::npos);
}
