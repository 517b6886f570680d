#include "drank_cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "drank/diagnostics.hpp"
#include "drank/digest.hpp"
#include "drank/errors.hpp"
#include "drank/estimator.hpp"
#include "drank/panel.hpp"
#include "drank/simulation.hpp"
#include "drank_cli/input.hpp"

namespace drank::cli {

using nlohmann::json;

std::string RunConfig::digest() const { return sha256_hex(params.dump()); }

std::vector<std::string> RunConfig::comments() const {
  return {"run_config_digest: " + digest(), "run_config: " + params.dump()};
}

void RunConfig::attach(json& doc) const {
  doc["run_config"] = params;
  doc["run_config_digest"] = digest();
}

// Workers and the cache location do not change any output, so they stay
// out of the record.
void TableSource::record(RunConfig& config) const {
  config.params["tail"] = to_string(tail);
  config.params["method"] = to_string(method);
  config.params["seed"] = seed;
  if (method == ScoreMethod::monte_carlo) config.params["reps"] = reps;
}

namespace {

std::optional<ScoreCache> make_cache(const std::optional<std::filesystem::path>& dir) {
  if (!dir) return std::nullopt;
  return ScoreCache(*dir);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string sanitize(const std::string& label) {
  std::string out;
  for (char c : label) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.') ? c : '_';
  return out;
}

Alternative alternative_of(const std::string& text) { return parse_alternative(text); }

NoiseVariance noise_of(const std::string& text) {
  if (text == "conditional_response") return NoiseVariance::conditional_response;
  if (text == "order_statistic") return NoiseVariance::order_statistic;
  throw InvalidArgument("unknown noise variance '" + text + "'");
}

scores::CovMethod cov_method_of(const std::string& text) {
  if (text == "mc" || text == "monte_carlo") return scores::CovMethod::monte_carlo;
  if (text == "approx" || text == "approximation") return scores::CovMethod::approximation;
  throw InvalidArgument("unknown covariance method '" + text + "'");
}

json score_table_record(const ScoreTable& t) {
  return {{"key", t.key()}, {"id", t.id()}, {"label", t.label()}};
}

}  // namespace

ScoreTable resolve_scores(const std::string& spec, int n, int m, const TableSource& source,
                          std::size_t beta_reps, scores::CovMethod beta_method) {
  const std::filesystem::path path(spec);
  if (path.extension() == ".json" && std::filesystem::is_regular_file(path)) {
    ScoreTable t = ScoreTable::from_json_text(read_file(path));
    if (t.n() != n || t.m() < m || t.tail() != source.tail)
      throw InvalidArgument(fmt::format(
          "score table '{}' covers n={}, m={}, tail {}; the data need n={}, m>={}, tail {}", spec,
          t.n(), t.m(), to_string(t.tail()), n, m, to_string(source.tail)));
    return t;
  }
  if (spec == "identity" || spec == "1:N") return ScoreTable::identity(n, m, source.tail);

  BuildOptions o;
  o.method = source.method;
  o.tail = source.tail;
  o.mc = {source.reps, source.seed};
  o.with_sigma2 = beta_reps > 0;
  o.with_beta = beta_reps > 0;
  o.beta_method = beta_method;
  o.beta_mc = {beta_reps, source.seed};
  o.workers = source.workers;
  const auto cache = make_cache(source.cache_dir);
  return build_score_table(DistributionSpec::parse(spec), n, m, o, cache ? &*cache : nullptr);
}

DistributionSpec distribution_from_flags(const std::string& family, std::optional<double> alpha,
                                         std::optional<double> shape, std::optional<double> rate) {
  if (family.find('(') != std::string::npos) return DistributionSpec::parse(family);
  if (family == "pareto" || family == "power_law") {
    if (!alpha) throw InvalidArgument("pareto needs --alpha (the tail index)");
    return DistributionSpec::pareto(*alpha);
  }
  if (family == "gamma") return DistributionSpec::gamma(shape.value_or(3.0), rate.value_or(3.0));
  if (alpha || shape || rate)
    throw InvalidArgument("distribution '" + family + "' takes no parameters");
  return DistributionSpec::parse(family);
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InvalidArgument(fmt::format("cannot write '{}'", path));
  out << text;
}

void cmd_scores(const ScoresArgs& args) {
  const int m = args.m.value_or(args.n);
  RunConfig config("scores");
  config.params["dist"] = args.dist.key();
  config.params["n"] = args.n;
  config.params["m"] = m;
  config.params["sigma2"] = args.sigma2;
  config.params["beta_reps"] = args.beta_reps;
  args.source.record(config);

  BuildOptions o;
  o.method = args.source.method;
  o.tail = args.source.tail;
  o.mc = {args.source.reps, args.source.seed};
  o.with_sigma2 = args.sigma2 || args.beta_reps > 0;
  o.with_beta = args.beta_reps > 0;
  o.beta_mc = {args.beta_reps, args.source.seed};
  o.workers = args.source.workers;
  const auto cache = make_cache(args.source.cache_dir);
  const ScoreTable t = build_score_table(args.dist, args.n, m, o, cache ? &*cache : nullptr);

  std::ostringstream csv;
  auto comments = config.comments();
  comments.push_back("score_table: " + t.key() + " " + t.id());
  write_score_csv(csv, t, comments);
  write_output(args.out, csv.str());
  if (!args.json_out.empty()) {
    json doc = json::parse(t.to_json_text());
    config.attach(doc);
    write_output(args.json_out, doc.dump(2) + "\n");
  }
}

void cmd_fit(const FitArgs& args) {
  const RankedSample sample = read_ranked_csv(args.data, args.source.tail);
  const bool modified = args.estimator == "modified";
  if (!modified && args.estimator != "lse")
    throw InvalidArgument("unknown estimator '" + args.estimator + "' (lse or modified)");
  const Alternative alt = alternative_of(args.alternative);
  VarianceOptions vo;
  vo.beta_power = args.beta_power;
  vo.noise = noise_of(args.noise);

  RunConfig config("fit");
  config.params["data"] = args.data;
  config.params["sample_fingerprint"] = fmt::format("{:016x}", sample.fingerprint());
  config.params["scores"] = args.scores;
  config.params["estimator"] = args.estimator;
  config.params["alternative"] = args.alternative;
  config.params["noise"] = args.noise;
  config.params["beta_power"] = args.beta_power;
  config.params["variance"] = args.variance;
  if (args.variance) {
    config.params["beta_reps"] = args.beta_reps;
    config.params["beta_method"] = args.beta_method;
  }
  args.source.record(config);

  const int table_m = modified && args.variance ? sample.n() : sample.m();
  const ScoreTable t = resolve_scores(args.scores, sample.n(), table_m, args.source,
                                      args.variance ? args.beta_reps : 0,
                                      cov_method_of(args.beta_method));
  Estimate e = modified ? fit_modified(sample, t, vo) : fit_lse(sample, t, vo);
  e.p_value = test_rho_zero(e, alt);
  e.alternative = alt;

  json doc = json::parse(estimate_to_json(e));
  doc["score_table"] = score_table_record(t);
  config.attach(doc);
  write_output(args.out, doc.dump(2) + "\n");
}

void cmd_diagnose(const DiagnoseArgs& args) {
  if (args.candidates.empty()) throw InvalidArgument("no candidate scores given");
  const RankedSample sample = read_ranked_csv(args.data, args.source.tail);
  RunConfig config("diagnose");
  config.params["data"] = args.data;
  config.params["sample_fingerprint"] = fmt::format("{:016x}", sample.fingerprint());
  config.params["candidates"] = args.candidates;
  config.params["bands"] = args.bands;
  if (args.bands) config.params["beta_reps"] = args.beta_reps;
  args.source.record(config);

  std::filesystem::create_directories(args.out_dir);
  std::vector<ScoreTable> tables;
  json files = json::array();
  for (std::size_t i = 0; i < args.candidates.size(); ++i) {
    const std::string& spec = args.candidates[i];
    tables.push_back(resolve_scores(spec, sample.n(), sample.m(), args.source,
                                    args.bands ? args.beta_reps : 0));
    const ScoreTable& t = tables.back();
    const ResidualReport report = residual_report(sample, t, fit_lse(sample, t));
    const std::string name = fmt::format("residuals_{:02d}_{}.csv", i + 1, sanitize(spec));
    std::ostringstream csv;
    auto comments = config.comments();
    comments.push_back("candidate: " + spec);
    comments.push_back("score_table: " + t.key() + " " + t.id());
    if (!report.negative_variance_ranks.empty())
      comments.push_back(fmt::format("negative theoretical variance at ranks {}",
                                     fmt::join(report.negative_variance_ranks, " ")));
    write_residual_csv(csv, report, comments);
    write_output((args.out_dir / name).string(), csv.str());
    files.push_back({{"candidate", spec}, {"residuals", name}});
  }

  const auto ranking = select_score(sample, tables);
  json doc = json::parse(selection_to_json(ranking));
  for (auto& c : doc["candidates"]) {
    const std::size_t i = c["input_index"];
    c["spec"] = args.candidates[i];
    c["residuals_file"] = files[i]["residuals"];
  }
  doc["selected"] = args.candidates[ranking.front().input_index];
  config.attach(doc);
  write_output((args.out_dir / "selection.json").string(), doc.dump(2) + "\n");

  std::cout << fmt::format("{:<4} {:<16} {:>12} {:>10} {:>10}\n", "rank", "candidate", "rss",
                           "rho_hat", "int_z");
  for (std::size_t k = 0; k < ranking.size(); ++k)
    std::cout << fmt::format("{:<4} {:<16} {:>12.4f} {:>10.4f} {:>10.4f}\n", k + 1,
                             args.candidates[ranking[k].input_index], ranking[k].rss,
                             ranking[k].rho_hat, ranking[k].intercept_z);
}

namespace {

template <class T>
std::vector<T> parse_numbers(const std::string& text, const std::string& key) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) {
    std::istringstream in(item);
    T v{};
    if (!(in >> v) || !in.eof())
      throw InvalidArgument(fmt::format("config key '{}': '{}' is not a number", key, item));
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument(fmt::format("config key '{}' is empty", key));
  return out;
}

}  // namespace

void cmd_simulate(const SimulateArgs& args) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(args.config.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidArgument(e.what());
  }
  const std::map<std::string, std::set<std::string>> allowed{
      {"study", {"dist_x", "n", "m", "rho", "candidates", "reps", "seed", "tail"}},
      {"run", {"workers"}}};
  for (const auto& [section, body] : tree) {
    const auto it = allowed.find(section);
    if (it == allowed.end() || body.empty())
      throw InvalidArgument(fmt::format("config: unknown section '[{}]'", section));
    for (const auto& [key, value] : body)
      if (!it->second.count(key))
        throw InvalidArgument(fmt::format("config: unknown key '{}' in [{}]", key, section));
  }

  sim::SimConfig base;
  std::vector<DistributionSpec> data_dists{base.dist_x};
  if (auto v = tree.get_optional<std::string>("study.dist_x")) {
    data_dists.clear();
    for (const auto& s : split_list(*v)) data_dists.push_back(DistributionSpec::parse(s));
  }
  if (auto v = tree.get_optional<std::string>("study.n")) base.n = parse_numbers<int>(*v, "n").at(0);
  if (auto v = tree.get_optional<std::string>("study.m")) base.m_values = parse_numbers<int>(*v, "m");
  if (auto v = tree.get_optional<std::string>("study.rho"))
    base.rho_values = parse_numbers<double>(*v, "rho");
  if (auto v = tree.get_optional<std::string>("study.candidates")) {
    base.candidates.clear();
    for (const auto& s : split_list(*v)) base.candidates.push_back(sim::ScoreCandidate::parse(s));
  }
  if (auto v = tree.get_optional<std::string>("study.reps"))
    base.reps = parse_numbers<std::size_t>(*v, "reps").at(0);
  if (auto v = tree.get_optional<std::string>("study.seed"))
    base.seed = parse_numbers<std::uint64_t>(*v, "seed").at(0);
  if (auto v = tree.get_optional<std::string>("study.tail")) base.tail = parse_tail(*v);
  if (auto v = tree.get_optional<std::string>("run.workers"))
    base.workers = parse_numbers<unsigned>(*v, "workers").at(0);
  if (args.fast) base.reps = sim::SimConfig::kFastReps;
  if (args.reps) base.reps = *args.reps;
  if (args.seed) base.seed = *args.seed;
  if (args.workers) base.workers = *args.workers;

  RunConfig config("simulate");
  json dists = json::array();
  for (const auto& d : data_dists) dists.push_back(d.key());
  json cands = json::array();
  for (const auto& c : base.candidates) cands.push_back(c.dist ? c.dist->key() : "identity");
  config.params["dist_x"] = dists;
  config.params["n"] = base.n;
  config.params["m"] = base.m_values;
  config.params["rho"] = base.rho_values;
  config.params["candidates"] = cands;
  config.params["reps"] = base.reps;
  config.params["seed"] = base.seed;
  config.params["tail"] = to_string(base.tail);

  const auto cache = make_cache(args.cache_dir);
  std::vector<sim::SimReport> reports;
  sim::SimReport merged;
  for (const auto& d : data_dists) {
    sim::SimConfig c = base;
    c.dist_x = d;
    c.validate();
    reports.push_back(sim::run_study(c, cache ? &*cache : nullptr));
    merged.cells.insert(merged.cells.end(), reports.back().cells.begin(),
                        reports.back().cells.end());
  }
  merged.reps = base.reps;
  merged.seed = base.seed;

  std::filesystem::create_directories(args.out_dir);
  std::ostringstream csv;
  sim::write_report_csv(csv, merged, config.comments());
  write_output((args.out_dir / "report.csv").string(), csv.str());
  const std::string table = sim::format_table(reports);
  std::string text;
  for (const auto& c : config.comments()) text += "# " + c + "\n";
  write_output((args.out_dir / "table.txt").string(), text + table);
  json doc = json::object();
  config.attach(doc);
  write_output((args.out_dir / "run_config.json").string(), doc.dump(2) + "\n");
  std::cout << table;

  std::size_t failures = 0;
  for (const auto& cell : merged.cells) failures += cell.failures;
  if (failures)
    std::cerr << fmt::format("warning: {} replicate fits failed and were left out\n", failures);
}

void cmd_panel(const PanelArgs& args) {
  const PanelInput input = read_panel_csv(args.data, args.source.tail, args.excluded);
  const auto& days = input.series.days;
  const int n = days.front().n();
  const int m = days.front().m();

  panel::PanelOptions o;
  o.lag = args.lag;
  if (args.hac_form == "one_sided")
    o.hac_form = panel::HacForm::one_sided;
  else if (args.hac_form == "symmetric")
    o.hac_form = panel::HacForm::symmetric;
  else
    throw InvalidArgument("unknown HAC form '" + args.hac_form + "' (one_sided or symmetric)");
  o.iteration = {args.tol, args.max_iter};
  o.max_nonconverged_fraction = args.max_nonconverged;
  o.workers = args.source.workers;

  RunConfig config("panel");
  config.params["data"] = args.data;
  config.params["scores"] = args.scores;
  config.params["lag"] = args.lag ? json(*args.lag) : json(nullptr);
  config.params["hac_form"] = args.hac_form;
  config.params["excluded"] = args.excluded;
  config.params["tol"] = args.tol;
  config.params["max_iter"] = args.max_iter;
  config.params["max_nonconverged"] = args.max_nonconverged;
  args.source.record(config);

  const ScoreTable t = resolve_scores(args.scores, n, m, args.source);
  const panel::CombinedTest r = panel::panel_test(input.series, t, o);
  if (r.hac_floored)
    std::cerr << "warning: the truncated autocovariance sum was negative; "
                 "using the lag-0 variance\n";

  json doc = json::parse(panel::combined_test_to_json(r, input.series));
  doc["n"] = n;
  doc["m"] = m;
  doc["T"] = static_cast<int>(days.size());
  doc["score_table"] = score_table_record(t);
  if (!input.covariate_names.empty()) {
    doc["covariates"] = input.covariate_names;
    json coefs = json::array();
    for (const auto& c : input.coefficients) coefs.push_back(c);
    doc["residualization_coefficients"] = coefs;
  }
  config.attach(doc);
  write_output(args.out, doc.dump(2) + "\n");
}

void cmd_synth(const SynthArgs& args) {
  RunConfig config("synth");
  config.params["kind"] = args.kind;
  config.params["dist"] = args.dist.key();
  config.params["n"] = args.n;
  config.params["m"] = args.m;
  config.params["rho"] = args.rho;
  config.params["seed"] = args.seed;
  config.params["tail"] = to_string(args.tail);
  if (args.kind == "panel") {
    config.params["days"] = args.days;
    config.params["gamma"] = args.gamma;
  }

  std::string text;
  for (const auto& c : config.comments()) text += "# " + c + "\n";
  if (args.kind == "dataset") {
    const RankedSample s =
        sim::gen_dataset(args.dist, args.n, args.rho, args.seed, args.tail).sample.censored(args.m);
    text += "rank,y\n";
    int r = 1;
    for (double y : s.y_top()) text += fmt::format("{},{:.17g}\n", r++, y);
    for (double y : s.y_rest()) text += fmt::format(",{:.17g}\n", y);
  } else if (args.kind == "panel") {
    if (args.tail != Tail::upper) throw InvalidArgument("synthetic panels rank from the top");
    panel::SyntheticPanelConfig pc;
    pc.dist_x = args.dist;
    pc.T = args.days;
    pc.n = args.n;
    pc.m = args.m;
    pc.rho = args.rho;
    pc.gamma = args.gamma;
    pc.seed = args.seed;
    const panel::PanelSeries p = panel::synthetic_panel(pc);
    text += "day,rank,y\n";
    for (std::size_t t = 0; t < p.days.size(); ++t) {
      int r = 1;
      for (double y : p.days[t].y_top()) text += fmt::format("{},{},{:.17g}\n", p.day_ids[t], r++, y);
      for (double y : p.days[t].y_rest())
        text += fmt::format("{},censored,{:.17g}\n", p.day_ids[t], y);
    }
  } else {
    throw InvalidArgument("unknown synth kind '" + args.kind + "' (dataset or panel)");
  }
  write_output(args.out, text);
}

}  // namespace drank::cli
