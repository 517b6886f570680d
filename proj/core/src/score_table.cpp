#include "drank/score_table.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

#include "drank/digest.hpp"
#include "drank/errors.hpp"
#include "drank/parallel.hpp"

namespace drank {

using nlohmann::json;

std::string to_string(ScoreMethod method) {
  switch (method) {
    case ScoreMethod::exact_quadrature:
      return "exact_quadrature";
    case ScoreMethod::david_johnson:
      return "david_johnson";
    case ScoreMethod::monte_carlo:
      return "monte_carlo";
    case ScoreMethod::identity:
      return "identity";
    case ScoreMethod::supplied:
      return "supplied";
  }
  return "unknown";
}

std::string to_string(Tail tail) { return tail == Tail::lower ? "lower" : "upper"; }

ScoreMethod parse_score_method(const std::string& text) {
  if (text == "exact" || text == "exact_quadrature") return ScoreMethod::exact_quadrature;
  if (text == "approx" || text == "david_johnson") return ScoreMethod::david_johnson;
  if (text == "mc" || text == "monte_carlo") return ScoreMethod::monte_carlo;
  if (text == "identity") return ScoreMethod::identity;
  if (text == "supplied") return ScoreMethod::supplied;
  throw InvalidArgument("unknown score method '" + text + "'");
}

Tail parse_tail(const std::string& text) {
  if (text == "lower") return Tail::lower;
  if (text == "upper") return Tail::upper;
  throw InvalidArgument("tail must be 'lower' or 'upper', got '" + text + "'");
}

namespace {

std::string to_string(scores::CovMethod m) {
  return m == scores::CovMethod::monte_carlo ? "monte_carlo" : "approximation";
}

scores::CovMethod parse_cov_method(const std::string& s) {
  if (s == "monte_carlo") return scores::CovMethod::monte_carlo;
  if (s == "approximation") return scores::CovMethod::approximation;
  throw InvalidArgument("unknown covariance method '" + s + "'");
}

json mc_json(const std::optional<MonteCarloSettings>& mc) {
  if (!mc) return nullptr;
  return json{{"reps", mc->reps}, {"seed", mc->seed}};
}

std::optional<MonteCarloSettings> mc_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return MonteCarloSettings{j.at("reps").get<std::size_t>(), j.at("seed").get<std::uint64_t>()};
}

bool derived_from_distribution(ScoreMethod m) {
  return m == ScoreMethod::exact_quadrature || m == ScoreMethod::david_johnson ||
         m == ScoreMethod::monte_carlo || m == ScoreMethod::identity;
}

}  // namespace

ScoreTable::ScoreTable(Parts parts) : p_(std::move(parts)) {
  const int m = static_cast<int>(p_.alpha.size());
  if (p_.n < 1 || m < 1 || m > p_.n)
    throw InvalidArgument(fmt::format("score table needs 1 <= m <= n (got m={}, n={})", m, p_.n));
  auto check_len = [&](const auto& v, const char* name) {
    if (v && static_cast<int>(v->size()) != m)
      throw InvalidArgument(fmt::format("{} has {} entries, expected {}", name, v->size(), m));
  };
  check_len(p_.sigma2, "sigma2");
  check_len(p_.stderr_, "stderr");
  if (p_.beta) {
    const Eigen::MatrixXd& b = *p_.beta;
    if (b.rows() != m || b.cols() != m)
      throw InvalidArgument(fmt::format("beta must be {0}x{0}", m));
    if ((b - b.transpose()).cwiseAbs().maxCoeff() > 0.0)
      throw InvalidArgument("beta must be symmetric");
    if ((b.diagonal().array() < 0.0).any())
      throw InvalidArgument("beta must have a nonnegative diagonal");
  }
  if (derived_from_distribution(p_.method)) {
    // Strictly increasing in the order-statistic index.
    for (int i = 1; i < m; ++i) {
      const double prev = p_.alpha[static_cast<std::size_t>(i - 1)];
      const double cur = p_.alpha[static_cast<std::size_t>(i)];
      const bool ok = p_.tail == Tail::lower ? cur > prev : cur < prev;
      if (!ok)
        throw AccuracyError(
            fmt::format("scores for {} are not strictly monotone at rank {}", p_.label, i + 1),
            std::abs(cur - prev));
    }
  }
  if (!p_.alpha_tail_mean && m < p_.n) {
    const double sum = std::accumulate(p_.alpha.begin(), p_.alpha.end(), 0.0);
    p_.alpha_tail_mean = -sum / (p_.n - m);
  }
  if (m == p_.n) p_.alpha_tail_mean.reset();
  id_ = sha256_hex(payload_text());
}

ScoreTable ScoreTable::identity(int n, int m, Tail tail) {
  if (n < 2) throw InvalidArgument("identity scores need n >= 2");
  const double centre = 0.5 * (n + 1.0);
  const double sd = std::sqrt((static_cast<double>(n) * n - 1.0) / 12.0);
  Parts p;
  p.label = "identity";
  p.n = n;
  p.tail = tail;
  p.method = ScoreMethod::identity;
  for (int rank = 1; rank <= m; ++rank)
    p.alpha.push_back((order_statistic_index(tail, rank, n) - centre) / sd);
  return ScoreTable(std::move(p));
}

ScoreTable ScoreTable::supplied(int n, std::vector<double> alpha, Tail tail,
                                std::string label) {
  Parts p;
  p.label = std::move(label);
  p.n = n;
  p.tail = tail;
  p.method = ScoreMethod::supplied;
  p.alpha = std::move(alpha);
  return ScoreTable(std::move(p));
}

std::string ScoreTable::key() const {
  std::string k = fmt::format("{}_n{}_m{}_{}_{}", p_.dist ? p_.dist->key() : p_.label, p_.n,
                              m(), to_string(p_.tail), to_string(p_.method));
  if (p_.mc) k += fmt::format("_mc{}-{}", p_.mc->reps, p_.mc->seed);
  if (p_.sigma2) k += "_s2";
  if (p_.beta_method) {
    k += "_beta-" + to_string(*p_.beta_method);
    if (p_.beta_mc) k += fmt::format("{}-{}", p_.beta_mc->reps, p_.beta_mc->seed);
  }
  return k;
}

std::string ScoreTable::payload_text() const {
  json j;
  j["format"] = "drank.score_table";
  j["version"] = 1;
  j["label"] = p_.label;
  j["dist"] = p_.dist ? json(p_.dist->key()) : json(nullptr);
  j["n"] = p_.n;
  j["m"] = m();
  j["tail"] = to_string(p_.tail);
  j["method"] = to_string(p_.method);
  j["mc"] = mc_json(p_.mc);
  j["beta_method"] = p_.beta_method ? json(to_string(*p_.beta_method)) : json(nullptr);
  j["beta_mc"] = mc_json(p_.beta_mc);
  j["alpha"] = p_.alpha;
  j["alpha_tail_mean"] = p_.alpha_tail_mean ? json(*p_.alpha_tail_mean) : json(nullptr);
  j["sigma2"] = p_.sigma2 ? json(*p_.sigma2) : json(nullptr);
  j["stderr"] = p_.stderr_ ? json(*p_.stderr_) : json(nullptr);
  if (p_.beta) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < p_.beta->rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(p_.beta->cols()));
      for (Eigen::Index k = 0; k < p_.beta->cols(); ++k) row[static_cast<std::size_t>(k)] = (*p_.beta)(i, k);
      rows.push_back(row);
    }
    j["beta"] = rows;
  } else {
    j["beta"] = nullptr;
  }
  return j.dump();
}

std::string ScoreTable::to_json_text() const {
  json j = json::parse(payload_text());
  j["digest"] = id_;
  return j.dump();
}

ScoreTable ScoreTable::from_json_text(const std::string& text) {
  try {
    json j = json::parse(text);
    if (j.at("format") != "drank.score_table" || j.at("version") != 1)
      throw InvalidArgument("not a version-1 score table");
    const std::string digest = j.at("digest");
    Parts p;
    p.label = j.at("label");
    if (!j.at("dist").is_null()) p.dist = DistributionSpec::parse(j.at("dist"));
    p.n = j.at("n");
    p.tail = parse_tail(j.at("tail"));
    p.method = parse_score_method(j.at("method"));
    p.mc = mc_from_json(j.at("mc"));
    if (!j.at("beta_method").is_null()) p.beta_method = parse_cov_method(j.at("beta_method"));
    p.beta_mc = mc_from_json(j.at("beta_mc"));
    p.alpha = j.at("alpha").get<std::vector<double>>();
    if (!j.at("alpha_tail_mean").is_null()) p.alpha_tail_mean = j.at("alpha_tail_mean").get<double>();
    if (!j.at("sigma2").is_null()) p.sigma2 = j.at("sigma2").get<std::vector<double>>();
    if (!j.at("stderr").is_null()) p.stderr_ = j.at("stderr").get<std::vector<double>>();
    if (!j.at("beta").is_null()) {
      const auto rows = j.at("beta").get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd b(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) throw InvalidArgument("beta is not square");
        for (std::size_t k = 0; k < rows.size(); ++k)
          b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
      }
      p.beta = std::move(b);
    }
    if (j.at("m").get<std::size_t>() != p.alpha.size())
      throw InvalidArgument("score table m does not match alpha length");
    ScoreTable table(std::move(p));
    if (table.id() != digest) throw InvalidArgument("score table digest mismatch");
    return table;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed score table: ") + e.what());
  }
}

std::string score_table_key(const DistributionSpec& dist, int n, int m,
                            const BuildOptions& options) {
  std::string k = fmt::format("{}_n{}_m{}_{}_{}", dist.key(), n, m, to_string(options.tail),
                              to_string(options.method));
  if (options.method == ScoreMethod::monte_carlo)
    k += fmt::format("_mc{}-{}", options.mc.reps, options.mc.seed);
  if (options.with_sigma2 || options.with_beta) k += "_s2";
  if (options.with_beta) {
    k += "_beta-" + to_string(options.beta_method);
    if (options.beta_method == scores::CovMethod::monte_carlo)
      k += fmt::format("{}-{}", options.beta_mc.reps, options.beta_mc.seed);
  }
  return k;
}

ScoreCache::ScoreCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ScoreCache::path_for(const std::string& key) const {
  std::string name;
  for (char ch : key) {
    const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
    name.push_back(keep ? ch : '_');
  }
  // Sanitizing can merge distinct keys; the digest of the key disambiguates.
  return dir_ / (name + "." + sha256_hex(key).substr(0, 12) + ".json");
}

std::optional<ScoreTable> ScoreCache::load(const std::string& key) const {
  std::ifstream in(path_for(key));
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    ScoreTable table = ScoreTable::from_json_text(buf.str());
    if (table.key() != key) return std::nullopt;
    return table;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void ScoreCache::store(const ScoreTable& table) const {
  std::filesystem::create_directories(dir_);
  const auto path = path_for(table.key());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write cache file " + tmp.string());
    out << table.to_json_text();
  }
  std::filesystem::rename(tmp, path);
}

ScoreTable build_score_table(const DistributionSpec& dist, int n, int m,
                             const BuildOptions& options, const ScoreCache* cache) {
  if (n < 1 || m < 1 || m > n)
    throw InvalidArgument(fmt::format("need 1 <= m <= n (got m={}, n={})", m, n));
  if (options.method == ScoreMethod::identity || options.method == ScoreMethod::supplied)
    throw InvalidArgument("build_score_table computes distribution scores only");

  const std::string key = score_table_key(dist, n, m, options);
  if (cache) {
    if (auto hit = cache->load(key)) return *hit;
  }

  ScoreTable::Parts p;
  p.label = dist.key();
  p.dist = dist;
  p.n = n;
  p.tail = options.tail;
  p.method = options.method;
  p.alpha.resize(static_cast<std::size_t>(m));
  const bool need_sigma2 = options.with_sigma2 || options.with_beta;
  auto os_index = [&](std::size_t i) {
    return order_statistic_index(options.tail, static_cast<int>(i) + 1, n);
  };

  std::optional<scores::MonteCarloMoments> beta_moments;
  const bool beta_by_mc = options.with_beta && options.beta_method == scores::CovMethod::monte_carlo;
  if (beta_by_mc)
    beta_moments = scores::mc_order_statistic_moments(dist, n, m, options.tail,
                                                      options.beta_mc.reps,
                                                      options.beta_mc.seed, options.workers);

  switch (options.method) {
    case ScoreMethod::exact_quadrature: {
      if (need_sigma2) p.sigma2.emplace(static_cast<std::size_t>(m));
      parallel_for(static_cast<std::size_t>(m), options.workers, [&](std::size_t i) {
        p.alpha[i] = scores::mos_exact(dist, os_index(i), n);
        if (need_sigma2) (*p.sigma2)[i] = scores::os_variance_exact(dist, os_index(i), n);
      });
      break;
    }
    case ScoreMethod::david_johnson: {
      if (need_sigma2) p.sigma2.emplace(static_cast<std::size_t>(m));
      for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
        p.alpha[i] = scores::mos_approx(dist, os_index(i), n);
        if (need_sigma2) (*p.sigma2)[i] = scores::os_variance_approx(dist, os_index(i), n);
      }
      break;
    }
    case ScoreMethod::monte_carlo: {
      p.mc = options.mc;
      const scores::MonteCarloMos mc =
          scores::mos_mc(dist, n, options.mc.reps, options.mc.seed, options.workers);
      p.stderr_.emplace(static_cast<std::size_t>(m));
      for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
        const auto idx = static_cast<std::size_t>(os_index(i) - 1);
        p.alpha[i] = mc.alpha[idx];
        (*p.stderr_)[i] = mc.stderr_[idx];
      }
      if (need_sigma2) {
        const scores::MonteCarloMoments mom =
            beta_moments ? *beta_moments
                         : scores::mc_order_statistic_moments(dist, n, m, options.tail,
                                                              options.mc.reps, options.mc.seed,
                                                              options.workers);
        p.sigma2.emplace(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) (*p.sigma2)[static_cast<std::size_t>(i)] = mom.cov(i, i);
      }
      break;
    }
    default:
      break;
  }

  if (options.with_beta) {
    p.beta_method = options.beta_method;
    if (beta_by_mc) {
      p.beta_mc = options.beta_mc;
      p.beta = beta_moments->cov;
    } else {
      scores::CovOptions co;
      co.method = scores::CovMethod::approximation;
      co.tail = options.tail;
      p.beta = scores::cov_os(dist, n, m, co);
    }
  }

  ScoreTable table(std::move(p));
  if (cache) cache->store(table);
  return table;
}

void write_score_csv(std::ostream& out, const ScoreTable& table,
                     const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "rank,alpha";
  if (table.sigma2()) out << ",sigma2";
  if (table.alpha_stderr()) out << ",stderr";
  out << '\n';
  for (int r = 1; r <= table.m(); ++r) {
    const auto i = static_cast<std::size_t>(r - 1);
    out << r << ',' << fmt::format("{:.17g}", table.alpha(r));
    if (table.sigma2()) out << ',' << fmt::format("{:.17g}", (*table.sigma2())[i]);
    if (table.alpha_stderr()) out << ',' << fmt::format("{:.17g}", (*table.alpha_stderr())[i]);
    out << '\n';
  }
}

}  // namespace drank
