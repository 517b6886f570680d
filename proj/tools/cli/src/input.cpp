#include "drank_cli/input.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "drank/errors.hpp"

namespace drank::cli {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;
};

Table read_table(std::istream& in, const std::string& source) {
  Table t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto fields = split_fields(s);
    if (t.header.empty()) {
      for (auto& f : fields) f = lower(f);
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw InvalidArgument(fmt::format("{}:{}: expected {} fields, found {}", source, line_no,
                                        t.header.size(), fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw InvalidArgument(source + ": no header line");
  return t;
}

std::size_t column(const Table& t, const std::string& name, const std::string& source) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw InvalidArgument(fmt::format("{}: no '{}' column", source, name));
  return static_cast<std::size_t>(it - t.header.begin());
}

double parse_real(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw InvalidArgument(fmt::format("{}: '{}' is not a finite number", where, s));
  return v;
}

long long parse_integer(const std::string& s, const std::string& where) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InvalidArgument(fmt::format("{}: '{}' is not an integer", where, s));
  return v;
}

/// nullopt for an unranked row.
std::optional<int> parse_rank(const std::string& s, const std::string& where) {
  const std::string l = lower(s);
  if (l.empty() || l == "censored") return std::nullopt;
  const long long r = parse_integer(s, where);
  if (r < 1 || r > 100000000) throw InvalidArgument(fmt::format("{}: rank {} is not positive", where, r));
  return static_cast<int>(r);
}

struct Row {
  std::optional<int> rank;
  double y;
  std::string where;
};

RankedSample assemble(const std::vector<Row>& rows, Tail tail, const std::string& what) {
  std::map<int, double> ranked;
  std::vector<double> rest;
  for (const Row& row : rows) {
    if (!row.rank) {
      rest.push_back(row.y);
      continue;
    }
    if (!ranked.emplace(*row.rank, row.y).second)
      throw InvalidArgument(fmt::format("{}: rank {} appears twice", row.where, *row.rank));
  }
  if (ranked.empty()) throw InvalidArgument(what + ": no ranked rows");
  int expected = 1;
  for (const auto& [r, y] : ranked) {
    if (r != expected)
      throw InvalidArgument(fmt::format("{}: rank {} is missing (ranks present up to {})", what,
                                        expected, ranked.rbegin()->first));
    ++expected;
  }
  std::vector<double> top;
  top.reserve(ranked.size());
  for (const auto& [r, y] : ranked) top.push_back(y);
  return RankedSample(std::move(top), std::move(rest), tail);
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument(fmt::format("cannot open '{}'", path.string()));
  return in;
}

}  // namespace

RankedSample read_ranked_csv(std::istream& in, Tail tail, const std::string& source) {
  const Table t = read_table(in, source);
  const std::size_t rc = column(t, "rank", source);
  const std::size_t yc = column(t, "y", source);
  std::vector<Row> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string where = fmt::format("{}:{}", source, t.line_numbers[i]);
    rows.push_back({parse_rank(t.rows[i][rc], where), parse_real(t.rows[i][yc], where), where});
  }
  return assemble(rows, tail, source);
}

RankedSample read_ranked_csv(const std::filesystem::path& path, Tail tail) {
  auto in = open(path);
  return read_ranked_csv(in, tail, path.string());
}

PanelInput read_panel_csv(std::istream& in, Tail tail, const std::vector<int>& excluded,
                          const std::string& source) {
  const Table t = read_table(in, source);
  const std::size_t dc = column(t, "day", source);
  const std::size_t rc = column(t, "rank", source);
  const std::size_t yc = column(t, "y", source);
  PanelInput out;
  std::vector<std::size_t> cov_cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != dc && c != rc && c != yc) {
      cov_cols.push_back(c);
      out.covariate_names.push_back(t.header[c]);
    }

  struct Day {
    std::vector<Row> rows;
    std::vector<std::vector<double>> covariates;
  };
  std::vector<long long> order;
  std::map<long long, Day> days;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    const std::string where = fmt::format("{}:{}", source, t.line_numbers[i]);
    const long long id = parse_integer(f[dc], where);
    auto [it, fresh] = days.try_emplace(id);
    if (fresh) order.push_back(id);
    it->second.rows.push_back({parse_rank(f[rc], where), parse_real(f[yc], where), where});
    std::vector<double> x;
    for (std::size_t c : cov_cols) x.push_back(parse_real(f[c], where));
    it->second.covariates.push_back(std::move(x));
  }
  if (order.empty()) throw InvalidArgument(source + ": no rows");

  for (long long id : order) {
    Day& day = days.at(id);
    if (!cov_cols.empty()) {
      const Eigen::Index n = static_cast<Eigen::Index>(day.rows.size());
      Eigen::VectorXd y(n);
      Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cov_cols.size()));
      for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = day.rows[static_cast<std::size_t>(i)].y;
        for (Eigen::Index j = 0; j < x.cols(); ++j)
          x(i, j) = day.covariates[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
      drank::panel::Residualized r;
      try {
        r = drank::panel::preprocess_residualize(y, x, out.covariate_names);
      } catch (const RankDeficiencyError& e) {
        throw RankDeficiencyError(e.block(), fmt::format("day {}: {}", id, e.what()));
      }
      for (Eigen::Index i = 0; i < n; ++i) day.rows[static_cast<std::size_t>(i)].y = r.abs_residuals(i);
      out.coefficients.emplace_back(r.coefficients.data(),
                                    r.coefficients.data() + r.coefficients.size());
    }
    out.series.day_ids.push_back(id);
    out.series.days.push_back(assemble(day.rows, tail, fmt::format("{} day {}", source, id)));
  }
  out.series.excluded = excluded;
  out.series.validate();
  return out;
}

PanelInput read_panel_csv(const std::filesystem::path& path, Tail tail,
                          const std::vector<int>& excluded) {
  auto in = open(path);
  return read_panel_csv(in, tail, excluded, path.string());
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : text) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  out.erase(std::remove(out.begin(), out.end(), std::string{}), out.end());
  return out;
}

}  // namespace drank::cli
