#include "prosched/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "text_util.hpp"

namespace prosched {

std::vector<double> minmax_normalize(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("cannot normalize an empty list");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double mn = *lo, mx = *hi;
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(mx == mn ? 0.5 : (v - mn) / (mx - mn));
  return out;
}

double pri_from_indices(double ci, double ti) {
  ci = std::max(ci, kPriFloor);
  ti = std::max(ti, kPriFloor);
  return 2.0 * ci * ti / (ci + ti);
}

std::vector<PriResult> compute_pri(const std::vector<ModelRow>& group) {
  std::vector<double> ac, max_ac, diff, pt, ftr, rar;
  for (const ModelRow& r : group) {
    for (double v : {r.ac, r.max_ac, r.difference, r.pt, r.ftr, r.rar}) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite metric in row " + r.model_id);
    }
    ac.push_back(r.ac);
    max_ac.push_back(r.max_ac);
    diff.push_back(r.difference);
    pt.push_back(r.pt);
    ftr.push_back(r.ftr);
    rar.push_back(r.rar);
  }
  std::vector<PriResult> out;
  if (group.empty()) return out;
  const auto n_ac = minmax_normalize(ac), n_max = minmax_normalize(max_ac),
             n_diff = minmax_normalize(diff), n_pt = minmax_normalize(pt),
             n_ftr = minmax_normalize(ftr), n_rar = minmax_normalize(rar);
  for (std::size_t i = 0; i < group.size(); ++i) {
    PriResult p;
    p.model_id = group[i].model_id;
    p.normalized = {{"AC", n_ac[i]},  {"MaxAC", n_max[i]}, {"Difference", n_diff[i]},
                    {"PT", n_pt[i]},  {"FTR", n_ftr[i]},   {"RAR", n_rar[i]}};
    p.ci = std::max((n_ac[i] + n_max[i] + (1.0 - n_diff[i])) / 3.0, kPriFloor);
    p.ti = std::max((n_pt[i] + (1.0 - n_ftr[i]) + n_rar[i]) / 3.0, kPriFloor);
    p.pri = pri_from_indices(p.ci, p.ti);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<RankedEntry> rank_group(std::vector<PriResult> results, int top_k) {
  constexpr double kTieTol = 1e-12;
  std::sort(results.begin(), results.end(), [](const PriResult& a, const PriResult& b) {
    if (std::abs(a.pri - b.pri) > kTieTol) return a.pri > b.pri;
    return a.model_id < b.model_id;
  });
  std::vector<RankedEntry> out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    RankedEntry e;
    e.rank = static_cast<int>(i) + 1;
    e.tied = (i > 0 && std::abs(results[i - 1].pri - results[i].pri) <= kTieTol) ||
             (i + 1 < results.size() && std::abs(results[i + 1].pri - results[i].pri) <= kTieTol);
    if (e.rank <= top_k) e.marker = "(" + std::to_string(e.rank) + ")";
    e.result = std::move(results[i]);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::string(detail::trim(cur)));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(std::string(detail::trim(cur)));
  return cells;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

std::vector<ModelRow> read_model_rows_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!detail::trim(line).empty() && detail::trim(line).front() != '#') break;
  }
  for (auto& h : split_csv_line(line)) header.push_back(detail::ascii_lower(h));
  auto col = [&](const char* name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument(std::string("missing column ") + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_id = col("model_id"), c_ac = col("ac"), c_max = col("maxac"),
                    c_diff = col("difference"), c_pt = col("pt"), c_ftr = col("ftr"),
                    c_rar = col("rar");
  std::vector<ModelRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty() || detail::trim(line).front() == '#') continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < header.size()) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": too few columns");
    }
    auto num = [&](std::size_t c) {
      try {
        return std::stod(cells[c]);
      } catch (const std::exception&) {
        throw std::invalid_argument("line " + std::to_string(lineno) + ": bad number '" + cells[c] + "'");
      }
    };
    rows.push_back({cells[c_id], num(c_ac), num(c_max), num(c_diff), num(c_pt), num(c_ftr), num(c_rar)});
  }
  return rows;
}

std::string ranked_to_csv(const std::vector<RankedEntry>& ranked) {
  std::ostringstream os;
  os << "rank,marker,model_id,CI,TI,PRI,tied\n";
  char buf[96];
  for (const RankedEntry& e : ranked) {
    std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f", e.result.ci, e.result.ti, e.result.pri);
    os << e.rank << ',' << e.marker << ',' << csv_cell(e.result.model_id) << ',' << buf << ','
       << (e.tied ? "true" : "false") << '\n';
  }
  return os.str();
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nan("");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

namespace {

void check_steps(const RunSeries& s) {
  for (std::size_t i = 1; i < s.steps.size(); ++i) {
    if (s.steps[i].first <= s.steps[i - 1].first) {
      throw std::invalid_argument("series " + s.metric_id + " has non-increasing steps");
    }
  }
}

}  // namespace

RunConsistency run_consistency(const std::vector<RunSeries>& run1, const std::vector<RunSeries>& run2) {
  RunConsistency rc;
  std::map<std::string, const RunSeries*> second;
  for (const RunSeries& s : run2) {
    check_steps(s);
    second[s.metric_id] = &s;
  }
  for (const RunSeries& a : run1) {
    check_steps(a);
    auto it = second.find(a.metric_id);
    if (it == second.end()) throw std::invalid_argument("metric missing from second run: " + a.metric_id);
    const RunSeries& b = *it->second;
    if (a.steps.empty() || b.steps.empty()) {
      rc.warnings.push_back(a.metric_id + ": empty series");
      continue;
    }
    const double v1 = a.steps.back().second, v2 = b.steps.back().second;
    const double denom = std::abs(v1) + std::abs(v2);
    rc.c_final[a.metric_id] = denom == 0 ? 1.0 : 1.0 - std::abs(v1 - v2) / denom;

    std::map<int, double> bsteps(b.steps.begin(), b.steps.end());
    std::vector<double> x, y;
    for (const auto& [u, v] : a.steps) {
      auto jt = bsteps.find(u);
      if (jt == bsteps.end()) continue;
      x.push_back(v);
      y.push_back(jt->second);
    }
    if (x.size() < 2) {
      rc.warnings.push_back(a.metric_id + ": fewer than 2 overlapping steps");
      continue;
    }
    const double r = pearson(x, y);
    if (std::isnan(r)) {
      rc.warnings.push_back(a.metric_id + ": zero-variance series, correlation excluded");
      continue;
    }
    rc.c_trajectory[a.metric_id] = r;
  }
  std::vector<double> parts;
  for (const auto* m : {&rc.c_final, &rc.c_trajectory}) {
    if (m->empty()) continue;
    double sum = 0;
    for (const auto& [_, v] : *m) sum += v;
    parts.push_back(sum / static_cast<double>(m->size()));
  }
  if (!parts.empty()) {
    double sum = 0;
    for (double p : parts) sum += p;
    rc.c_combined = sum / static_cast<double>(parts.size());
  }
  return rc;
}

double avg_metric_gradient(const RunSeries& s) {
  if (s.steps.size() < 2) throw std::invalid_argument("gradient needs at least 2 points");
  double sum = 0;
  for (std::size_t i = 1; i < s.steps.size(); ++i) sum += s.steps[i].second - s.steps[i - 1].second;
  return sum / static_cast<double>(s.steps.size() - 1);
}

}  // namespace prosched
