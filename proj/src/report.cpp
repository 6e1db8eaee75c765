#include "storyframe/report.hpp"

#include <algorithm>
#include <cstdio>

namespace storyframe {

namespace {

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

}  // namespace

std::string Table::to_markdown() const {
  std::string out;
  if (!title.empty()) out += "### " + title + "\n\n";
  auto line = [&](const std::vector<std::string>& cells) {
    out += "|";
    for (const auto& c : cells) out += " " + md_cell(c) + " |";
    out += "\n";
  };
  line(header);
  out += "|";
  for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += "\n";
  for (const auto& r : rows) line(r);
  return out;
}

std::string Table::to_csv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out += ",";
      out += csv_cell(cells[i]);
    }
    out += "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::string format_percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

std::string format_score(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

Table preference_table(const std::vector<std::pair<std::string, PreferenceTally>>& rows,
                       const std::vector<std::string>& columns, std::string title) {
  Table t;
  t.title = std::move(title);
  t.header.push_back("Method");
  t.header.insert(t.header.end(), columns.begin(), columns.end());
  for (const auto& [label, tally] : rows) {
    std::vector<std::string> r{label};
    for (const auto& c : columns) {
      const AspectTally* a = tally.find(c);
      r.push_back(a && a->total > 0 ? format_percent(a->percentage()) : "-");
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

AlignmentSummary summarize_alignment(std::string method, const std::vector<AlignmentReport>& reports,
                                     const std::vector<std::optional<double>>& consistency) {
  AlignmentSummary s;
  s.method = std::move(method);
  std::map<int, std::pair<double, int>> clip;
  std::map<int, std::pair<double, int>> ds;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const int b = reports[i].character_count_bucket;
    clip[b].first += reports[i].mean;
    clip[b].second += 1;
    if (i < consistency.size() && consistency[i]) {
      ds[b].first += *consistency[i];
      ds[b].second += 1;
    }
  }
  for (const auto& [b, acc] : clip) s.clip_by_bucket[b] = acc.first / acc.second;
  for (const auto& [b, acc] : ds) s.consistency_by_bucket[b] = acc.first / acc.second;
  return s;
}

Table alignment_table(const std::vector<AlignmentSummary>& rows, std::string title) {
  Table t;
  t.title = std::move(title);
  t.header = {"Method"};
  for (int b = 1; b <= 3; ++b) {
    t.header.push_back(std::to_string(b) + " Char CLIP");
    t.header.push_back(std::to_string(b) + " Char DS");
  }
  auto cell = [](const std::map<int, double>& m, int b) {
    const auto it = m.find(b);
    return it == m.end() ? std::string("-") : format_score(it->second);
  };
  for (const auto& s : rows) {
    std::vector<std::string> r{s.method};
    for (int b = 1; b <= 3; ++b) {
      r.push_back(cell(s.clip_by_bucket, b));
      r.push_back(cell(s.consistency_by_bucket, b));
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

Table count_accuracy_table(const std::vector<std::pair<std::string, std::vector<BenchmarkRow>>>& rows,
                           std::string title) {
  Table t;
  t.title = std::move(title);
  t.header = {"# shots"};
  for (int n = 3; n <= 10; ++n) t.header.push_back(std::to_string(n));
  for (const auto& [label, bench] : rows) {
    std::vector<std::string> r{label};
    for (int n = 3; n <= 10; ++n) {
      const auto it = std::find_if(bench.begin(), bench.end(), [n](const BenchmarkRow& b) { return b.shot_count == n; });
      r.push_back(it == bench.end() ? "-" : format_percent(100.0 * it->accuracy));
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace storyframe
