#pragma once

// Markdown and CSV rendering of evaluation results.
//
// CSV schemas (header row first; labels containing commas or quotes are
// quoted per RFC 4180):
//   preference: Method,<aspect columns...>          cells are win % with 2 decimals
//   alignment:  Method,1 Char CLIP,1 Char DS,2 Char CLIP,2 Char DS,3 Char CLIP,3 Char DS
//   count:      # shots,3,4,5,6,7,8,9,10           cells are accuracy % with 2 decimals
// Missing values render as "-".

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "storyframe/evaluation.hpp"
#include "storyframe/preference.hpp"

namespace storyframe {

struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_markdown() const;
  std::string to_csv() const;
};

std::string format_percent(double value);  // "%.2f"
std::string format_score(double value);    // "%.4f"

// One row per labeled tally; columns are the given aspect names.
Table preference_table(const std::vector<std::pair<std::string, PreferenceTally>>& rows,
                       const std::vector<std::string>& columns, std::string title = "Preference");

// Per-method alignment and consistency grouped by character-count bucket.
struct AlignmentSummary {
  std::string method;
  std::map<int, double> clip_by_bucket;         // bucket -> mean of report means
  std::map<int, double> consistency_by_bucket;  // bucket -> mean consistency
};

AlignmentSummary summarize_alignment(std::string method, const std::vector<AlignmentReport>& reports,
                                     const std::vector<std::optional<double>>& consistency = {});

Table alignment_table(const std::vector<AlignmentSummary>& rows, std::string title = "Alignment");

// Table rows are methods, columns are shot counts 3..10.
Table count_accuracy_table(const std::vector<std::pair<std::string, std::vector<BenchmarkRow>>>& rows,
                           std::string title = "Frame count accuracy");

}  // namespace storyframe
