#pragma once

#include <optional>
#include <string>
#include <vector>

namespace grounding {

enum class Predicate {
  LeftOf,
  RightOf,
  FrontOf,
  Behind,
  Above,
  Below,
  Near,
  Between,
};

/// Canonical snake_case name, e.g. "right_of".
const char* predicate_name(Predicate p);

enum class LengthUnit { Meter, Centimeter, Foot };

struct MetricConstraint {
  double distance_m = 0.0;  // normalized to meters, in [0.01, 100]
  LengthUnit stated_unit = LengthUnit::Meter;
};

/// Half-open byte range [begin, end) into the raw query text.
struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// One spatial description clause: a predicate applied to one anchor
/// phrase (two for Between), with an optional metric constraint.
struct SdcClause {
  std::string anchor_text;
  std::optional<std::string> anchor_text_2;  // Between only
  Predicate predicate = Predicate::Near;
  std::optional<MetricConstraint> metric;
  SourceSpan span;
};

enum class QueryKind { Where, WhichObject };

struct SdcQuery {
  QueryKind kind = QueryKind::WhichObject;
  std::vector<SdcClause> clauses;  // conjunctive, in order of appearance
  std::string raw_text;
};

/// Deterministic layered grammar: tokenize, match predicate phrases
/// (longest first), bind number+unit metrics to the following predicate,
/// then collect anchor phrases up to conjunctions/punctuation.
/// Also accepts its own canonical output (e.g. "right_of(fridge, 2.000m)"),
/// so parse-then-canonicalize is idempotent.
/// Throws ParseError (NoPredicateFound, AmbiguousMetricBinding, ...).
SdcQuery parse_query(const std::string& text);

/// e.g. "right_of(fridge, 2.000m)", "near(sink)", "between(table, couch)".
std::string to_canonical(const SdcClause& clause);

/// Comma-joined canonical clauses of a query.
std::string to_canonical(const SdcQuery& query);

}  // namespace grounding
