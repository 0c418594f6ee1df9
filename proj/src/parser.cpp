#include "grounding/parser.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "grounding/errors.hpp"

namespace grounding {

namespace {

struct Token {
  std::string text;  // lowercased
  std::size_t begin = 0;
  std::size_t end = 0;
  bool is_stop = false;  // punctuation that terminates phrases
};

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '\'' || c == '_' ||
         c == '-';
}

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < text.size() && is_word_char(text[j])) ++j;
      std::string word = text.substr(i, j - i);
      // Strip trailing sentence periods that glued onto the word ("fridge.",
      // "2.5."). Interior decimal points survive; a valid number never ends
      // in a dot, so this cannot damage one.
      while (word.size() > 1 && word.back() == '.') {
        word.pop_back();
        --j;
      }
      std::transform(word.begin(), word.end(), word.begin(),
                     [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
      const bool all_punct =
          std::none_of(word.begin(), word.end(),
                       [](unsigned char ch) { return std::isalnum(ch); });
      tokens.push_back({std::move(word), i, j, all_punct});
      i = j;
    } else {
      tokens.push_back({std::string(1, c), i, i + 1, true});
      ++i;
    }
  }
  return tokens;
}

struct PredicatePhrase {
  std::vector<std::string> words;
  Predicate predicate;
};

const std::vector<PredicatePhrase>& predicate_lexicon() {
  static const std::vector<PredicatePhrase> lexicon = [] {
    std::vector<PredicatePhrase> v = {
        {{"on", "the", "right", "side", "of"}, Predicate::RightOf},
        {{"on", "the", "left", "side", "of"}, Predicate::LeftOf},
        {{"to", "the", "right", "side", "of"}, Predicate::RightOf},
        {{"to", "the", "left", "side", "of"}, Predicate::LeftOf},
        {{"to", "the", "right", "of"}, Predicate::RightOf},
        {{"to", "the", "left", "of"}, Predicate::LeftOf},
        {{"on", "the", "right", "of"}, Predicate::RightOf},
        {{"on", "the", "left", "of"}, Predicate::LeftOf},
        {{"at", "the", "back", "of"}, Predicate::Behind},
        {{"in", "front", "of"}, Predicate::FrontOf},
        {{"in", "back", "of"}, Predicate::Behind},
        {{"in", "between"}, Predicate::Between},
        {{"midway", "between"}, Predicate::Between},
        {{"halfway", "between"}, Predicate::Between},
        {{"right", "of"}, Predicate::RightOf},
        {{"left", "of"}, Predicate::LeftOf},
        {{"front", "of"}, Predicate::FrontOf},
        {{"ahead", "of"}, Predicate::FrontOf},
        {{"back", "of"}, Predicate::Behind},
        {{"on", "top", "of"}, Predicate::Above},
        {{"close", "to"}, Predicate::Near},
        {{"next", "to"}, Predicate::Near},
        {{"behind"}, Predicate::Behind},
        {{"above"}, Predicate::Above},
        {{"atop"}, Predicate::Above},
        {{"over"}, Predicate::Above},
        {{"below"}, Predicate::Below},
        {{"under"}, Predicate::Below},
        {{"beneath"}, Predicate::Below},
        {{"underneath"}, Predicate::Below},
        {{"near"}, Predicate::Near},
        {{"beside"}, Predicate::Near},
        {{"between"}, Predicate::Between},
    };
    std::stable_sort(v.begin(), v.end(), [](const PredicatePhrase& a, const PredicatePhrase& b) {
      return a.words.size() > b.words.size();
    });
    return v;
  }();
  return lexicon;
}

const std::map<std::string, double>& number_words() {
  static const std::map<std::string, double> words = {
      {"zero", 0},     {"one", 1},       {"two", 2},      {"three", 3},   {"four", 4},
      {"five", 5},     {"six", 6},       {"seven", 7},    {"eight", 8},   {"nine", 9},
      {"ten", 10},     {"eleven", 11},   {"twelve", 12},  {"thirteen", 13},
      {"fourteen", 14}, {"fifteen", 15}, {"sixteen", 16}, {"seventeen", 17},
      {"eighteen", 18}, {"nineteen", 19}, {"twenty", 20},
  };
  return words;
}

std::optional<LengthUnit> unit_of(const std::string& w) {
  static const std::map<std::string, LengthUnit> units = {
      {"m", LengthUnit::Meter},           {"meter", LengthUnit::Meter},
      {"meters", LengthUnit::Meter},      {"metre", LengthUnit::Meter},
      {"metres", LengthUnit::Meter},      {"cm", LengthUnit::Centimeter},
      {"centimeter", LengthUnit::Centimeter},  {"centimeters", LengthUnit::Centimeter},
      {"centimetre", LengthUnit::Centimeter},  {"centimetres", LengthUnit::Centimeter},
      {"ft", LengthUnit::Foot},           {"foot", LengthUnit::Foot},
      {"feet", LengthUnit::Foot},
  };
  auto it = units.find(w);
  if (it == units.end()) return std::nullopt;
  return it->second;
}

double to_meters(double value, LengthUnit unit) {
  switch (unit) {
    case LengthUnit::Meter: return value;
    case LengthUnit::Centimeter: return value / 100.0;
    case LengthUnit::Foot: return value * 0.3048;
  }
  return value;
}

bool is_plain_number(const std::string& w) {
  bool seen_digit = false, seen_dot = false;
  for (char c : w) {
    if (c >= '0' && c <= '9') {
      seen_digit = true;
    } else if (c == '.') {
      if (seen_dot) return false;
      seen_dot = true;
    } else {
      return false;
    }
  }
  return seen_digit && (w.back() != '.');
}

bool starts_with_digit(const std::string& w) {
  return !w.empty() && w.front() >= '0' && w.front() <= '9';
}

/// Splits a glued "2m" / "50cm" / "3.5ft" token, if it is one.
bool split_number_unit(const std::string& w, std::string* num, LengthUnit* unit) {
  std::size_t i = 0;
  while (i < w.size() && ((w[i] >= '0' && w[i] <= '9') || w[i] == '.')) ++i;
  if (i == 0 || i == w.size()) return false;
  const auto u = unit_of(w.substr(i));
  if (!u) return false;
  const std::string head = w.substr(0, i);
  if (!is_plain_number(head)) return false;
  *num = head;
  *unit = *u;
  return true;
}

struct PredicateHit {
  Predicate predicate;
  std::size_t tok_begin = 0;  // token indices [tok_begin, tok_end)
  std::size_t tok_end = 0;
  int bound_metric = -1;  // index into metric hits
};

struct MetricHit {
  MetricConstraint metric;
  std::size_t tok_begin = 0;
  std::size_t tok_end = 0;
  bool bound = false;
};

const std::set<std::string>& glue_words() {
  static const std::set<std::string> glue = {"away", "out",     "off",     "directly",
                                             "straight", "just", "exactly", "further",
                                             "farther"};
  return glue;
}

const std::set<std::string>& determiners() {
  static const std::set<std::string> det = {"the", "a", "an", "that", "this", "my", "your", "its"};
  return det;
}

MetricConstraint make_metric(double value, LengthUnit unit, std::size_t char_begin,
                             std::size_t char_end) {
  MetricConstraint m;
  m.stated_unit = unit;
  m.distance_m = to_meters(value, unit);
  if (m.distance_m < 0.01 || m.distance_m > 100.0)
    throw ParseError(ParseError::Kind::MetricOutOfRange,
                     "metric distance must lie in [0.01, 100] meters, got " +
                         std::to_string(m.distance_m),
                     char_begin, char_end);
  return m;
}

// ---------------------------------------------------------------------------
// Canonical form: "<name>(<anchor>[, <anchor2>][, <dist>m])", comma-joined.

std::optional<Predicate> predicate_from_name(const std::string& name) {
  static const std::map<std::string, Predicate> names = {
      {"left_of", Predicate::LeftOf},   {"right_of", Predicate::RightOf},
      {"front_of", Predicate::FrontOf}, {"behind", Predicate::Behind},
      {"above", Predicate::Above},      {"below", Predicate::Below},
      {"near", Predicate::Near},        {"between", Predicate::Between},
  };
  auto it = names.find(name);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool looks_canonical(const std::string& text) {
  const std::string t = trim(text);
  std::size_t i = 0;
  while (i < t.size() && (std::islower(static_cast<unsigned char>(t[i])) || t[i] == '_')) ++i;
  if (i == 0 || i >= t.size()) return false;
  if (!predicate_from_name(t.substr(0, i))) return false;
  while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
  return i < t.size() && t[i] == '(';
}

/// Canonical metric argument: "<number>m" with no whitespace.
std::optional<double> canonical_metric_arg(const std::string& arg) {
  if (arg.size() < 2 || arg.back() != 'm') return std::nullopt;
  const std::string num = arg.substr(0, arg.size() - 1);
  if (!is_plain_number(num)) return std::nullopt;
  return std::stod(num);
}

SdcQuery parse_canonical(const std::string& text) {
  SdcQuery query;
  query.raw_text = text;
  // Canonical clause strings never start with "where", so the query-kind
  // heuristic places them in the object-selection bucket.
  query.kind = QueryKind::WhichObject;
  std::size_t i = 0;
  const auto fail = [&](const std::string& msg, std::size_t at) -> ParseError {
    return ParseError(ParseError::Kind::MissingAnchor, "canonical clause: " + msg, at,
                      text.size());
  };
  while (true) {
    while (i < text.size() && (std::isspace(static_cast<unsigned char>(text[i])) || text[i] == ','))
      ++i;
    if (i >= text.size()) break;
    const std::size_t clause_begin = i;
    std::size_t j = i;
    while (j < text.size() && (std::islower(static_cast<unsigned char>(text[j])) || text[j] == '_'))
      ++j;
    const auto pred = predicate_from_name(text.substr(i, j - i));
    if (!pred) throw fail("unknown predicate name", i);
    while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j >= text.size() || text[j] != '(') throw fail("expected '('", j);
    const std::size_t close = text.find(')', j);
    if (close == std::string::npos) throw fail("missing ')'", j);
    std::vector<std::string> args;
    std::size_t a = j + 1;
    while (a <= close) {
      std::size_t comma = text.find(',', a);
      if (comma == std::string::npos || comma > close) comma = close;
      args.push_back(trim(text.substr(a, comma - a)));
      a = comma + 1;
    }
    while (!args.empty() && args.back().empty()) args.pop_back();

    SdcClause clause;
    clause.predicate = *pred;
    clause.span = {clause_begin, close + 1};
    std::size_t needed_anchors = (*pred == Predicate::Between) ? 2 : 1;
    if (args.size() < needed_anchors) throw fail("too few arguments", j);
    if (args.size() > needed_anchors + 1) throw fail("too many arguments", j);
    for (std::size_t k = 0; k < args.size(); ++k) {
      if (k < needed_anchors) {
        if (args[k].empty()) throw fail("empty anchor", j);
        if (k == 0)
          clause.anchor_text = args[k];
        else
          clause.anchor_text_2 = args[k];
      } else {
        const auto v = canonical_metric_arg(args[k]);
        if (!v) throw fail("bad metric argument '" + args[k] + "'", j);
        clause.metric = make_metric(*v, LengthUnit::Meter, clause_begin, close + 1);
      }
    }
    query.clauses.push_back(std::move(clause));
    i = close + 1;
  }
  if (query.clauses.empty())
    throw ParseError(ParseError::Kind::NoPredicateFound, "no clauses in canonical text", 0,
                     text.size());
  return query;
}

}  // namespace

const char* predicate_name(Predicate p) {
  switch (p) {
    case Predicate::LeftOf: return "left_of";
    case Predicate::RightOf: return "right_of";
    case Predicate::FrontOf: return "front_of";
    case Predicate::Behind: return "behind";
    case Predicate::Above: return "above";
    case Predicate::Below: return "below";
    case Predicate::Near: return "near";
    case Predicate::Between: return "between";
  }
  return "?";
}

SdcQuery parse_query(const std::string& text) {
  if (looks_canonical(text)) return parse_canonical(text);

  const std::vector<Token> tokens = tokenize(text);
  if (tokens.empty())
    throw ParseError(ParseError::Kind::NoPredicateFound, "empty query", 0, text.size());

  SdcQuery query;
  query.raw_text = text;
  const bool leading_where =
      !tokens[0].is_stop && (tokens[0].text == "where" || tokens[0].text == "where's" ||
                             tokens[0].text == "wheres");
  query.kind = leading_where ? QueryKind::Where : QueryKind::WhichObject;

  // Pass 1: predicate phrase occurrences, longest match first, left to right.
  std::vector<PredicateHit> preds;
  std::vector<int> owner(tokens.size(), -1);  // token -> predicate hit index
  for (std::size_t i = 0; i < tokens.size();) {
    if (tokens[i].is_stop) {
      ++i;
      continue;
    }
    bool matched = false;
    for (const PredicatePhrase& phrase : predicate_lexicon()) {
      const std::size_t n = phrase.words.size();
      if (i + n > tokens.size()) continue;
      bool ok = true;
      for (std::size_t k = 0; k < n; ++k) {
        if (tokens[i + k].is_stop || tokens[i + k].text != phrase.words[k]) {
          ok = false;
          break;
        }
      }
      if (ok) {
        PredicateHit hit;
        hit.predicate = phrase.predicate;
        hit.tok_begin = i;
        hit.tok_end = i + n;
        for (std::size_t k = i; k < i + n; ++k) owner[k] = static_cast<int>(preds.size());
        preds.push_back(hit);
        i += n;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  if (preds.empty())
    throw ParseError(ParseError::Kind::NoPredicateFound,
                     "no spatial predicate found in query: \"" + text + "\"", 0, text.size());

  // Pass 2: metric occurrences (number + unit, number words, glued "2m").
  std::vector<MetricHit> metrics;
  std::vector<bool> in_metric(tokens.size(), false);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].is_stop || owner[i] >= 0) continue;
    std::string numtok;
    LengthUnit glued_unit = LengthUnit::Meter;
    if (split_number_unit(tokens[i].text, &numtok, &glued_unit)) {
      MetricHit hit;
      hit.metric = make_metric(std::stod(numtok), glued_unit, tokens[i].begin, tokens[i].end);
      hit.tok_begin = i;
      hit.tok_end = i + 1;
      in_metric[i] = true;
      metrics.push_back(hit);
      continue;
    }

    double value = 0.0;
    bool have_number = false;
    std::size_t value_tokens = 1;
    if (starts_with_digit(tokens[i].text)) {
      if (!is_plain_number(tokens[i].text))
        throw ParseError(ParseError::Kind::BadNumber,
                         "unsupported numeric expression '" + tokens[i].text + "'",
                         tokens[i].begin, tokens[i].end);
      value = std::stod(tokens[i].text);
      have_number = true;
    } else if (auto it = number_words().find(tokens[i].text); it != number_words().end()) {
      value = it->second;
      have_number = true;
    } else if ((tokens[i].text == "a" || tokens[i].text == "an") && i + 1 < tokens.size() &&
               unit_of(tokens[i + 1].text)) {
      value = 1.0;  // "a meter" reads as one unit
      have_number = true;
    } else if (tokens[i].text == "half" && i + 2 < tokens.size() &&
               (tokens[i + 1].text == "a" || tokens[i + 1].text == "an") &&
               unit_of(tokens[i + 2].text)) {
      value = 0.5;
      have_number = true;
      value_tokens = 2;  // "half a" before the unit
    }
    if (!have_number) continue;
    const std::size_t unit_pos = i + value_tokens;
    if (unit_pos >= tokens.size() || tokens[unit_pos].is_stop) continue;
    const auto unit = unit_of(tokens[unit_pos].text);
    if (!unit) continue;  // bare number: may legitimately be part of an anchor name
    MetricHit hit;
    hit.metric = make_metric(value, *unit, tokens[i].begin, tokens[unit_pos].end);
    hit.tok_begin = i;
    hit.tok_end = unit_pos + 1;
    for (std::size_t k = i; k <= unit_pos; ++k) in_metric[k] = true;
    metrics.push_back(hit);
    i = unit_pos;
  }

  // Pass 3: bind each metric to the next predicate across glue words only.
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    MetricHit& hit = metrics[m];
    const std::size_t char_b = tokens[hit.tok_begin].begin;
    const std::size_t char_e = tokens[hit.tok_end - 1].end;
    int target = -1;
    for (std::size_t t = hit.tok_end; t < tokens.size(); ++t) {
      if (owner[t] >= 0) {
        target = owner[t];
        break;
      }
      if (tokens[t].is_stop || !glue_words().count(tokens[t].text)) break;
    }
    if (target < 0)
      throw ParseError(ParseError::Kind::AmbiguousMetricBinding,
                       "cannot attach distance to a predicate: \"" +
                           text.substr(char_b, char_e - char_b) + "\"",
                       char_b, char_e);
    if (preds[target].bound_metric >= 0)
      throw ParseError(ParseError::Kind::AmbiguousMetricBinding,
                       "two distances bind the same predicate: \"" +
                           text.substr(char_b, char_e - char_b) + "\"",
                       char_b, char_e);
    preds[target].bound_metric = static_cast<int>(m);
    hit.bound = true;
  }

  // Pass 4: anchors. Collect words after each predicate until a boundary.
  const auto collect_anchor = [&](std::size_t from, std::size_t* next) -> std::string {
    std::string anchor;
    std::size_t t = from;
    while (t < tokens.size() && !tokens[t].is_stop && owner[t] < 0 && !in_metric[t] &&
           determiners().count(tokens[t].text))
      ++t;
    for (; t < tokens.size(); ++t) {
      if (tokens[t].is_stop || owner[t] >= 0 || in_metric[t]) break;
      if (tokens[t].text == "and" || tokens[t].text == "or" || tokens[t].text == "then") break;
      if (!anchor.empty()) anchor += ' ';
      anchor += tokens[t].text;
    }
    *next = t;
    return anchor;
  };

  for (const PredicateHit& hit : preds) {
    SdcClause clause;
    clause.predicate = hit.predicate;
    if (hit.bound_metric >= 0) clause.metric = metrics[hit.bound_metric].metric;

    std::size_t after = 0;
    clause.anchor_text = collect_anchor(hit.tok_end, &after);
    if (clause.anchor_text.empty())
      throw ParseError(ParseError::Kind::MissingAnchor,
                       std::string("missing anchor phrase after '") +
                           predicate_name(hit.predicate) + "'",
                       tokens[hit.tok_begin].begin, tokens[hit.tok_end - 1].end);
    if (hit.predicate == Predicate::Between) {
      if (after >= tokens.size() || tokens[after].text != "and")
        throw ParseError(ParseError::Kind::MissingAnchor,
                         "'between' requires two anchors joined by 'and'",
                         tokens[hit.tok_begin].begin, tokens[after >= tokens.size()
                                                                 ? tokens.size() - 1
                                                                 : after].end);
      std::size_t after2 = 0;
      const std::string second = collect_anchor(after + 1, &after2);
      if (second.empty())
        throw ParseError(ParseError::Kind::MissingAnchor,
                         "'between' requires two anchors joined by 'and'",
                         tokens[hit.tok_begin].begin, tokens[after2 - 1].end);
      clause.anchor_text_2 = second;
      after = after2;
    }

    const std::size_t span_begin = hit.bound_metric >= 0
                                       ? std::min(tokens[metrics[hit.bound_metric].tok_begin].begin,
                                                  tokens[hit.tok_begin].begin)
                                       : tokens[hit.tok_begin].begin;
    clause.span = {span_begin, tokens[after - 1].end};
    query.clauses.push_back(std::move(clause));
  }

  return query;
}

std::string to_canonical(const SdcClause& clause) {
  std::string out = predicate_name(clause.predicate);
  out += '(';
  out += clause.anchor_text;
  if (clause.anchor_text_2) {
    out += ", ";
    out += *clause.anchor_text_2;
  }
  if (clause.metric) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3fm", clause.metric->distance_m);
    out += ", ";
    out += buf;
  }
  out += ')';
  return out;
}

std::string to_canonical(const SdcQuery& query) {
  std::string out;
  for (std::size_t i = 0; i < query.clauses.size(); ++i) {
    if (i) out += ", ";
    out += to_canonical(query.clauses[i]);
  }
  return out;
}

}  // namespace grounding
