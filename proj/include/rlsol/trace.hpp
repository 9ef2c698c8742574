#pragma once

// Line-delimited event record files for replaying session traces.
//
//   session records:  <t> <score> [<sample-ref>]
//   conv records:     <t> <hard_negative 0|1> [<sample-ref>]
//
// Blank lines and lines starting with '#' are ignored. Writers emit the
// canonical form (single spaces, shortest round-trip number formatting), so
// parse followed by format reproduces a canonical file byte for byte.

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "rlsol/errors.hpp"

namespace rlsol {

struct SessionRecord {
  std::int64_t t = 0;
  double score = 0.0;
  std::optional<std::string> sample_ref;
  bool operator==(const SessionRecord&) const = default;
};

struct ConvRecord {
  std::int64_t t = 0;
  bool hard_negative = false;
  std::optional<std::string> sample_ref;  // present means update_flag
  bool operator==(const ConvRecord&) const = default;
};

namespace detail {

inline std::vector<std::vector<std::string>> tokenize_records(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string w; ss >> w;) tok.push_back(w);
    if (tok.empty() || tok.front().starts_with('#')) continue;
    if (tok.size() < 2 || tok.size() > 3)
      throw InputError("record line " + std::to_string(lineno) + ": expected 2 or 3 fields, got " +
                       std::to_string(tok.size()));
    tok.push_back(std::to_string(lineno));
    rows.push_back(std::move(tok));
  }
  return rows;
}

template <typename T>
T parse_number(const std::string& s, const std::string& lineno) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError("record line " + lineno + ": cannot parse '" + s + "'");
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline std::vector<SessionRecord> parse_session_records(std::istream& in) {
  std::vector<SessionRecord> out;
  for (auto& tok : detail::tokenize_records(in)) {
    const std::string& ln = tok.back();
    SessionRecord r;
    r.t = detail::parse_number<std::int64_t>(tok[0], ln);
    r.score = detail::parse_number<double>(tok[1], ln);
    if (tok.size() == 4) r.sample_ref = tok[2];
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string format_session_records(const std::vector<SessionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += std::to_string(r.t) + " " + detail::format_double(r.score);
    if (r.sample_ref) out += " " + *r.sample_ref;
    out += "\n";
  }
  return out;
}

inline std::vector<ConvRecord> parse_conv_records(std::istream& in) {
  std::vector<ConvRecord> out;
  for (auto& tok : detail::tokenize_records(in)) {
    const std::string& ln = tok.back();
    ConvRecord r;
    r.t = detail::parse_number<std::int64_t>(tok[0], ln);
    const int flag = detail::parse_number<int>(tok[1], ln);
    if (flag != 0 && flag != 1) throw InputError("record line " + ln + ": hard-negative flag must be 0 or 1");
    r.hard_negative = flag == 1;
    if (tok.size() == 4) r.sample_ref = tok[2];
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string format_conv_records(const std::vector<ConvRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += std::to_string(r.t) + (r.hard_negative ? " 1" : " 0");
    if (r.sample_ref) out += " " + *r.sample_ref;
    out += "\n";
  }
  return out;
}

// Looks up a sample reference in a caller-supplied table.
template <typename Sample>
const Sample& resolve_sample(const std::map<std::string, Sample>& table, const std::string& ref) {
  auto it = table.find(ref);
  if (it == table.end()) throw InputError("unknown sample reference '" + ref + "'");
  return it->second;
}

}  // namespace rlsol
