#include "subthermal/trace.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string_view>

namespace subthermal {

namespace {

constexpr std::string_view kTraceMagic = "#subthermal-trace";
constexpr std::string_view kEventsMagic = "#subthermal-events";
constexpr std::string_view kVersion = "v1";

template <typename Int>
Int parse_int(std::string_view text, std::size_t line, const char* field) {
  Int value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw TraceFormatError(line, std::string("invalid ") + field + " '" + std::string(text) + "'");
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::pair<std::string_view, std::string_view> split_pair(std::string_view line, std::size_t lineno) {
  const auto comma = line.find(',');
  if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
    throw TraceFormatError(lineno, "expected two comma-separated fields");
  }
  return {trim(line.substr(0, comma)), trim(line.substr(comma + 1))};
}

// Parses "<magic> v1 key=value ..." into a key/value map.
std::map<std::string, std::string> parse_header(std::string_view line, std::string_view magic,
                                                std::size_t lineno) {
  std::istringstream tokens{std::string(line)};
  std::string word;
  tokens >> word;
  if (word != magic) {
    throw TraceFormatError(lineno, "expected header '" + std::string(magic) + " v1'");
  }
  tokens >> word;
  if (word != kVersion) throw TraceFormatError(lineno, "unsupported format version '" + word + "'");
  std::map<std::string, std::string> fields;
  while (tokens >> word) {
    const auto eq = word.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw TraceFormatError(lineno, "malformed header token '" + word + "'");
    }
    fields[word.substr(0, eq)] = word.substr(eq + 1);
  }
  return fields;
}

// Returns the first non-blank line, or nothing at end of input.
bool next_line(std::istream& in, std::string& line, std::size_t& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) return true;
  }
  return false;
}

}  // namespace

TraceFormatError::TraceFormatError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

void write_trace(std::ostream& out, const BinnedTrace& trace) {
  out << kTraceMagic << ' ' << kVersion << " tau_ns=" << trace.tau_ns << '\n';
  std::string buffer;
  buffer.reserve(1 << 16);
  char num[32];
  for (const auto& bin : trace.bins) {
    auto r1 = std::to_chars(num, num + sizeof num, bin.subtracted);
    buffer.append(num, r1.ptr);
    buffer.push_back(',');
    auto r2 = std::to_chars(num, num + sizeof num, bin.transmitted);
    buffer.append(num, r2.ptr);
    buffer.push_back('\n');
    if (buffer.size() > (1 << 16) - 64) {
      out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
      buffer.clear();
    }
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
}

void write_events(std::ostream& out, const EventStream& events) {
  out << kEventsMagic << ' ' << kVersion;
  if (events.end_ns) out << " end_ns=" << *events.end_ns;
  out << '\n';
  // Merge both channels in time order for readability.
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < events.subtraction.size() || j < events.detection.size()) {
    const bool take_first = j == events.detection.size() ||
                            (i < events.subtraction.size() && events.subtraction[i] <= events.detection[j]);
    if (take_first) {
      out << "0," << events.subtraction[i++] << '\n';
    } else {
      out << "1," << events.detection[j++] << '\n';
    }
  }
}

BinnedTrace read_trace(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!next_line(in, line, lineno)) throw TraceFormatError(1, "empty trace file");
  auto fields = parse_header(trim(line), kTraceMagic, lineno);

  BinnedTrace trace;
  const auto tau = fields.find("tau_ns");
  if (tau == fields.end()) throw TraceFormatError(lineno, "header lacks tau_ns");
  trace.tau_ns = parse_int<std::int64_t>(tau->second, lineno, "tau_ns");
  if (trace.tau_ns <= 0) throw TraceFormatError(lineno, "tau_ns must be positive");
  fields.erase(tau);
  trace.meta = std::move(fields);

  while (next_line(in, line, lineno)) {
    const auto [k_text, n_text] = split_pair(trim(line), lineno);
    trace.bins.push_back({parse_int<unsigned>(k_text, lineno, "k_count"),
                          parse_int<unsigned>(n_text, lineno, "n_count")});
  }
  return trace;
}

EventStream read_events(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!next_line(in, line, lineno)) throw TraceFormatError(1, "empty event file");
  auto fields = parse_header(trim(line), kEventsMagic, lineno);

  EventStream events;
  if (auto end = fields.find("end_ns"); end != fields.end()) {
    events.end_ns = parse_int<std::int64_t>(end->second, lineno, "end_ns");
  }
  while (next_line(in, line, lineno)) {
    const auto [channel_text, time_text] = split_pair(trim(line), lineno);
    const auto channel = parse_int<unsigned>(channel_text, lineno, "channel");
    const auto t = parse_int<std::int64_t>(time_text, lineno, "timestamp");
    if (t < 0) throw TraceFormatError(lineno, "negative timestamp");
    if (channel > 1) throw TraceFormatError(lineno, "channel must be 0 or 1");
    auto& stream = channel == 0 ? events.subtraction : events.detection;
    if (!stream.empty() && t < stream.back()) {
      throw TraceFormatError(lineno, "timestamps decrease on channel " + std::to_string(channel));
    }
    stream.push_back(t);
  }
  return events;
}

TraceFileKind detect_trace_kind(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  if (!next_line(in, line, lineno)) throw TraceFormatError(1, "empty input file");
  const auto head = trim(line);
  if (head.starts_with(kTraceMagic)) return TraceFileKind::binned;
  if (head.starts_with(kEventsMagic)) return TraceFileKind::events;
  throw TraceFormatError(lineno, "unrecognized header");
}

}  // namespace subthermal
