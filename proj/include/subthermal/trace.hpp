#pragma once

// Two-channel photocount records and their line-oriented text formats.
//
// Binned trace:
//   #subthermal-trace v1 tau_ns=<int>
//   <k_count>,<n_count>            one line per bin
//
// Raw events:
//   #subthermal-events v1
//   <channel:0|1>,<timestamp_ns>   timestamps nondecreasing per channel
//
// Channel 0 is the subtraction detector (k), channel 1 the measured
// detector (n). Extra `key=value` tokens on a header line are kept as
// metadata; blank lines are ignored.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace subthermal {

struct BinCounts {
  unsigned subtracted = 0;   // k
  unsigned transmitted = 0;  // n

  bool operator==(const BinCounts&) const = default;
};

struct BinnedTrace {
  std::vector<BinCounts> bins;
  std::int64_t tau_ns = 1;
  std::map<std::string, std::string> meta;
};

struct EventStream {
  std::vector<std::int64_t> subtraction;  // channel 0
  std::vector<std::int64_t> detection;    // channel 1
  // End of the acquisition window, when known.
  std::optional<std::int64_t> end_ns;
};

class TraceFormatError : public std::runtime_error {
 public:
  TraceFormatError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

void write_trace(std::ostream& out, const BinnedTrace& trace);
void write_events(std::ostream& out, const EventStream& events);

BinnedTrace read_trace(std::istream& in);
EventStream read_events(std::istream& in);

enum class TraceFileKind { binned, events };

/// Identifies the format from the first non-blank line.
TraceFileKind detect_trace_kind(const std::filesystem::path& path);

}  // namespace subthermal
