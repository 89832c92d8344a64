#ifndef QRL_TRACE_IO_HPP
#define QRL_TRACE_IO_HPP

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "qrl/trajectory.hpp"

namespace qrl {

/// File could not be opened, written or renamed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File contents do not match the documented layout.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::uint64_t offset, const std::string& message)
      : std::runtime_error("trace file: " + message + " at byte offset " + std::to_string(offset)),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

enum class TraceFormat { kCsv, kPackedBinary };

inline constexpr char kTraceMagic[4] = {'Q', 'R', 'T', '1'};
inline constexpr std::uint16_t kTraceVersion = 1;
inline constexpr std::size_t kTraceHeaderBytes = 4 + 2 + 8 + 8 + 8;

inline TraceFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? TraceFormat::kCsv : TraceFormat::kPackedBinary;
}

inline std::filesystem::path truth_sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".truth.csv");
}

namespace io_detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

template <typename T>
std::string shortest(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Writes to a sibling temp file and renames it into place, so a failed write
/// never leaves a partial file at `path`.
inline void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("short write to " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string());
  }
}

inline std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read error on " + path.string());
  return ss.str();
}

inline void check_shape(const std::vector<ExperimentRecord>& records, double& dt, std::size_t& spr) {
  dt = records.empty() ? 10.0 : records.front().trace.sample_dt;
  spr = records.empty() ? 0 : records.front().trace.samples.size();
  for (const auto& r : records) {
    if (r.trace.sample_dt != dt || r.trace.samples.size() != spr) {
      throw std::invalid_argument("export_traces: records must share sample_dt and length");
    }
  }
}

inline std::string encode_truth(const std::vector<ExperimentRecord>& records) {
  std::string out = "record,initial,duration_ns,transitions\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& t = records[i].truth;
    if (!t) continue;
    out += std::to_string(i) + ',' + std::to_string(static_cast<int>(t->initial)) + ',' +
           shortest(t->duration) + ',';
    for (std::size_t k = 0; k < t->transitions.size(); ++k) {
      if (k) out += ' ';
      out += shortest(t->transitions[k].time) + ':' +
             std::to_string(static_cast<int>(t->transitions[k].state));
    }
    out += '\n';
  }
  return out;
}

template <typename T = double>
T parse_number(std::string_view s, std::uint64_t offset) {
  T v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError(offset, "malformed number '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const auto next = line.find(sep, pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? line.npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline QubitState parse_state(std::string_view s, std::uint64_t offset) {
  if (s == "0") return QubitState::kGround;
  if (s == "1") return QubitState::kExcited;
  throw FormatError(offset, "bad state label '" + std::string(s) + "'");
}

inline void apply_truth(const std::string& text, std::vector<ExperimentRecord>& records) {
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos) return;
  ++pos;
  while (pos < text.size()) {
    const auto eol = text.find('\n', pos);
    const std::string_view line(text.data() + pos, (eol == std::string::npos ? text.size() : eol) - pos);
    const std::uint64_t offset = pos;
    pos = eol == std::string::npos ? text.size() : eol + 1;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 4) throw FormatError(offset, "truth row needs 4 columns");
    const auto idx = static_cast<std::size_t>(parse_number(cols[0], offset));
    if (idx >= records.size()) throw FormatError(offset, "truth row for unknown record");
    StatePath path{parse_state(cols[1], offset), {}, parse_number(cols[2], offset)};
    if (!cols[3].empty()) {
      for (auto item : split(cols[3], ' ')) {
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) throw FormatError(offset, "bad transition entry");
        path.transitions.push_back(
            {parse_number(item.substr(0, colon), offset), parse_state(item.substr(colon + 1), offset)});
      }
    }
    records[idx].truth = std::move(path);
  }
}

/// Imported records carry only markers, so every bin counts as readout.
inline ExperimentRecord make_imported(double dt, std::vector<float> samples, QubitState label,
                                      const double markers[4]) {
  ExperimentRecord r;
  r.prepared_label = label;
  r.sequence.sample_dt = dt;
  r.sequence.t_S = markers[0];
  r.sequence.t_A = markers[1];
  r.sequence.t_B = markers[2];
  r.sequence.t_D = markers[3];
  const double duration = static_cast<double>(samples.size()) * dt;
  r.sequence.readout_window = Window{0.0, duration};
  if (std::isfinite(markers[0])) r.sequence.herald_window = Window{markers[0], markers[0] + dt};
  r.trace = HomodyneTrace{dt, std::move(samples), r.sequence.readout_window};
  return r;
}

}  // namespace io_detail

/// Writes records to `path`. Hidden truth goes to a `<path>.truth.csv`
/// sidecar and only when `include_truth` is set. Returns records written.
inline std::size_t export_traces(const std::vector<ExperimentRecord>& records,
                                 const std::filesystem::path& path, TraceFormat format,
                                 bool include_truth = false) {
  using namespace io_detail;
  double dt = 0.0;
  std::size_t spr = 0;
  check_shape(records, dt, spr);
  std::string bytes;
  if (format == TraceFormat::kPackedBinary) {
    bytes.reserve(kTraceHeaderBytes + records.size() * (1 + 32 + 4 * spr));
    bytes.append(kTraceMagic, 4);
    put_le<std::uint16_t>(bytes, kTraceVersion);
    put_le<double>(bytes, dt);
    put_le<std::uint64_t>(bytes, records.size());
    put_le<std::uint64_t>(bytes, spr);
    for (const auto& r : records) {
      put_le<std::uint8_t>(bytes, static_cast<std::uint8_t>(r.prepared_label));
      for (double m : {r.sequence.t_S, r.sequence.t_A, r.sequence.t_B, r.sequence.t_D}) put_le<double>(bytes, m);
      for (float s : r.trace.samples) put_le<float>(bytes, s);
    }
  } else {
    bytes = "# sample_dt_ns=" + shortest(dt) + "\nlabel,t_S,t_A,t_B,t_D";
    for (std::size_t k = 0; k < spr; ++k) bytes += ",s" + std::to_string(k);
    bytes += '\n';
    for (const auto& r : records) {
      bytes += std::to_string(static_cast<int>(r.prepared_label));
      for (double m : {r.sequence.t_S, r.sequence.t_A, r.sequence.t_B, r.sequence.t_D}) bytes += ',' + shortest(m);
      for (float s : r.trace.samples) bytes += ',' + shortest(s);
      bytes += '\n';
    }
  }
  write_atomically(path, bytes);
  if (include_truth) write_atomically(truth_sidecar(path), encode_truth(records));
  return records.size();
}

inline std::vector<ExperimentRecord> import_traces(const std::filesystem::path& path, TraceFormat format) {
  using namespace io_detail;
  const std::string bytes = read_all(path);
  std::vector<ExperimentRecord> records;
  if (format == TraceFormat::kPackedBinary) {
    if (bytes.size() < kTraceHeaderBytes) throw FormatError(bytes.size(), "truncated header");
    if (std::memcmp(bytes.data(), kTraceMagic, 4) != 0) throw FormatError(0, "bad magic");
    const auto version = get_le<std::uint16_t>(bytes, 4);
    if (version != kTraceVersion) {
      throw FormatError(4, "unsupported version " + std::to_string(version));
    }
    const double dt = get_le<double>(bytes, 6);
    const auto n = get_le<std::uint64_t>(bytes, 14);
    const auto spr = get_le<std::uint64_t>(bytes, 22);
    if (!(dt > 0.0)) throw FormatError(6, "sample_dt must be > 0");
    const std::uint64_t stride = 1 + 32 + 4 * spr;
    if (spr > (std::numeric_limits<std::uint64_t>::max() - 33) / 4 ||
        (stride && n > (std::numeric_limits<std::uint64_t>::max() - kTraceHeaderBytes) / stride)) {
      throw FormatError(14, "record count overflows");
    }
    const std::uint64_t expected = kTraceHeaderBytes + n * stride;
    if (bytes.size() < expected) {
      throw FormatError(bytes.size(), "truncated: expected " + std::to_string(expected) + " bytes");
    }
    if (bytes.size() > expected) throw FormatError(expected, "trailing bytes after last record");
    records.reserve(n);
    std::size_t off = kTraceHeaderBytes;
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto label_byte = get_le<std::uint8_t>(bytes, off);
      if (label_byte > 1) throw FormatError(off, "bad prepared label");
      double markers[4];
      for (int k = 0; k < 4; ++k) markers[k] = get_le<double>(bytes, off + 1 + 8 * k);
      off += 33;
      std::vector<float> samples(spr);
      for (std::uint64_t k = 0; k < spr; ++k, off += 4) samples[k] = get_le<float>(bytes, off);
      records.push_back(make_imported(dt, std::move(samples), static_cast<QubitState>(label_byte), markers));
    }
  } else {
    std::size_t pos = 0;
    auto next_line = [&](std::uint64_t& at) -> std::string_view {
      at = pos;
      const auto eol = bytes.find('\n', pos);
      const std::size_t end = eol == std::string::npos ? bytes.size() : eol;
      std::string_view line(bytes.data() + pos, end - pos);
      pos = eol == std::string::npos ? bytes.size() : eol + 1;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      return line;
    };
    std::uint64_t at = 0;
    const std::string_view meta = next_line(at);
    constexpr std::string_view kPrefix = "# sample_dt_ns=";
    if (!meta.starts_with(kPrefix)) throw FormatError(0, "missing '# sample_dt_ns=' line");
    const double dt = parse_number(meta.substr(kPrefix.size()), at);
    const auto header = split(next_line(at), ',');
    if (header.size() < 5 || header[0] != "label") throw FormatError(at, "bad column header");
    const std::size_t spr = header.size() - 5;
    while (pos < bytes.size()) {
      const std::string_view line = next_line(at);
      if (line.empty()) continue;
      const auto cols = split(line, ',');
      if (cols.size() != spr + 5) throw FormatError(at, "row has wrong column count");
      double markers[4];
      for (int k = 0; k < 4; ++k) markers[k] = parse_number(cols[1 + k], at);
      std::vector<float> samples(spr);
      for (std::size_t k = 0; k < spr; ++k) samples[k] = parse_number<float>(cols[5 + k], at);
      records.push_back(make_imported(dt, std::move(samples), parse_state(cols[0], at), markers));
    }
  }
  const auto sidecar = truth_sidecar(path);
  if (std::filesystem::exists(sidecar)) apply_truth(read_all(sidecar), records);
  return records;
}

inline std::vector<ExperimentRecord> import_traces(const std::filesystem::path& path) {
  return import_traces(path, format_for_path(path));
}

}  // namespace qrl

#endif  // QRL_TRACE_IO_HPP
