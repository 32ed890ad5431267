#include "madgan/sample_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "madgan/errors.hpp"

namespace madgan::io {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_samples(const data::SampleSet& samples, std::string_view spec_description) {
  std::string out;
  out.reserve(samples.size() * 20 + 128);
  out += "# madgan samples v1\n";
  out += "# spec: " + std::string(spec_description) + "\n";
  out += "# seed: " + std::to_string(samples.seed) + "\n";
  out += "# n: " + std::to_string(samples.size()) + "\n";
  out += "# source: " + samples.source.tag() + "\n";
  out += "value\n";
  for (double v : samples.values) {
    out += format_double(v);
    out += '\n';
  }
  return out;
}

SampleFile parse_samples(std::string_view text) {
  SampleFile f;
  std::size_t line_no = 0;
  bool seen_data_or_header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      if (body.starts_with("spec:")) f.spec = std::string(trim(body.substr(5)));
      if (body.starts_with("source:")) f.source = std::string(trim(body.substr(7)));
      if (body.starts_with("seed:")) {
        const auto v = trim(body.substr(5));
        f.has_seed = std::from_chars(v.data(), v.data() + v.size(), f.seed).ec == std::errc();
      }
      continue;
    }
    if (!seen_data_or_header && line == "value") {
      seen_data_or_header = true;
      continue;
    }
    seen_data_or_header = true;
    double v = 0.0;
    if (!parse_double(line, v) || !std::isfinite(v)) {
      throw ParseError("row " + std::to_string(line_no) + ": not a finite number: '" + std::string(line) + "'");
    }
    f.values.push_back(v);
  }
  return f;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  const auto dir = path.parent_path();
  if (!dir.empty() && !std::filesystem::is_directory(dir)) {
    throw IoError("output directory does not exist: " + dir.string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_samples(const std::filesystem::path& path, const data::SampleSet& samples,
                   std::string_view spec_description) {
  write_text(path, format_samples(samples, spec_description));
}

SampleFile read_samples(const std::filesystem::path& path) {
  try {
    return parse_samples(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string format_bins(const metrics::Histogram& h) {
  std::string out = "bin_left,frequency\n";
  const auto freq = h.frequencies();
  for (std::size_t i = 0; i < h.bins(); ++i) {
    out += format_double(h.edge(i));
    out += ',';
    out += format_double(freq[i]);
    out += '\n';
  }
  return out;
}

void write_bins(const std::filesystem::path& path, const metrics::Histogram& h) { write_text(path, format_bins(h)); }

}  // namespace madgan::io
