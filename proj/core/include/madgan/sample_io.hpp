#pragma once

// Single-column sample CSV files and plot-ready bin CSVs.
//
// Sample files look like
//
//   # madgan samples v1
//   # spec: means=10,20;stds=3,3;weights=0.5,0.5
//   # seed: 7
//   # n: 1000
//   # source: real
//   value
//   12.345
//   ...
//
// Lines starting with '#' are comments; the "value" header is optional on read.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "madgan/gmm.hpp"
#include "madgan/metrics.hpp"

namespace madgan::io {

struct SampleFile {
  std::vector<double> values;
  // Header fields, when present.
  std::string spec;
  std::string source;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

std::string format_samples(const data::SampleSet& samples, std::string_view spec_description);
// Throws ParseError naming the 1-based line of the first non-numeric row.
SampleFile parse_samples(std::string_view text);

// Throws IoError naming the missing directory or unwritable path.
void write_samples(const std::filesystem::path& path, const data::SampleSet& samples,
                   std::string_view spec_description);
SampleFile read_samples(const std::filesystem::path& path);

// "bin_left,frequency" rows, one per bin.
std::string format_bins(const metrics::Histogram& h);
void write_bins(const std::filesystem::path& path, const metrics::Histogram& h);

// Writes text to path, creating nothing but the file itself.
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace madgan::io
