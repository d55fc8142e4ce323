#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "bitup/delimited_table.hpp"

namespace bitup {

/// Synthetic label table: column "user_id" plus label_0..label_{n-1}.
/// Value vK has Zipf weight 1/(K+1)^exponent, so v0 is the most common.
struct CorpusSpec {
  uint64_t rows = 1000;
  uint32_t labels = 3;
  uint32_t values_per_label = 20;
  double zipf_exponent = 1.0;
  double empty_probability = 0.0;
  uint64_t seed = 42;
};

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

class ZipfSampler {
 public:
  ZipfSampler(uint32_t n, double exponent);
  uint32_t operator()(std::mt19937_64& rng) const;

 private:
  std::vector<double> cdf_;
};

/// Deterministic for a given spec. External ids are distinct.
DelimitedTable generate_corpus(const CorpusSpec& spec);

struct BenchConfig {
  std::vector<uint64_t> scales{10'000, 100'000, 1'000'000};
  std::vector<uint32_t> label_counts{1, 2, 3};
  uint32_t tablet_count = 6;
  uint32_t parallelism = 6;
  uint32_t runs = 50;
  uint32_t values_per_label = 20;
  uint64_t seed = 42;
  std::filesystem::path work_dir;
};

struct BenchRow {
  uint64_t scale = 0;
  uint32_t labels = 0;
  double millis = 0.0;  // median over runs
  uint64_t count = 0;
};

/// For every scale: generate, map, build and store a corpus, open the tablet
/// set once, then time an AND of the most common value of the first k labels.
/// Counts at the smallest scale are checked against a row scan; a mismatch
/// throws.
std::vector<BenchRow> run_bench(const BenchConfig& config, std::ostream* log = nullptr);

/// "scale,labels,millis,count" header plus one line per row.
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace bitup
