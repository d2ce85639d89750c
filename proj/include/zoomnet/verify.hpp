#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomnet/interaction.hpp"

namespace zoomnet {

/// Operators covered by the finite-difference suite, in report order.
const std::vector<std::string>& gradcheck_ops();

struct GradcheckOptions {
  std::vector<std::string> ops;  // empty = all
  std::size_t seeds = 20;
  std::uint64_t first_seed = 0;
  double eps = 1e-5;
  int bits = 64;          // 64 or 32
  double tolerance = 0;   // 0 = 1e-3 for 64-bit, 1e-2 for 32-bit
};

struct GradcheckRow {
  std::string op;
  std::size_t seeds = 0;
  double max_error = 0;
  double tolerance = 0;
  bool pass = false;
  double seconds = 0;
};

/// Runs each operator on `seeds` random fixtures and keeps the worst
/// relative error. Unknown op names throw ConfigError.
std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& opts);
std::string gradcheck_table(const std::vector<GradcheckRow>& rows);
nlohmann::json to_json(const GradcheckRow& row);

struct BenchRow {
  std::string module;
  std::size_t stacks = 0;
  std::uint64_t macs = 0;        // conv multiply-accumulates per forward
  std::size_t parameters = 0;
  std::size_t pooled_cells = 0;  // ROI/deROI output cells per forward
  double ms_per_forward = 0;     // median over repeats
};

struct BenchOptions {
  std::size_t channels = 32;
  std::size_t pooled = 8;
  std::size_t fusion_convs = 1;
  std::size_t repeats = 50;
  std::uint64_t seed = 0;
};

/// Forward time of A-M, CA-M, SCA-M and 2×SCA-M on one fixed feature triple.
std::vector<BenchRow> run_bench(const BenchOptions& opts);
std::string bench_table(const std::vector<BenchRow>& rows);
nlohmann::json to_json(const BenchRow& row);

/// Conv multiply-accumulates of one interaction module at pooled×pooled.
std::uint64_t interaction_macs(InteractionKind kind, FusionMode mode, std::size_t channels, std::size_t pooled,
                               std::size_t fusion_convs);

}  // namespace zoomnet
