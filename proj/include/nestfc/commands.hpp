#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nestfc/archive.hpp"
#include "nestfc/config.hpp"
#include "nestfc/gdp.hpp"
#include "nestfc/model.hpp"
#include "nestfc/sampler_common.hpp"

// File-producing operations behind the command-line tool.
namespace nestfc {

/// Runs `config.chains` chains in parallel threads, each streaming into
/// `out/chain_<c>/`. Returns the chain directories.
std::vector<std::filesystem::path> fit_chains(const NestedDataset& data, const RunConfig& config,
                                              const std::filesystem::path& out, const SamplerOptions& options = {});

/// Accepts chain directories or fit output directories holding `chain_*`.
std::vector<ChainArchive> load_archives(std::span<const std::filesystem::path> paths);

/// Writes incidence.csv, partition.json and curves.csv into `out`.
void summarize(std::span<const ChainArchive> archives, const std::filesystem::path& out, std::size_t grid_points);

/// Writes psrf.json into `out`. Throws std::invalid_argument with fewer than
/// two chains.
void diagnose(std::span<const ChainArchive> archives, const std::filesystem::path& out);

/// growth.csv rows n = 1..n_max; the Monte Carlo columns come from `reps`
/// simulated partitions.
void write_growth(const std::filesystem::path& path, const GdpParams& params, std::size_t n_max, std::size_t reps,
                  std::uint64_t seed);

/// structure.csv: one row per (ratio, total) with a = ratio * total and
/// b = (1 - ratio) * total, totals log-spaced over [min_total, max_total].
void write_structure(const std::filesystem::path& path, std::span<const double> ratios, std::size_t points,
                     double min_total, double max_total, std::size_t n, std::size_t reps, std::uint64_t seed);

}  // namespace nestfc
