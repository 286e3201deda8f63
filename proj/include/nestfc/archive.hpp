#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace nestfc {

enum class ModelKind { mean, nested };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// An occupied atom as retained in a draw. `key` is k for the mean model and
/// k * L + l for the nested model.
struct AtomRecord {
  std::int32_t key = 0;
  double sigma2 = 0.0;
  std::vector<std::uint8_t> lambda;
  std::vector<double> theta;
};

struct RetainedDraw {
  static constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

  std::uint64_t iteration = 0;
  double log_posterior = 0.0;
  double a = kAbsent, b = kAbsent;    // a, b (mean) or a1, b1 (nested)
  double a2 = kAbsent, b2 = kAbsent;  // nested only
  double gamma = kAbsent;
  double nu2 = kAbsent;
  double omega_fro = kAbsent;
  double sigma_fro = kAbsent;  // mean only
  std::int32_t occupied_top = 0;
  std::int32_t occupied_bottom = 0;  // nested only
  std::vector<std::int32_t> subject_labels;
  std::vector<std::int32_t> curve_labels;  // nested only, subject-major
  std::vector<AtomRecord> atoms;

  const AtomRecord* find_atom(std::int32_t key) const;
};

struct ChainManifest {
  ModelKind model = ModelKind::mean;
  std::size_t chain = 0;
  std::uint64_t seed = 0;
  std::size_t K = 1, L = 1;
  std::size_t sweeps = 0, burnin = 0, thin = 1;
  std::size_t draw_count = 0;
  std::string config_hash;
  std::vector<std::string> subject_ids;
  std::vector<std::vector<std::string>> replicate_ids;
  std::vector<double> knots;
  int degree = 1;
  std::map<std::string, std::string> config;
};

struct ChainArchive {
  ChainManifest manifest;
  std::vector<RetainedDraw> draws;
};

/// Streams draws of one chain into `dir/draws.bin` as length-prefixed
/// records; `finish` writes `dir/manifest.json` with the final draw count.
class ArchiveWriter {
 public:
  ArchiveWriter(const std::filesystem::path& dir, ChainManifest manifest);
  ~ArchiveWriter();
  ArchiveWriter(const ArchiveWriter&) = delete;
  ArchiveWriter& operator=(const ArchiveWriter&) = delete;

  void append(const RetainedDraw& draw);
  void finish();

 private:
  std::filesystem::path dir_;
  ChainManifest manifest_;
  std::ofstream out_;
  bool finished_ = false;
};

void write_archive(const std::filesystem::path& dir, const ChainArchive& archive);

/// Throws DataError on a missing, truncated or malformed archive.
ChainArchive read_archive(const std::filesystem::path& dir);

std::vector<std::uint8_t> encode_draw(const RetainedDraw& draw);
RetainedDraw decode_draw(const std::vector<std::uint8_t>& bytes);

}  // namespace nestfc
