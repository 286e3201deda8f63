#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "nestfc/archive.hpp"
#include "nestfc/basis.hpp"
#include "nestfc/model.hpp"
#include "nestfc/sampler_mean.hpp"

namespace nestfc {

/// Everything a fit needs besides the data. Keys accepted by `set` are the
/// field names below (e.g. `K`, `sweeps`, `a_shape`, `nu_omega`).
struct RunConfig {
  ModelKind model = ModelKind::mean;
  std::size_t K = 40, L = 30;
  std::size_t sweeps = 2000, burnin = 500, thin = 1, chains = 2;
  std::uint64_t seed = 1;
  std::optional<double> spline_lo, spline_hi;  // default: data range
  std::size_t p = 13;
  int q = 1;
  double nu1 = 2.0, nu2 = 0.04, eta1 = 2.0, eta2 = 4.0;
  GammaPrior a, b, a1, b1, a2, b2;
  double rho = 2.0, psi = 50.0;
  std::optional<double> nu_omega, nu_sigma;  // default: p + 3
  std::string out = "nestfc_out";

  /// Throws std::invalid_argument on an unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  /// Reads `key = value` lines; blank lines and `#` comments are skipped.
  void load(const std::filesystem::path& path);
  /// Throws std::invalid_argument when the settings are inconsistent.
  void validate() const;

  /// Every model-relevant setting as canonical text (the output directory
  /// is excluded).
  std::map<std::string, std::string> canonical() const;
  /// FNV-1a of the canonical settings, as 16 hex digits.
  std::string hash() const;

  SplineBasis basis(const NestedDataset& data) const;
  Hyperparams hyperparams(const PreparedData& data) const;
  RunSettings run_settings(std::size_t chain) const;
  std::uint64_t chain_seed(std::size_t chain) const;
};

/// Shortest text that parses back to the same double (17 significant digits).
std::string format_double(double v);

}  // namespace nestfc
