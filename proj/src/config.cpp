#include "nestfc/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>

#include "nestfc/rng.hpp"

namespace nestfc {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("invalid value for " + key + ": '" + text + "'");
  return value;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter number(T RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<T>(k, v); };
}

Setter optional_double(std::optional<double> RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<double>(k, v); };
}

Setter gamma_field(GammaPrior RunConfig::*prior, double GammaPrior::*part) {
  return [prior, part](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*prior).*part = parse_number<double>(k, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["model"] = [](RunConfig& c, const std::string&, const std::string& v) { c.model = parse_model_kind(v); };
    t["K"] = number(&RunConfig::K);
    t["L"] = number(&RunConfig::L);
    t["sweeps"] = number(&RunConfig::sweeps);
    t["burnin"] = number(&RunConfig::burnin);
    t["thin"] = number(&RunConfig::thin);
    t["chains"] = number(&RunConfig::chains);
    t["seed"] = number(&RunConfig::seed);
    t["spline_lo"] = optional_double(&RunConfig::spline_lo);
    t["spline_hi"] = optional_double(&RunConfig::spline_hi);
    t["p"] = number(&RunConfig::p);
    t["q"] = number(&RunConfig::q);
    t["nu1"] = number(&RunConfig::nu1);
    t["nu2"] = number(&RunConfig::nu2);
    t["eta1"] = number(&RunConfig::eta1);
    t["eta2"] = number(&RunConfig::eta2);
    t["rho"] = number(&RunConfig::rho);
    t["psi"] = number(&RunConfig::psi);
    t["nu_omega"] = optional_double(&RunConfig::nu_omega);
    t["nu_sigma"] = optional_double(&RunConfig::nu_sigma);
    t["out"] = [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; };
    const std::pair<const char*, GammaPrior RunConfig::*> priors[] = {
        {"a", &RunConfig::a}, {"b", &RunConfig::b}, {"a1", &RunConfig::a1},
        {"b1", &RunConfig::b1}, {"a2", &RunConfig::a2}, {"b2", &RunConfig::b2}};
    for (const auto& [name, field] : priors) {
      t[std::string(name) + "_shape"] = gamma_field(field, &GammaPrior::shape);
      t[std::string(name) + "_rate"] = gamma_field(field, &GammaPrior::rate);
    }
    return t;
  }();
  return table;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw std::invalid_argument("unknown config key '" + key + "'");
  it->second(*this, key, trim(value));
}

void RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": expected key=value");
    }
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void RunConfig::validate() const {
  if (K == 0 || L == 0) throw std::invalid_argument("K and L must be at least 1");
  if (sweeps <= burnin) throw std::invalid_argument("sweeps must exceed burnin");
  if (thin == 0) throw std::invalid_argument("thin must be at least 1");
  if (chains == 0) throw std::invalid_argument("chains must be at least 1");
  if (p == 0) throw std::invalid_argument("p must be at least 1");
  if (q < 0) throw std::invalid_argument("q must be non-negative");
  if (spline_lo && spline_hi && *spline_lo > *spline_hi) throw std::invalid_argument("spline_lo exceeds spline_hi");
}

std::map<std::string, std::string> RunConfig::canonical() const {
  std::map<std::string, std::string> m;
  m["model"] = to_string(model);
  m["K"] = std::to_string(K);
  m["L"] = std::to_string(L);
  m["sweeps"] = std::to_string(sweeps);
  m["burnin"] = std::to_string(burnin);
  m["thin"] = std::to_string(thin);
  m["chains"] = std::to_string(chains);
  m["seed"] = std::to_string(seed);
  m["spline_lo"] = spline_lo ? format_double(*spline_lo) : "auto";
  m["spline_hi"] = spline_hi ? format_double(*spline_hi) : "auto";
  m["p"] = std::to_string(p);
  m["q"] = std::to_string(q);
  for (const auto& [k, v] : {std::pair{"nu1", nu1}, {"nu2", nu2}, {"eta1", eta1}, {"eta2", eta2}, {"rho", rho},
                             {"psi", psi}}) {
    m[k] = format_double(v);
  }
  m["nu_omega"] = nu_omega ? format_double(*nu_omega) : "auto";
  m["nu_sigma"] = nu_sigma ? format_double(*nu_sigma) : "auto";
  for (const auto& [name, g] : {std::pair{"a", a}, {"b", b}, {"a1", a1}, {"b1", b1}, {"a2", a2}, {"b2", b2}}) {
    m[std::string(name) + "_shape"] = format_double(g.shape);
    m[std::string(name) + "_rate"] = format_double(g.rate);
  }
  return m;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : canonical()) {
    for (char ch : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SplineBasis RunConfig::basis(const NestedDataset& data) const {
  const auto [lo, hi] = data.x_range();
  return SplineBasis::equally_spaced(spline_lo.value_or(lo), spline_hi.value_or(hi), p, q);
}

Hyperparams RunConfig::hyperparams(const PreparedData& data) const {
  const auto designs = data.designs();
  Hyperparams h = Hyperparams::defaults(designs);
  h.nu1 = nu1;
  h.nu2 = nu2;
  h.eta1 = eta1;
  h.eta2 = eta2;
  h.a = a;
  h.b = b;
  h.a1 = a1;
  h.b1 = b1;
  h.a2 = a2;
  h.b2 = b2;
  h.rho = rho;
  h.psi = psi;
  if (nu_omega) h.nu_omega = *nu_omega;
  if (nu_sigma) h.nu_sigma = *nu_sigma;
  h.validate(data.dim);
  return h;
}

std::uint64_t RunConfig::chain_seed(std::size_t chain) const { return mix_seed(mix_seed(seed) + chain); }

RunSettings RunConfig::run_settings(std::size_t chain) const {
  RunSettings r;
  r.K = K;
  r.L = L;
  r.sweeps = sweeps;
  r.burnin = burnin;
  r.thin = thin;
  r.seed = chain_seed(chain);
  return r;
}

}  // namespace nestfc
