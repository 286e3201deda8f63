#include "nestfc/archive.hpp"

#include <cstring>
#include <type_traits>

#include <json.hpp>

#include "nestfc/errors.hpp"

namespace nestfc {

namespace {

constexpr char kMagic[8] = {'N', 'F', 'C', 'D', 'R', 'A', 'W', '1'};

class Encoder {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  template <typename T>
  void put_vector(const std::vector<T>& values) {
    put(static_cast<std::uint32_t>(values.size()));
    for (const T& v : values) put(v);
  }
  std::vector<std::uint8_t> bytes;
};

class Decoder {
 public:
  explicit Decoder(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw DataError("archive record is truncated");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  template <typename T>
  std::vector<T> get_vector() {
    const auto n = get<std::uint32_t>();
    if (pos_ + static_cast<std::size_t>(n) * sizeof(T) > bytes_.size()) throw DataError("archive record is truncated");
    std::vector<T> out(n);
    for (auto& v : out) v = get<T>();
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

nlohmann::ordered_json manifest_json(const ChainManifest& m) {
  nlohmann::ordered_json j;
  j["format"] = "nestfc-archive-1";
  j["model"] = to_string(m.model);
  j["chain"] = m.chain;
  j["seed"] = m.seed;
  j["K"] = m.K;
  j["L"] = m.L;
  j["sweeps"] = m.sweeps;
  j["burnin"] = m.burnin;
  j["thin"] = m.thin;
  j["draw_count"] = m.draw_count;
  j["config_hash"] = m.config_hash;
  j["subject_ids"] = m.subject_ids;
  j["replicate_ids"] = m.replicate_ids;
  j["knots"] = m.knots;
  j["degree"] = m.degree;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.config) cfg[k] = v;
  j["config"] = cfg;
  return j;
}

ChainManifest manifest_from_json(const nlohmann::json& j) {
  ChainManifest m;
  m.model = parse_model_kind(j.at("model").get<std::string>());
  m.chain = j.at("chain").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.K = j.at("K").get<std::size_t>();
  m.L = j.at("L").get<std::size_t>();
  m.sweeps = j.at("sweeps").get<std::size_t>();
  m.burnin = j.at("burnin").get<std::size_t>();
  m.thin = j.at("thin").get<std::size_t>();
  m.draw_count = j.at("draw_count").get<std::size_t>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.subject_ids = j.at("subject_ids").get<std::vector<std::string>>();
  m.replicate_ids = j.at("replicate_ids").get<std::vector<std::vector<std::string>>>();
  m.knots = j.at("knots").get<std::vector<double>>();
  m.degree = j.at("degree").get<int>();
  for (const auto& [k, v] : j.at("config").items()) m.config[k] = v.get<std::string>();
  return m;
}

void write_manifest(const std::filesystem::path& dir, const ChainManifest& m) {
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << manifest_json(m).dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + (dir / "manifest.json").string());
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::mean ? "mean" : "nested"; }

ModelKind parse_model_kind(const std::string& text) {
  if (text == "mean") return ModelKind::mean;
  if (text == "nested") return ModelKind::nested;
  throw std::invalid_argument("unknown model '" + text + "' (expected mean or nested)");
}

const AtomRecord* RetainedDraw::find_atom(std::int32_t key) const {
  for (const auto& a : atoms)
    if (a.key == key) return &a;
  return nullptr;
}

std::vector<std::uint8_t> encode_draw(const RetainedDraw& d) {
  Encoder e;
  e.put(d.iteration);
  e.put(d.log_posterior);
  for (double v : {d.a, d.b, d.a2, d.b2, d.gamma, d.nu2, d.omega_fro, d.sigma_fro}) e.put(v);
  e.put(d.occupied_top);
  e.put(d.occupied_bottom);
  e.put_vector(d.subject_labels);
  e.put_vector(d.curve_labels);
  e.put(static_cast<std::uint32_t>(d.atoms.size()));
  for (const auto& atom : d.atoms) {
    e.put(atom.key);
    e.put(atom.sigma2);
    e.put_vector(atom.lambda);
    e.put_vector(atom.theta);
  }
  return std::move(e.bytes);
}

RetainedDraw decode_draw(const std::vector<std::uint8_t>& bytes) {
  Decoder dec(bytes);
  RetainedDraw d;
  d.iteration = dec.get<std::uint64_t>();
  d.log_posterior = dec.get<double>();
  for (double* v : {&d.a, &d.b, &d.a2, &d.b2, &d.gamma, &d.nu2, &d.omega_fro, &d.sigma_fro}) *v = dec.get<double>();
  d.occupied_top = dec.get<std::int32_t>();
  d.occupied_bottom = dec.get<std::int32_t>();
  d.subject_labels = dec.get_vector<std::int32_t>();
  d.curve_labels = dec.get_vector<std::int32_t>();
  const auto n_atoms = dec.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_atoms; ++i) {
    AtomRecord atom;
    atom.key = dec.get<std::int32_t>();
    atom.sigma2 = dec.get<double>();
    atom.lambda = dec.get_vector<std::uint8_t>();
    atom.theta = dec.get_vector<double>();
    if (atom.lambda.size() != atom.theta.size()) throw DataError("archive atom has inconsistent dimensions");
    d.atoms.push_back(std::move(atom));
  }
  if (!dec.done()) throw DataError("archive record has trailing bytes");
  return d;
}

ArchiveWriter::ArchiveWriter(const std::filesystem::path& dir, ChainManifest manifest)
    : dir_(dir), manifest_(std::move(manifest)) {
  std::filesystem::create_directories(dir_);
  out_.open(dir_ / "draws.bin", std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write " + (dir_ / "draws.bin").string());
  out_.write(kMagic, sizeof(kMagic));
  manifest_.draw_count = 0;
}

ArchiveWriter::~ArchiveWriter() {
  if (!finished_) {
    try {
      finish();
    } catch (...) {
    }
  }
}

void ArchiveWriter::append(const RetainedDraw& draw) {
  const auto bytes = encode_draw(draw);
  const auto len = static_cast<std::uint32_t>(bytes.size());
  out_.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out_) throw std::runtime_error("failed writing " + (dir_ / "draws.bin").string());
  ++manifest_.draw_count;
}

void ArchiveWriter::finish() {
  finished_ = true;
  out_.flush();
  out_.close();
  write_manifest(dir_, manifest_);
}

void write_archive(const std::filesystem::path& dir, const ChainArchive& archive) {
  ArchiveWriter writer(dir, archive.manifest);
  for (const auto& d : archive.draws) writer.append(d);
  writer.finish();
}

ChainArchive read_archive(const std::filesystem::path& dir) {
  ChainArchive out;
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw DataError("missing manifest.json in " + dir.string());
  try {
    out.manifest = manifest_from_json(nlohmann::json::parse(mf));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest in " + dir.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  std::ifstream in(dir / "draws.bin", std::ios::binary);
  if (!in) throw DataError("missing draws.bin in " + dir.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("draws.bin in " + dir.string() + " is not a draw archive");
  }
  std::uint32_t len = 0;
  while (in.read(reinterpret_cast<char*>(&len), sizeof(len))) {
    std::vector<std::uint8_t> bytes(len);
    if (!in.read(reinterpret_cast<char*>(bytes.data()), len)) throw DataError("truncated record in " + dir.string());
    out.draws.push_back(decode_draw(bytes));
  }
  if (out.draws.size() != out.manifest.draw_count) {
    throw DataError("archive " + dir.string() + " holds " + std::to_string(out.draws.size()) +
                    " draws but the manifest records " + std::to_string(out.manifest.draw_count));
  }
  return out;
}

}  // namespace nestfc
