#include "nestfc/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "nestfc/config.hpp"
#include "nestfc/errors.hpp"

namespace nestfc {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_value(const std::string& text, const std::string& where) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) throw DataError(where + ": not a number: '" + text + "'");
  return v;
}

}  // namespace

NestedDataset read_dataset(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t number = 0;
  auto where = [&] { return source + ":" + std::to_string(number); };
  auto strip = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };
  if (!std::getline(in, line)) throw DataError(source + ": empty dataset");
  ++number;
  strip(line);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != "subject_id,replicate_id,x,y") {
    throw DataError(where() + ": expected header 'subject_id,replicate_id,x,y'");
  }
  NestedDataset data;
  std::map<std::string, std::size_t> subject_index;
  std::vector<std::map<std::string, std::size_t>> replicate_index;
  while (std::getline(in, line)) {
    ++number;
    strip(line);
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != 4) throw DataError(where() + ": expected 4 fields, found " + std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty()) throw DataError(where() + ": empty identifier");
    const double x = parse_value(fields[2], where());
    const double y = parse_value(fields[3], where());
    if (!std::isfinite(x) || !std::isfinite(y)) throw DataError(where() + ": non-finite value");
    auto [sit, new_subject] = subject_index.emplace(fields[0], data.subjects.size());
    if (new_subject) {
      data.subjects.push_back({fields[0], {}});
      replicate_index.emplace_back();
    }
    auto& subject = data.subjects[sit->second];
    auto [rit, new_rep] = replicate_index[sit->second].emplace(fields[1], subject.replicates.size());
    if (new_rep) subject.replicates.push_back({fields[1], {}, {}});
    auto& rep = subject.replicates[rit->second];
    rep.x.push_back(x);
    rep.y.push_back(y);
  }
  if (data.subjects.empty()) throw DataError(source + ": no data rows");
  data.validate();
  return data;
}

NestedDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return read_dataset(in, path.string());
}

void write_dataset(std::ostream& out, const NestedDataset& data) {
  out << "subject_id,replicate_id,x,y\n";
  for (const auto& s : data.subjects) {
    for (const auto& r : s.replicates) {
      for (std::size_t t = 0; t < r.x.size(); ++t) {
        out << s.id << ',' << r.id << ',' << format_double(r.x[t]) << ',' << format_double(r.y[t]) << '\n';
      }
    }
  }
}

void write_dataset(const std::filesystem::path& path, const NestedDataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset " + path.string());
  write_dataset(out, data);
}

TruthLabels truth_of(const SimulatedData& sim) {
  TruthLabels t;
  t.subject_labels = sim.subject_labels;
  t.curve_labels = sim.curve_labels;
  for (const auto& s : sim.data.subjects) {
    t.subject_ids.push_back(s.id);
    std::vector<std::string> reps;
    for (const auto& r : s.replicates) reps.push_back(r.id);
    t.replicate_ids.push_back(std::move(reps));
  }
  return t;
}

void write_truth(const std::filesystem::path& path, const TruthLabels& truth) {
  nlohmann::ordered_json subjects = nlohmann::ordered_json::object();
  nlohmann::ordered_json curves = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < truth.subject_ids.size(); ++i) {
    subjects[truth.subject_ids[i]] = truth.subject_labels[i];
    nlohmann::ordered_json reps = nlohmann::ordered_json::object();
    for (std::size_t j = 0; j < truth.replicate_ids[i].size(); ++j) reps[truth.replicate_ids[i][j]] = truth.curve_labels[i][j];
    curves[truth.subject_ids[i]] = reps;
  }
  nlohmann::ordered_json doc;
  doc["subjects"] = subjects;
  doc["curves"] = curves;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write truth file " + path.string());
  out << doc.dump(2) << '\n';
}

TruthLabels read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open truth file " + path.string());
  TruthLabels t;
  try {
    const auto doc = nlohmann::ordered_json::parse(in);
    for (const auto& [id, label] : doc.at("subjects").items()) {
      t.subject_ids.push_back(id);
      t.subject_labels.push_back(label.get<int>());
      std::vector<std::string> reps;
      std::vector<int> labels;
      for (const auto& [rid, cl] : doc.at("curves").at(id).items()) {
        reps.push_back(rid);
        labels.push_back(cl.get<int>());
      }
      t.replicate_ids.push_back(std::move(reps));
      t.curve_labels.push_back(std::move(labels));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed truth file: " + e.what());
  }
  return t;
}

}  // namespace nestfc
