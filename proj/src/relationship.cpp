#include "zoomnet/relationship.hpp"

#include <fstream>

#include "zoomnet/error.hpp"

namespace zoomnet {

namespace {

nlohmann::json box_json(const RoiBox& b) { return nlohmann::json::array({b.x0, b.y0, b.x1, b.y1}); }

RoiBox box_from(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 4) throw ParseError(field + ": expected [x0,y0,x1,y1]");
  RoiBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (b.x0 > b.x1) throw ParseError(field + ": x0 > x1");
  if (b.y0 > b.y1) throw ParseError(field + ": y0 > y1");
  if (!b.valid()) throw ParseError(field + ": box " + to_string(b) + " is empty or outside [0,1]");
  return b;
}

template <typename Item, typename Parse>
std::vector<Item> read_jsonl(const std::filesystem::path& path, Parse parse) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Item> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(nlohmann::json::parse(line)));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    }
  }
  return out;
}

template <typename Item>
void write_jsonl(const std::filesystem::path& path, const std::vector<Item>& items) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  for (const auto& item : items) os << to_json(item).dump() << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace

nlohmann::json to_json(const RelationshipInstance& r) {
  return {{"image", r.image},
          {"subject", {{"label", r.subject.label}, {"box", box_json(r.subject.box)}}},
          {"predicate", r.predicate},
          {"object", {{"label", r.object.label}, {"box", box_json(r.object.box)}}}};
}

nlohmann::json to_json(const RankedPrediction& p) {
  return {{"image", p.image},
          {"subject", {{"label", p.subject.label}, {"box", box_json(p.subject.box)}, {"prob", p.subject.prob}}},
          {"predicate", {{"label", p.predicate.label}, {"prob", p.predicate.prob}}},
          {"object", {{"label", p.object.label}, {"box", box_json(p.object.box)}, {"prob", p.object.prob}}},
          {"score", p.score}};
}

RelationshipInstance instance_from_json(const nlohmann::json& j) {
  RelationshipInstance r;
  r.image = j.at("image").get<std::string>();
  r.subject = {j.at("subject").at("label").get<std::string>(), box_from(j.at("subject").at("box"), "subject.box")};
  r.predicate = j.at("predicate").get<std::string>();
  r.object = {j.at("object").at("label").get<std::string>(), box_from(j.at("object").at("box"), "object.box")};
  if (r.subject.label.empty()) throw ParseError("subject.label: empty");
  if (r.object.label.empty()) throw ParseError("object.label: empty");
  if (r.predicate.empty()) throw ParseError("predicate: empty");
  return r;
}

RankedPrediction prediction_from_json(const nlohmann::json& j) {
  RankedPrediction p;
  p.image = j.at("image").get<std::string>();
  const auto& s = j.at("subject");
  const auto& o = j.at("object");
  p.subject = {s.at("label").get<std::string>(), box_from(s.at("box"), "subject.box"), s.at("prob").get<double>()};
  p.object = {o.at("label").get<std::string>(), box_from(o.at("box"), "object.box"), o.at("prob").get<double>()};
  p.predicate = {j.at("predicate").at("label").get<std::string>(), j.at("predicate").at("prob").get<double>()};
  p.score = j.at("score").get<double>();
  return p;
}

std::vector<RelationshipInstance> load_annotations(const std::filesystem::path& path) {
  return read_jsonl<RelationshipInstance>(path, instance_from_json);
}

void save_annotations(const std::filesystem::path& path, const std::vector<RelationshipInstance>& items) {
  write_jsonl(path, items);
}

std::vector<RankedPrediction> load_predictions(const std::filesystem::path& path) {
  return read_jsonl<RankedPrediction>(path, prediction_from_json);
}

void save_predictions(const std::filesystem::path& path, const std::vector<RankedPrediction>& items) {
  write_jsonl(path, items);
}

}  // namespace zoomnet
