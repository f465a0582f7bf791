#pragma once

// JSON root files:
//   { "id": "r1",
//     "main": [[x, y], ...],                       collar to tip
//     "laterals": [ { "t": 0.5, "points": [[x, y], ...], "virtual": false }, ... ] }
// Lateral points run from the attachment point (base) to the tip.
// A collection is either a directory of such files or one JSON array of them.

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "treeshape/error.hpp"
#include "treeshape/tree_model.hpp"

namespace treeshape {

using json = nlohmann::json;

namespace detail {

inline Point2 point_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError("expected a point [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::vector<Point2> points_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("expected an array of points");
  std::vector<Point2> pts;
  pts.reserve(j.size());
  for (const auto& p : j) pts.push_back(point_from_json(p));
  return pts;
}

inline json points_to_json(const std::vector<Point2>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back({p.x(), p.y()});
  return arr;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace detail

/// Parses and validates one root object. Laterals are sorted by t.
inline RootTree root_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("root must be a JSON object");
  RootTree tree;
  try {
    tree.id = j.value("id", std::string{});
    if (!j.contains("main")) throw ParseError("missing key 'main'");
    tree.main.points = detail::points_from_json(j.at("main"));
    if (j.contains("laterals")) {
      const auto& lats = j.at("laterals");
      if (!lats.is_array()) throw ParseError("'laterals' must be an array");
      for (const auto& lj : lats) {
        if (!lj.is_object() || !lj.contains("t") || !lj.at("t").is_number())
          throw ParseError("lateral needs a numeric 't'");
        Lateral lat;
        lat.t = lj.at("t").get<double>();
        lat.branch.points = detail::points_from_json(lj.at("points"));
        lat.branch.is_virtual = lj.value("virtual", false);
        tree.laterals.push_back(std::move(lat));
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  sort_laterals(tree);
  validate(tree);
  return tree;
}

inline json root_to_json(const RootTree& tree) {
  json lats = json::array();
  for (const auto& l : tree.laterals) {
    json lj = {{"t", l.t}, {"points", detail::points_to_json(l.branch.points)}};
    if (l.branch.is_virtual) lj["virtual"] = true;
    lats.push_back(std::move(lj));
  }
  return {{"id", tree.id}, {"main", detail::points_to_json(tree.main.points)}, {"laterals", lats}};
}

inline RootTree load_root(const std::filesystem::path& path) {
  try {
    auto tree = root_from_json(detail::read_json_file(path));
    if (tree.id.empty()) tree.id = path.stem().string();
    return tree;
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void save_root(const RootTree& tree, const std::filesystem::path& path) {
  detail::write_text_file(path, root_to_json(tree).dump(2) + "\n");
}

/// Loads a directory of root files (sorted by file name) or a JSON array file.
inline std::vector<RootTree> load_collection(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<RootTree> trees;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) trees.push_back(load_root(f));
  } else {
    const json doc = detail::read_json_file(path);
    if (doc.is_array()) {
      for (std::size_t i = 0; i < doc.size(); ++i) {
        auto tree = root_from_json(doc[i]);
        if (tree.id.empty()) tree.id = "root" + std::to_string(i);
        trees.push_back(std::move(tree));
      }
    } else {
      trees.push_back(load_root(path));
    }
  }
  if (trees.empty()) throw Error("no roots found in " + path.string());
  return trees;
}

}  // namespace treeshape
