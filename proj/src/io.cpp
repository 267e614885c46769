/*
 * Copyright (C) 2026 The segtext Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "segtext/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "segtext/error.hpp"

namespace segtext {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T, typename F>
void write_grid(const fs::path& path, const std::string& name, const Grid<T>& g, F value) {
  std::string out = "TMAP " + name + " " + std::to_string(g.rows()) + " " +
                    std::to_string(g.cols()) + "\n";
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) {
      if (c) out += ' ';
      out += value(g(r, c));
    }
    out += '\n';
  }
  write_text(path, out);
}

constexpr const char* kShapeNames[] = {"plus", "tee", "ell", "vee"};

DistractorShape parse_shape(const std::string& s) {
  for (int i = 0; i < 4; ++i)
    if (s == kShapeNames[i]) return static_cast<DistractorShape>(i);
  throw Error(ErrorCode::kParse, "unknown distractor shape '" + s + "'");
}

Json distractor_json(const DistractorSpec& d) {
  return Json{{"cx", d.cx},     {"cy", d.cy},
              {"size", d.size}, {"angle", d.angle},
              {"shape", kShapeNames[static_cast<int>(d.shape)]},
              {"height", d.height}};
}

Json points_json(const Polygon& p) {
  Json pts = Json::array();
  for (const Point& v : p.vertices) pts.push_back({v.x, v.y});
  return pts;
}

Polygon polygon_from(const Json& pts) {
  Polygon p;
  for (const auto& v : pts) p.vertices.push_back(Point{v.at(0).get<double>(), v.at(1).get<double>()});
  return p;
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

void write_tmap(const fs::path& path, const std::string& name, const ScalarGrid& g) {
  write_grid(path, name, g, [](double v) { return fmt(v); });
}

void write_tmap(const fs::path& path, const std::string& name, const BitMask& m) {
  write_grid(path, name, m, [](std::uint8_t v) { return std::string(v ? "1" : "0"); });
}

ScalarGrid read_tmap(const fs::path& path, std::string* name) {
  const std::string text = slurp(path);
  const char* p = text.c_str();
  char tag[16] = {0};
  char nm[256] = {0};
  int rows = 0, cols = 0, used = 0;
  if (std::sscanf(p, "%15s %255s %d %d%n", tag, nm, &rows, &cols, &used) != 4 ||
      std::string(tag) != "TMAP" || rows < 0 || cols < 0)
    throw Error(ErrorCode::kParse, "bad TMAP header in " + path.string());
  if (name) *name = nm;
  p += used;
  ScalarGrid g(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) throw Error(ErrorCode::kParse, "truncated TMAP " + path.string());
      g(r, c) = v;
      p = end;
    }
  return g;
}

BitMask read_tmap_mask(const fs::path& path) {
  const ScalarGrid g = read_tmap(path);
  BitMask m(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) m(r, c) = g(r, c) != 0.0 ? 1 : 0;
  return m;
}

Json to_json(const SceneSpec& spec) {
  Json inst = Json::array();
  for (const auto& s : spec.instances) {
    Json params = Json::object();
    for (const auto& [k, v] : s.params) params[k] = v;
    inst.push_back(Json{{"family", std::string(family_name(s.family))},
                        {"params", params},
                        {"chars", s.chars},
                        {"char_h", s.char_h},
                        {"char_w", s.char_w},
                        {"char_gap", s.char_gap},
                        {"word_gap", s.word_gap},
                        {"word_len", s.word_len}});
  }
  Json dis = Json::array();
  for (const auto& d : spec.distractors) dis.push_back(distractor_json(d));
  Json splits = Json::array();
  for (const auto& s : spec.faults.splits)
    splits.push_back(Json{{"instance", s.instance}, {"gap", s.gap}, {"position", s.position}});
  return Json{{"rows", spec.rows},
              {"cols", spec.cols},
              {"seed", spec.seed},
              {"shrink", spec.shrink},
              {"instances", inst},
              {"distractors", dis},
              {"faults", Json{{"splits", splits},
                              {"distractors", spec.faults.distractors},
                              {"ggtr_noise", spec.faults.ggtr_noise},
                              {"ggtr_noise_sigma", spec.faults.ggtr_noise_sigma},
                              {"seed", spec.faults.seed}}}};
}

SceneSpec scene_spec_from_json(const Json& j) {
  try {
    SceneSpec spec;
    spec.rows = j.at("rows").get<int>();
    spec.cols = j.at("cols").get<int>();
    spec.seed = get_or<std::uint64_t>(j, "seed", 0);
    spec.shrink = get_or<double>(j, "shrink", 0.3);
    for (const auto& i : j.at("instances")) {
      SpineSpec s;
      s.family = parse_family(i.at("family").get<std::string>());
      for (const auto& [k, v] : i.at("params").items()) s.params[k] = v.get<double>();
      s.chars = i.at("chars").get<int>();
      s.char_h = i.at("char_h").get<double>();
      s.char_w = get_or<double>(i, "char_w", s.char_w);
      s.char_gap = get_or<double>(i, "char_gap", s.char_gap);
      s.word_gap = get_or<double>(i, "word_gap", s.word_gap);
      s.word_len = get_or<int>(i, "word_len", 0);
      spec.instances.push_back(std::move(s));
    }
    if (j.contains("distractors")) {
      for (const auto& d : j.at("distractors")) {
        DistractorSpec ds;
        ds.cx = d.at("cx").get<double>();
        ds.cy = d.at("cy").get<double>();
        ds.size = get_or<double>(d, "size", ds.size);
        ds.angle = get_or<double>(d, "angle", 0.0);
        ds.shape = parse_shape(get_or<std::string>(d, "shape", "plus"));
        ds.height = get_or<double>(d, "height", 0.0);
        spec.distractors.push_back(ds);
      }
    }
    if (j.contains("faults")) {
      const Json& f = j.at("faults");
      if (f.contains("splits"))
        for (const auto& s : f.at("splits"))
          spec.faults.splits.push_back(SplitFault{s.at("instance").get<int>(),
                                                  get_or<double>(s, "gap", 8.0),
                                                  get_or<double>(s, "position", 0.5)});
      spec.faults.distractors = get_or<int>(f, "distractors", 0);
      spec.faults.ggtr_noise = get_or<bool>(f, "ggtr_noise", true);
      spec.faults.ggtr_noise_sigma = get_or<double>(f, "ggtr_noise_sigma", 0.05);
      spec.faults.seed = get_or<std::uint64_t>(f, "seed", spec.seed);
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, std::string("scene spec: ") + e.what());
  }
}

Json truth_to_json(const SceneTruth& truth) {
  Json inst = Json::array();
  for (const auto& i : truth.instances)
    inst.push_back(Json{{"id", i.id}, {"polygon", points_json(i.polygon)}});
  Json chars = Json::array();
  for (const auto& c : truth.chars)
    chars.push_back(Json{{"id", c.id},
                         {"instance", c.instance},
                         {"cx", c.box.cx},
                         {"cy", c.box.cy},
                         {"h", c.box.h},
                         {"w", c.box.w},
                         {"theta", c.box.theta}});
  return Json{{"instances", inst}, {"chars", chars}};
}

std::vector<Polygon> truth_polygons(const Json& j) {
  std::vector<Polygon> out;
  for (const auto& i : j.at("instances")) out.push_back(polygon_from(i.at("polygon")));
  return out;
}

Json segments_to_json(std::span<const TextSegment> segs) {
  Json out = Json::array();
  for (const auto& s : segs)
    out.push_back(Json{{"cx", s.rect.cx},
                       {"cy", s.rect.cy},
                       {"h", s.rect.h},
                       {"w", s.rect.w},
                       {"theta", s.rect.theta},
                       {"score", s.score},
                       {"type", std::string(segment_type_name(s.type))},
                       {"instance", s.instance}});
  return out;
}

std::vector<TextSegment> segments_from_json(const Json& j) {
  std::vector<TextSegment> out;
  for (const auto& s : j) {
    TextSegment t;
    t.rect = RotRect::make(s.at("cx").get<double>(), s.at("cy").get<double>(),
                           s.at("h").get<double>(), s.at("w").get<double>(),
                           s.at("theta").get<double>());
    t.score = get_or<double>(s, "score", 0.0);
    t.type = parse_segment_type(get_or<std::string>(s, "type", "unlabeled"));
    t.instance = get_or<int>(s, "instance", -1);
    out.push_back(t);
  }
  return out;
}

Json detection_to_json(const DetectionResult& det) {
  Json polys = Json::array();
  for (const auto& p : det.polygons)
    polys.push_back(Json{{"id", p.id}, {"points", points_json(p.polygon)}, {"kept", p.kept}});
  return Json{{"polygons", polys},
              {"stages", Json{{"proposed", det.stages.proposed},
                              {"node_removed", det.stages.node_removed},
                              {"groups", det.stages.groups},
                              {"ggtr_dropped", det.stages.ggtr_dropped}}},
              {"segments", segments_to_json(det.segments)},
              {"removed", segments_to_json(det.removed)}};
}

DetectionResult detection_from_json(const Json& j) {
  DetectionResult d;
  for (const auto& p : j.at("polygons")) {
    DetectedPolygon dp;
    dp.id = p.at("id").get<int>();
    dp.polygon = polygon_from(p.at("points"));
    dp.kept = get_or<bool>(p, "kept", true);
    d.polygons.push_back(std::move(dp));
  }
  if (j.contains("stages")) {
    const Json& s = j.at("stages");
    d.stages.proposed = get_or<std::size_t>(s, "proposed", 0);
    d.stages.node_removed = get_or<std::size_t>(s, "node_removed", 0);
    d.stages.groups = get_or<std::size_t>(s, "groups", 0);
    d.stages.ggtr_dropped = get_or<std::size_t>(s, "ggtr_dropped", 0);
  }
  if (j.contains("segments")) d.segments = segments_from_json(j.at("segments"));
  if (j.contains("removed")) d.removed = segments_from_json(j.at("removed"));
  return d;
}

std::vector<Polygon> detection_polygons(const Json& j) {
  std::vector<Polygon> out;
  for (const auto& p : j.at("polygons"))
    if (get_or<bool>(p, "kept", true)) out.push_back(polygon_from(p.at("points")));
  return out;
}

Json read_json(const fs::path& path) {
  const std::string text = slurp(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(1) + "\n"); }

void write_scene(const fs::path& dir, const SceneSpec& spec, const SceneTruth& truth,
                 const FaultedMaps& faulted) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());
  const TextMaps& m = faulted.maps;
  write_tmap(dir / "tcl.tmap", "tcl", m.tcl);
  write_tmap(dir / "h.tmap", "h", m.h);
  write_tmap(dir / "w.tmap", "w", m.w);
  write_tmap(dir / "theta.tmap", "theta", m.theta);
  write_tmap(dir / "tr.tmap", "tr", m.tr);
  write_tmap(dir / "ggtr.tmap", "ggtr", faulted.ggtr);
  write_json(dir / "truth.json", truth_to_json(truth));
  write_json(dir / "spec.json", to_json(spec));
}

SceneFiles read_scene(const fs::path& dir) {
  SceneFiles s;
  s.spec = scene_spec_from_json(read_json(dir / "spec.json"));
  s.maps.tcl = read_tmap(dir / "tcl.tmap");
  s.maps.h = read_tmap(dir / "h.tmap");
  s.maps.w = read_tmap(dir / "w.tmap");
  s.maps.theta = read_tmap(dir / "theta.tmap");
  s.maps.tr = read_tmap_mask(dir / "tr.tmap");
  s.ggtr = read_tmap(dir / "ggtr.tmap");
  s.truth = read_json(dir / "truth.json");
  const auto& t = s.maps.tcl;
  if (!t.same_shape(s.maps.h) || !t.same_shape(s.maps.w) || !t.same_shape(s.maps.theta) ||
      !t.same_shape(s.ggtr) || s.maps.tr.rows() != t.rows() || s.maps.tr.cols() != t.cols())
    throw Error(ErrorCode::kShapeMismatch, "map sizes differ in " + dir.string());
  return s;
}

std::vector<fs::path> list_scenes(const fs::path& root) {
  if (fs::exists(root / "spec.json")) return {root};
  if (!fs::is_directory(root)) throw Error(ErrorCode::kIo, "not a directory: " + root.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "spec.json")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::string params_to_text(const GcnParams& p) {
  const GcnConfig& c = p.config;
  std::string out = "GCNP v1\n";
  out += "CONFIG feature_dim " + std::to_string(c.feature_dim) + "\n";
  out += "CONFIG embed_dim " + std::to_string(c.embed_dim) + "\n";
  out += "CONFIG layers " + std::to_string(c.layers) + "\n";
  out += "CONFIG link_hidden " + std::to_string(c.link_hidden) + "\n";
  out += "CONFIG conv_activation " + std::string(activation_name(c.conv_activation)) + "\n";
  out += "CONFIG link_activation " + std::string(activation_name(c.link_activation)) + "\n";
  out += "CONFIG node_activation " + std::string(activation_name(c.node_activation)) + "\n";
  out += "CONFIG node_include_self " + std::to_string(c.node_include_self ? 1 : 0) + "\n";
  for (const auto& [name, m] : p.all_tensors()) {
    out += "TENSOR " + name + " " + std::to_string(m->rows()) + " " + std::to_string(m->cols()) +
           "\n";
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index k = 0; k < m->cols(); ++k) {
        if (k) out += ' ';
        out += fmt((*m)(r, k));
      }
      out += '\n';
    }
  }
  return out;
}

GcnParams params_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "GCNP v1")
    throw Error(ErrorCode::kParse, "missing GCNP v1 header");
  GcnConfig c;
  std::map<std::string, Matrix> tensors;
  std::string word;
  while (in >> word) {
    if (word == "CONFIG") {
      std::string key, value;
      in >> key >> value;
      if (key == "feature_dim") c.feature_dim = std::stoi(value);
      else if (key == "embed_dim") c.embed_dim = std::stoi(value);
      else if (key == "layers") c.layers = std::stoi(value);
      else if (key == "link_hidden") c.link_hidden = std::stoi(value);
      else if (key == "conv_activation") c.conv_activation = parse_activation(value);
      else if (key == "link_activation") c.link_activation = parse_activation(value);
      else if (key == "node_activation") c.node_activation = parse_activation(value);
      else if (key == "node_include_self") c.node_include_self = value != "0";
      else throw Error(ErrorCode::kParse, "unknown config key " + key);
    } else if (word == "TENSOR") {
      std::string name;
      long rows = 0, cols = 0;
      if (!(in >> name >> rows >> cols) || rows < 0 || cols < 0)
        throw Error(ErrorCode::kParse, "bad TENSOR line");
      Matrix m(rows, cols);
      for (long r = 0; r < rows; ++r)
        for (long k = 0; k < cols; ++k) {
          std::string tok;
          if (!(in >> tok)) throw Error(ErrorCode::kParse, "truncated tensor " + name);
          m(r, k) = std::strtod(tok.c_str(), nullptr);
        }
      tensors[name] = std::move(m);
    } else {
      throw Error(ErrorCode::kParse, "unexpected token " + word);
    }
  }
  GcnParams p = init_params(c, 0);
  for (auto& [name, m] : p.all_tensors()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error(ErrorCode::kParse, "missing tensor " + name);
    *m = it->second;
  }
  p.validate();
  return p;
}

void write_params(const fs::path& path, const GcnParams& p) { write_text(path, params_to_text(p)); }

GcnParams read_params(const fs::path& path) { return params_from_text(slurp(path)); }

std::string loss_csv(std::span<const LossBreakdown> trace) {
  std::string out = "iter,loss_link,loss_node\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    out += std::to_string(i) + "," + fmt(trace[i].link) + "," + fmt(trace[i].node) + "\n";
  return out;
}

}  // namespace segtext
