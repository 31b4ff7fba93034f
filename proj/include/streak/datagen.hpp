#ifndef STREAK_DATAGEN_HPP
#define STREAK_DATAGEN_HPP

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "streak/geometry.hpp"

namespace streak {

/// One soft-schema class: a predicate set plus value sources. Entities of the
/// class optionally carry a reified `:hasType :<name>` fact annotated with a
/// confidence score.
struct CsTemplate {
  std::string name;
  double frac = 1.0;
  std::vector<std::string> preds;         // object drawn from a small IRI pool
  std::vector<std::string> numericPreds;  // object is a score literal
  std::vector<std::string> linkPreds;     // object is a random entity
  bool reified = false;
  std::vector<std::array<double, 3>> clusters;  // cx, cy, sigma
};

struct DatasetSpec {
  uint64_t nSpatial = 1000;
  uint64_t seed = 1;
  MBR space{0, 0, 100, 100};
  double pointFrac = 1.0, lineFrac = 0.0, polyFrac = 0.0;
  bool exponentialScores = true;  // else uniform
  double lambda = 1.0;
  uint32_t gaussClusters = 0;  // global clustering; 0 = uniform
  double gaussSigma = 1.0;
  std::vector<CsTemplate> templates;

  static DatasetSpec parse(const std::string& text);
  static DatasetSpec parseFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Err::Io, "cannot open dataset spec: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }
};

namespace detail {

inline std::string trimmed(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<std::string> splitList(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t at = 0;
  while (at <= s.size()) {
    size_t next = s.find(sep, at);
    if (next == std::string::npos) next = s.size();
    std::string part = trimmed(s.substr(at, next - at));
    if (!part.empty()) out.push_back(part);
    at = next + 1;
  }
  return out;
}

inline CsTemplate parseTemplate(const std::string& value) {
  CsTemplate t;
  for (const std::string& kv : splitList(value, ' ')) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) fail(Err::Config, "bad template field: " + kv);
    std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    if (key == "name") t.name = val;
    else if (key == "frac") t.frac = std::stod(val);
    else if (key == "preds") t.preds = splitList(val, ',');
    else if (key == "numeric") t.numericPreds = splitList(val, ',');
    else if (key == "links") t.linkPreds = splitList(val, ',');
    else if (key == "reif") t.reified = val == "true" || val == "1";
    else if (key == "cluster") {
      for (const std::string& c : splitList(val, ';')) {
        auto parts = splitList(c, ',');
        if (parts.size() != 3) fail(Err::Config, "cluster needs cx,cy,sigma: " + c);
        t.clusters.push_back({std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])});
      }
    } else {
      fail(Err::Config, "unknown template field: " + key);
    }
  }
  if (t.name.empty()) fail(Err::Config, "template needs a name");
  return t;
}

}  // namespace detail

inline DatasetSpec DatasetSpec::parse(const std::string& text) {
  DatasetSpec spec;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = detail::trimmed(line.substr(0, eq));
    std::string value = detail::trimmed(line.substr(eq + 1));
    if (key.empty()) continue;
    if (key == "nSpatial") spec.nSpatial = std::stoull(value);
    else if (key == "seed") spec.seed = std::stoull(value);
    else if (key == "space") {
      auto parts = detail::splitList(value, ',');
      if (parts.size() != 4) fail(Err::Config, "space needs minX,minY,maxX,maxY");
      spec.space = MBR{std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2]),
                       std::stod(parts[3])};
    } else if (key == "pointFrac") spec.pointFrac = std::stod(value);
    else if (key == "lineFrac") spec.lineFrac = std::stod(value);
    else if (key == "polyFrac") spec.polyFrac = std::stod(value);
    else if (key == "scoreDist") {
      auto parts = detail::splitList(value, ':');
      if (parts[0] == "exponential") {
        spec.exponentialScores = true;
        if (parts.size() > 1) spec.lambda = std::stod(parts[1]);
      } else if (parts[0] == "uniform") {
        spec.exponentialScores = false;
      } else {
        fail(Err::Config, "scoreDist must be exponential[:lambda] or uniform");
      }
    } else if (key == "clustering") {
      auto parts = detail::splitList(value, ':');
      if (parts[0] == "uniform") spec.gaussClusters = 0;
      else if (parts[0] == "gaussian" && parts.size() == 3) {
        spec.gaussClusters = static_cast<uint32_t>(std::stoul(parts[1]));
        spec.gaussSigma = std::stod(parts[2]);
      } else {
        fail(Err::Config, "clustering must be uniform or gaussian:<c>:<sigma>");
      }
    } else if (key == "template") {
      spec.templates.push_back(detail::parseTemplate(value));
    } else {
      fail(Err::Config, "unknown dataset key: " + key);
    }
  }
  return spec;
}

/// Deterministic reified-Turtle emitter for a dataset spec.
inline std::string generate_dataset(const DatasetSpec& spec) {
  Rng rng(spec.seed);
  std::string out = "@prefix xsd: <http://www.w3.org/2001/XMLSchema#>.\n";
  if (spec.nSpatial == 0) return out;
  char buf[512];

  std::vector<std::array<double, 2>> globalCenters;
  for (uint32_t c = 0; c < spec.gaussClusters; ++c)
    globalCenters.push_back({rng.uniform(spec.space.minX, spec.space.maxX),
                             rng.uniform(spec.space.minY, spec.space.maxY)});

  auto score = [&] {
    return spec.exponentialScores ? rng.truncatedExponential(spec.lambda) : rng.nextDouble();
  };
  auto clampX = [&](double x) { return std::clamp(x, spec.space.minX, spec.space.maxX); };
  auto clampY = [&](double y) { return std::clamp(y, spec.space.minY, spec.space.maxY); };

  uint64_t factId = 0;
  for (uint64_t i = 0; i < spec.nSpatial; ++i) {
    // Template by cumulative fraction.
    const CsTemplate* tpl = nullptr;
    if (!spec.templates.empty()) {
      double pick = rng.nextDouble();
      double acc = 0;
      for (const CsTemplate& t : spec.templates) {
        acc += t.frac;
        if (pick < acc) {
          tpl = &t;
          break;
        }
      }
      if (!tpl) tpl = &spec.templates.back();
    }

    double cx, cy, sigma = 0;
    if (tpl && !tpl->clusters.empty()) {
      const auto& c = tpl->clusters[rng.nextBelow(tpl->clusters.size())];
      cx = c[0];
      cy = c[1];
      sigma = c[2];
    } else if (!globalCenters.empty()) {
      const auto& c = globalCenters[rng.nextBelow(globalCenters.size())];
      cx = c[0];
      cy = c[1];
      sigma = spec.gaussSigma;
    } else {
      cx = rng.uniform(spec.space.minX, spec.space.maxX);
      cy = rng.uniform(spec.space.minY, spec.space.maxY);
    }
    double x = sigma > 0 ? clampX(cx + sigma * rng.normal()) : cx;
    double y = sigma > 0 ? clampY(cy + sigma * rng.normal()) : cy;

    std::string e = ":e" + std::to_string(i);

    if (tpl && tpl->reified) {
      snprintf(buf, sizeof buf,
               "#@ <f%llu>\n%s :hasType :%s.\n<f%llu> :hasConfidence \"%.9f\"^^xsd:double.\n",
               static_cast<unsigned long long>(factId), e.c_str(), tpl->name.c_str(),
               static_cast<unsigned long long>(factId), score());
      out += buf;
      ++factId;
    }
    if (tpl) {
      for (const std::string& p : tpl->preds) {
        snprintf(buf, sizeof buf, "%s :%s :%s_v%llu.\n", e.c_str(), p.c_str(), p.c_str(),
                 static_cast<unsigned long long>(rng.nextBelow(8)));
        out += buf;
      }
      for (const std::string& p : tpl->numericPreds) {
        snprintf(buf, sizeof buf, "%s :%s \"%.9f\"^^xsd:double.\n", e.c_str(), p.c_str(), score());
        out += buf;
      }
      for (const std::string& p : tpl->linkPreds) {
        unsigned long long target = rng.nextBelow(spec.nSpatial);
        if (tpl->reified) {
          snprintf(buf, sizeof buf,
                   "#@ <f%llu>\n%s :%s :e%llu.\n<f%llu> :hasConfidence \"%.9f\"^^xsd:double.\n",
                   static_cast<unsigned long long>(factId), e.c_str(), p.c_str(), target,
                   static_cast<unsigned long long>(factId), score());
          ++factId;
        } else {
          snprintf(buf, sizeof buf, "%s :%s :e%llu.\n", e.c_str(), p.c_str(), target);
        }
        out += buf;
      }
    }

    // Geometry: point, short linestring, or small triangle.
    double mix = rng.nextDouble();
    double total = spec.pointFrac + spec.lineFrac + spec.polyFrac;
    double pPoint = total > 0 ? spec.pointFrac / total : 1.0;
    double pLine = total > 0 ? spec.lineFrac / total : 0.0;
    if (mix < pPoint) {
      snprintf(buf, sizeof buf, "%s :hasGeometry \"POINT(%.6f %.6f)\".\n", e.c_str(), x, y);
    } else if (mix < pPoint + pLine) {
      snprintf(buf, sizeof buf, "%s :hasGeometry \"LINESTRING(%.6f %.6f, %.6f %.6f)\".\n",
               e.c_str(), x, y, clampX(x + rng.uniform(-1.5, 1.5)),
               clampY(y + rng.uniform(-1.5, 1.5)));
    } else {
      double r = rng.uniform(0.2, 1.2);
      snprintf(buf, sizeof buf,
               "%s :hasGeometry \"POLYGON((%.6f %.6f, %.6f %.6f, %.6f %.6f, %.6f %.6f))\".\n",
               e.c_str(), clampX(x - r), clampY(y - r), clampX(x + r), clampY(y - r), clampX(x),
               clampY(y + r), clampX(x - r), clampY(y - r));
    }
    out += buf;
  }
  return out;
}

}  // namespace streak

#endif
