// Copyright 2026 The mad Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mad/evaluation/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace mad::evaluation {

SsrResult ssr(const std::vector<Image>& images, int threshold) {
  MAD_REQUIRE(!images.empty(), "ssr: empty image list");
  SsrResult r;
  r.detected.resize(images.size());
  std::size_t n = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    r.detected[i] = morphometry::segment_single(images[i], threshold).accepted;
    n += r.detected[i];
  }
  r.percent = 100.0 * static_cast<double>(n) / static_cast<double>(images.size());
  return r;
}

double r2(const std::vector<double>& t, const std::vector<double>& m) {
  MAD_REQUIRE(t.size() == m.size() && t.size() >= 2, "r2: need two equal-length series of length >= 2");
  double mean = 0;
  for (double v : t) mean += v;
  mean /= static_cast<double>(t.size());
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    ss_res += (t[i] - m[i]) * (t[i] - m[i]);
    ss_tot += (t[i] - mean) * (t[i] - mean);
  }
  if (ss_tot <= 1e-300) throw UndefinedR2();
  return 1.0 - ss_res / ss_tot;
}

double mae(const std::vector<double>& t, const std::vector<double>& m) {
  MAD_REQUIRE(t.size() == m.size() && !t.empty(), "mae: need two equal-length non-empty series");
  double s = 0;
  for (std::size_t i = 0; i < t.size(); ++i) s += std::abs(t[i] - m[i]);
  return s / static_cast<double>(t.size());
}

double identity_similarity(const Image& a, const Image& b) {
  MAD_REQUIRE(a.width == b.width && a.height == b.height, "identity_similarity: size mismatch");
  constexpr int W = 8;
  MAD_REQUIRE(a.width >= W && a.height >= W, "identity_similarity: image smaller than the window");
  std::array<double, W * W> win{};
  double wsum = 0;
  for (int y = 0; y < W; ++y)
    for (int x = 0; x < W; ++x) {
      const double dx = x - 3.5, dy = y - 3.5;
      win[y * W + x] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      wsum += win[y * W + x];
    }
  for (auto& w : win) w /= wsum;
  const double c1 = (0.01 * 255) * (0.01 * 255), c2 = (0.03 * 255) * (0.03 * 255);
  double total = 0;
  std::size_t count = 0;
  for (std::size_t oy = 0; oy + W <= a.height; ++oy)
    for (std::size_t ox = 0; ox + W <= a.width; ++ox) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = 0; y < W; ++y)
        for (int x = 0; x < W; ++x) {
          const double w = win[y * W + x];
          const double va = a.at(ox + x, oy + y), vb = b.at(ox + x, oy + y);
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

FeatureLaw::FeatureLaw(std::vector<std::string> names, double ratio) : names_(std::move(names)), ratio_(ratio) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == "area") area_ = i;
    if (names_[i] == "perimeter") perimeter_ = i;
  }
}

bool FeatureLaw::independent(std::size_t e, std::size_t m) const {
  if (e == m) return false;
  const bool coupled = area_ && perimeter_ &&
                       ((e == *area_ && m == *perimeter_) || (e == *perimeter_ && m == *area_));
  return !coupled;
}

std::optional<double> FeatureLaw::expected_change(std::size_t e, std::size_t m, const FeatureVector& origin,
                                                  double target) const {
  MAD_REQUIRE(origin.space == FeatureSpace::raw, "expected_change: expected raw features");
  if (e == m) return target - origin[e];
  if (independent(e, m)) return std::nullopt;
  if (e == *area_) return ratio_ * (std::sqrt(std::max(target, 0.0)) - std::sqrt(std::max(origin[e], 0.0)));
  const double p0 = origin[e] / ratio_, p1 = target / ratio_;
  return p1 * p1 - p0 * p0;
}

std::vector<DeltaCell> delta_delta(const std::vector<EditRecord>& records, const morphometry::Normalizer& norm,
                                   const FeatureLaw& law, const std::vector<std::string>& measured) {
  MAD_REQUIRE(!records.empty(), "delta_delta: empty batch");
  std::vector<std::size_t> edited;
  for (const auto& r : records)
    if (std::find(edited.begin(), edited.end(), r.edited) == edited.end()) edited.push_back(r.edited);
  std::sort(edited.begin(), edited.end());
  std::vector<std::size_t> meas;
  for (const auto& name : measured) meas.push_back(feature_index(norm.names(), name));

  std::vector<DeltaCell> cells;
  for (std::size_t e : edited)
    for (std::size_t m : meas) {
      DeltaCell c{norm.names()[e], norm.names()[m], law.independent(e, m) ? "mae" : "r2", std::nullopt, {}};
      for (const auto& r : records) {
        if (r.edited != e || !r.detected) continue;
        const FeatureVector origin_raw = norm.denormalize(r.y_origin);
        const double target_raw = norm.denormalize_value(e, r.target);
        const auto expected = law.expected_change(e, m, origin_raw, target_raw);
        const double dgt = expected ? norm.normalize_delta(m, *expected) : 0.0;
        c.pairs.emplace_back(dgt, r.y_final[m] - r.y_origin[m]);
      }
      if (!c.pairs.empty()) {
        std::vector<double> gt, pred;
        for (const auto& [g, p] : c.pairs) gt.push_back(g), pred.push_back(p);
        if (c.metric == "mae") {
          c.value = mae(gt, pred);
        } else if (gt.size() >= 2) {
          try {
            c.value = r2(gt, pred);
          } catch (const UndefinedR2&) {
          }
        }
      }
      cells.push_back(std::move(c));
    }
  return cells;
}

EvalReport build_report(const std::string& mode, const std::vector<EditRecord>& records,
                        const morphometry::Normalizer& norm, const FeatureLaw& law,
                        const std::vector<std::string>& measured) {
  MAD_REQUIRE(!records.empty(), "build_report: empty batch");
  EvalReport rep;
  rep.mode = mode;
  rep.n_total = records.size();
  for (const auto& r : records) rep.n_detected += r.detected;
  rep.delta_delta = delta_delta(records, norm, law, measured);
  for (const auto& name : measured) {
    const std::size_t m = feature_index(norm.names(), name);
    std::vector<double> expected, realized;
    for (const auto& r : records) {
      if (!r.detected) continue;
      const auto d = law.expected_change(r.edited, m, norm.denormalize(r.y_origin),
                                         norm.denormalize_value(r.edited, r.target));
      expected.push_back(r.y_origin[m] + (d ? norm.normalize_delta(m, *d) : 0.0));
      realized.push_back(r.y_final[m]);
    }
    if (expected.empty()) continue;
    rep.mae[name] = mae(expected, realized);
    std::optional<double> v;
    if (expected.size() >= 2) {
      try {
        v = r2(expected, realized);
      } catch (const UndefinedR2&) {
      }
    }
    rep.r2[name] = v;
  }
  return rep;
}

const DeltaCell* find_cell(const EvalReport& r, const std::string& edited, const std::string& measured) {
  for (const auto& c : r.delta_delta)
    if (c.edited == edited && c.measured == measured) return &c;
  return nullptr;
}

namespace {

template <class J>
J opt(const std::optional<double>& v) {
  return v ? J(*v) : J(nullptr);
}

std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

nlohmann::ordered_json to_json(const EvalReport& r) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["mode"] = r.mode;
  j["units"] = r.units;
  j["n_total"] = r.n_total;
  j["n_detected"] = r.n_detected;
  j["ssr"] = opt<oj>(r.ssr);
  j["mae"] = oj::object();
  for (const auto& [k, v] : r.mae) j["mae"][k] = v;
  j["r2"] = oj::object();
  for (const auto& [k, v] : r.r2) j["r2"][k] = opt<oj>(v);
  j["identity"] = opt<oj>(r.identity);
  j["delta_delta"] = oj::array();
  for (const auto& c : r.delta_delta) {
    oj cell{{"edited", c.edited}, {"measured", c.measured}, {"metric", c.metric}};
    cell[c.metric] = opt<oj>(c.value);
    oj pairs = oj::array();
    for (const auto& [g, p] : c.pairs) pairs.push_back({g, p});
    cell["pairs"] = std::move(pairs);
    j["delta_delta"].push_back(std::move(cell));
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.mode = j.at("mode").get<std::string>();
    r.units = j.value("units", std::string("normalized"));
    r.n_total = j.at("n_total").get<std::size_t>();
    r.n_detected = j.at("n_detected").get<std::size_t>();
    r.ssr = opt_from(j.at("ssr"));
    for (const auto& [k, v] : j.at("mae").items()) r.mae[k] = v.get<double>();
    for (const auto& [k, v] : j.at("r2").items()) r.r2[k] = opt_from(v);
    r.identity = opt_from(j.at("identity"));
    for (const auto& c : j.at("delta_delta")) {
      DeltaCell cell{c.at("edited").get<std::string>(), c.at("measured").get<std::string>(),
                     c.at("metric").get<std::string>(), std::nullopt, {}};
      cell.value = opt_from(c.at(cell.metric));
      for (const auto& p : c.at("pairs")) cell.pairs.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      r.delta_delta.push_back(std::move(cell));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string render_svg(const EvalReport& r) {
  MAD_REQUIRE(!r.delta_delta.empty(), "render_svg: report has no delta-delta cells");
  std::vector<std::string> rows, cols;
  for (const auto& c : r.delta_delta) {
    if (std::find(rows.begin(), rows.end(), c.edited) == rows.end()) rows.push_back(c.edited);
    if (std::find(cols.begin(), cols.end(), c.measured) == cols.end()) cols.push_back(c.measured);
  }
  constexpr double P = 220, M = 30;
  const double width = M + P * static_cast<double>(cols.size()), height = M + P * static_cast<double>(rows.size());
  std::ostringstream s;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" "
                "font-size=\"11\">\n",
                width, height);
  s << buf;
  for (const auto& c : r.delta_delta) {
    const auto ri = static_cast<double>(std::find(rows.begin(), rows.end(), c.edited) - rows.begin());
    const auto ci = static_cast<double>(std::find(cols.begin(), cols.end(), c.measured) - cols.begin());
    const double x0 = M + ci * P + 10, y0 = M + ri * P + 10, side = P - 40;
    double lim = 1e-6;
    for (const auto& [g, p] : c.pairs) lim = std::max({lim, std::abs(g), std::abs(p)});
    lim *= 1.05;
    const auto px = [&](double v) { return x0 + (v + lim) / (2 * lim) * side; };
    const auto py = [&](double v) { return y0 + side - (v + lim) / (2 * lim) * side; };
    s << "<g class=\"panel\" data-edited=\"" << c.edited << "\" data-measured=\"" << c.measured << "\">\n";
    std::snprintf(buf, sizeof buf, "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#888\"/>\n",
                  x0, y0, side, side);
    s << buf;
    std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#c33\" stroke-dasharray=\"4 3\"/>\n",
                  px(-lim), py(-lim), px(lim), py(lim));
    s << buf;
    for (const auto& [g, p] : c.pairs) {
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"1.5\" fill=\"#2460a7\" fill-opacity=\"0.5\"/>\n",
                    px(g), py(p));
      s << buf;
    }
    std::string label = c.edited + " edit: " + c.measured + " " + c.metric + "=";
    if (c.value) {
      std::snprintf(buf, sizeof buf, "%.3f", *c.value);
      label += buf;
    } else {
      label += "n/a";
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\">", x0, y0 + side + 14);
    s << buf << label << "</text>\n</g>\n";
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"18\">delta-delta (%s units): x = expected change, y = realized change</text>\n",
                M, r.units.c_str());
  s << buf << "</svg>\n";
  return s.str();
}

void render_report(const EvalReport& r, const std::filesystem::path& dir) {
  if (r.n_total == 0 || r.delta_delta.empty()) throw ContractViolation("render_report: empty batch");
  std::filesystem::create_directories(dir);
  std::ofstream j(dir / "report.json", std::ios::binary);
  std::ofstream s(dir / "report.svg", std::ios::binary);
  if (!j || !s) throw ConfigError("cannot write report files in " + dir.string());
  j << to_json(r).dump(2) << '\n';
  s << render_svg(r);
}

}  // namespace mad::evaluation
