#pragma once

// CSV and JSON output for loss histories and metrics reports.

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "domino/config.hpp"

namespace domino {

/// Shortest text that parses back to the same double; "nan" for NaN.
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline std::string history_csv(const std::vector<EpochRecord>& h) {
  std::ostringstream o;
  o << "epoch,lr,train_loss,validation_loss\n";
  for (const auto& r : h)
    o << r.epoch << ',' << fmt_double(r.lr) << ',' << fmt_double(r.train_loss) << ',' << fmt_double(r.validation_loss) << '\n';
  return o.str();
}

/// One row per sample per variable.
inline std::string metrics_csv(const MetricsReport& rep) {
  std::ostringstream o;
  o << "id,split,points,mode,variable,relative_l2,area_weighted_relative_l2\n";
  for (const auto& m : rep.samples) {
    for (std::size_t v = 0; v < 4; ++v)
      o << m.id << ',' << split_name(m.split) << ',' << rep.points.name() << ",surface," << variables(Mode::kSurface)[v] << ','
        << fmt_double(m.surface_l2[v]) << ',' << fmt_double(m.surface_l2_area[v]) << '\n';
    for (std::size_t v = 0; v < 5; ++v)
      o << m.id << ',' << split_name(m.split) << ',' << rep.points.name() << ",volume," << variables(Mode::kVolume)[v] << ','
        << fmt_double(m.volume_l2[v]) << ",nan\n";
  }
  return o.str();
}

/// Design-trend table: samples in ascending order of true drag.
inline std::string drag_csv(const MetricsReport& rep) {
  std::ostringstream o;
  o << "rank,id,split,drag_true,drag_pred\n";
  for (std::size_t r = 0; r < rep.design_trend.size(); ++r) {
    const auto& m = rep.samples[rep.design_trend[r]];
    o << r + 1 << ',' << m.id << ',' << split_name(m.split) << ',' << fmt_double(m.drag_true) << ',' << fmt_double(m.drag_pred) << '\n';
  }
  return o.str();
}

inline Json group_json(const GroupSummary& g) {
  Json s = Json::object(), s_area = Json::object(), vol = Json::object();
  for (std::size_t v = 0; v < 4; ++v) {
    s[variables(Mode::kSurface)[v]] = json_number(g.surface_l2[v]);
    s_area[variables(Mode::kSurface)[v]] = json_number(g.surface_l2_area[v]);
  }
  for (std::size_t v = 0; v < 5; ++v) vol[variables(Mode::kVolume)[v]] = json_number(g.volume_l2[v]);
  return Json{{"count", g.count},
              {"drag_r2", json_number(g.r2)},
              {"drag_spearman", json_number(g.spearman)},
              {"surface_relative_l2", s},
              {"surface_area_weighted_relative_l2", s_area},
              {"volume_relative_l2", vol}};
}

inline Json metrics_json(const MetricsReport& rep) {
  Json samples = Json::array();
  for (const auto& m : rep.samples)
    samples.push_back({{"id", m.id},
                       {"split", split_name(m.split)},
                       {"drag_true", json_number(m.drag_true)},
                       {"drag_pred", json_number(m.drag_pred)},
                       {"surface_points", m.surface_points},
                       {"volume_points", m.volume_points}});
  Json trend = Json::array();
  for (auto i : rep.design_trend) trend.push_back(rep.samples[i].id);
  return Json{{"points", rep.points.name()},
              {"samples", samples},
              {"design_trend", trend},
              {"all", group_json(rep.all)},
              {"in_distribution", group_json(rep.in_distribution)},
              {"out_of_distribution", group_json(rep.out_of_distribution)}};
}

}  // namespace domino
