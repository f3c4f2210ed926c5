#pragma once

#include <fstream>
#include <ostream>
#include <string>

#include "sim_engine.hpp"

namespace dobc {

inline std::vector<std::string> csv_header(const TrajectoryRecord& rec) {
  std::vector<std::string> cols{"t", "norm_x", "err_r"};
  auto per_node = [&](const std::string& stem) {
    for (std::size_t i = 0; i < rec.nodes; ++i) cols.push_back(stem + "_" + std::to_string(i + 1));
  };
  per_node("err");
  per_node("eps_u");
  per_node("eps_d");
  per_node("gamma");
  per_node("gamma_s");
  for (std::size_t k = 0; k < rec.controllers; ++k) cols.push_back("beta_" + std::to_string(k + 1));
  for (const auto& u : rec.u_labels) cols.push_back(u);
  return cols;
}

inline void write_csv(const TrajectoryRecord& rec, std::ostream& os) {
  auto cols = csv_header(rec);
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
  os << '\n';
  os.precision(17);
  for (const auto& s : rec.samples) {
    os << s.t << ',' << s.norm_x << ',' << s.err_r;
    for (const auto* v : {&s.err, &s.eps_u, &s.eps_d, &s.gamma, &s.gamma_s, &s.beta, &s.u})
      for (double x : *v) os << ',' << x;
    os << '\n';
  }
}

inline void emit_csv(const TrajectoryRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_csv(rec, out);
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace dobc
