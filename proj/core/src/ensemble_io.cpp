#include "sloc/error.hpp"
#include "sloc/lcdist.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace sloc {

void write_ensemble_csv(std::ostream& out, const Ensemble& e) {
  const Index n = e.dim();
  for (Index k = 0; k < n; ++k) out << 'x' << (k + 1) << ',';
  out << "log_weight\n";
  out << std::setprecision(17);
  for (Index i = 0; i < e.size(); ++i) {
    for (Index k = 0; k < n; ++k) out << e.points()(i, k) << ',';
    out << e.log_weights()(i) << '\n';
  }
}

Ensemble read_ensemble_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::io, "ensemble csv is empty");
  const auto columns = static_cast<Index>(std::count(line.begin(), line.end(), ',') + 1);
  require(columns >= 2, ErrorCode::io, "ensemble csv needs at least one coordinate and a log_weight");
  const Index n = columns - 1;
  std::vector<double> values;
  Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Index count = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorCode::io, "ensemble csv: bad number '" + cell + "' on row " + std::to_string(rows + 1));
      }
      ++count;
    }
    require(count == columns, ErrorCode::io, "ensemble csv: ragged row " + std::to_string(rows + 1));
    ++rows;
  }
  require(rows >= 1, ErrorCode::io, "ensemble csv has no rows");
  RowMat points(rows, n);
  Vec log_weights(rows);
  for (Index i = 0; i < rows; ++i) {
    for (Index k = 0; k < n; ++k) points(i, k) = values[i * columns + k];
    log_weights(i) = values[i * columns + n];
  }
  return Ensemble(std::move(points), std::move(log_weights));
}

void write_snapshot(const std::string& stem, const Ensemble& e, const SnapshotMeta& meta) {
  std::ofstream csv(stem + ".csv");
  require(csv.good(), ErrorCode::io, "cannot write " + stem + ".csv");
  write_ensemble_csv(csv, e);
  std::ofstream side(stem + ".json");
  require(side.good(), ErrorCode::io, "cannot write " + stem + ".json");
  nlohmann::json j{{"kind", meta.kind}, {"n", meta.n},           {"N", meta.count},
                   {"R", meta.radius},  {"seed", meta.seed}, {"ess", e.ess()}};
  side << j.dump(2) << '\n';
}

std::pair<Ensemble, SnapshotMeta> read_snapshot(const std::string& stem) {
  std::ifstream csv(stem + ".csv");
  require(csv.good(), ErrorCode::not_found, "cannot open " + stem + ".csv");
  Ensemble e = read_ensemble_csv(csv);
  std::ifstream side(stem + ".json");
  require(side.good(), ErrorCode::not_found, "cannot open " + stem + ".json");
  nlohmann::json j;
  try {
    side >> j;
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::io, stem + ".json: " + ex.what());
  }
  SnapshotMeta meta;
  meta.kind = j.value("kind", std::string{});
  meta.n = j.value("n", static_cast<int>(e.dim()));
  meta.count = j.value("N", e.size());
  meta.radius = j.value("R", 0.0);
  meta.seed = j.value("seed", std::uint64_t{0});
  require(meta.n == e.dim() && meta.count == e.size(), ErrorCode::io,
          stem + ": sidecar does not match the csv shape");
  return {std::move(e), meta};
}

}  // namespace sloc
