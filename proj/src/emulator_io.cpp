#include "pccal/emulator_io.hpp"

#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "pccal/errors.hpp"
#include "pccal/field_io.hpp"

namespace pccal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_emulator(const fs::path& dir, const PcEmulator& emulator) {
  fs::create_directories(dir);
  json doc;
  doc["format"] = "pccal-emulator";
  doc["version"] = kEmulatorFormatVersion;
  doc["parameters"] = emulator.parameter_names();
  doc["runs"] = emulator.thetas().rows();
  doc["dimension"] = emulator.basis().dimension();
  doc["components"] = emulator.components();
  doc["eigenvalues"] = to_std(emulator.basis().eigenvalues);
  doc["all_eigenvalues"] = to_std(emulator.basis().all_eigenvalues);
  doc["explained_fraction"] = emulator.basis().explained_fraction;
  doc["hyperparameters"] = json::array();
  for (const auto& h : emulator.all_hyper())
    doc["hyperparameters"].push_back({{"kappa", h.kappa}, {"zeta", h.zeta}, {"phis", to_std(h.phis)}});
  doc["files"] = {{"basis", "K_y.csv"}, {"scores", "scores.csv"}, {"thetas", "thetas.csv"},
                  {"column_means", "column_means.csv"}};
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw ValidationError(fmt::format("cannot write '{}'", (dir / "manifest.json").string()));
    out << doc.dump(2) << '\n';
  }
  write_matrix_csv(dir / "K_y.csv", emulator.basis().K);
  write_matrix_csv(dir / "scores.csv", emulator.scores());
  write_matrix_csv(dir / "thetas.csv", emulator.thetas(), emulator.parameter_names());
  write_matrix_csv(dir / "column_means.csv", emulator.column_means());
}

PcEmulator load_emulator(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ValidationError(fmt::format("no emulator manifest in '{}'", dir.string()));
  json doc;
  try {
    in >> doc;
    if (doc.at("format").get<std::string>() != "pccal-emulator")
      throw ValidationError("not an emulator manifest");
    const int version = doc.at("version").get<int>();
    if (version != kEmulatorFormatVersion)
      throw ValidationError(fmt::format("emulator format version {} is not supported (expected {})", version,
                                        kEmulatorFormatVersion));
    PcBasis basis;
    basis.K = read_matrix_csv(dir / doc.at("files").at("basis").get<std::string>(), false);
    basis.eigenvalues = to_eigen(doc.at("eigenvalues").get<std::vector<double>>());
    basis.all_eigenvalues = to_eigen(doc.at("all_eigenvalues").get<std::vector<double>>());
    basis.explained_fraction = doc.at("explained_fraction").get<double>();
    std::vector<GpHyperparams> hyper;
    for (const auto& h : doc.at("hyperparameters")) {
      GpHyperparams g;
      g.kappa = h.at("kappa").get<double>();
      g.zeta = h.at("zeta").get<double>();
      g.phis = to_eigen(h.at("phis").get<std::vector<double>>());
      hyper.push_back(std::move(g));
    }
    Eigen::MatrixXd scores = read_matrix_csv(dir / doc.at("files").at("scores").get<std::string>(), false);
    Eigen::MatrixXd thetas = read_matrix_csv(dir / doc.at("files").at("thetas").get<std::string>(), true);
    Eigen::VectorXd means = read_matrix_csv(dir / doc.at("files").at("column_means").get<std::string>(), false);
    if (basis.K.cols() != basis.eigenvalues.size() || basis.K.rows() != doc.at("dimension").get<Eigen::Index>())
      throw ValidationError("emulator basis shape does not match its manifest");
    return PcEmulator(doc.at("parameters").get<std::vector<std::string>>(), std::move(basis), std::move(thetas),
                      std::move(means), std::move(scores), std::move(hyper));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("emulator manifest in '{}': {}", dir.string(), e.what()));
  }
}

}  // namespace pccal
