#include "vascond/conductivity.hpp"

#include "vascond/error.hpp"

#include <cmath>

namespace vascond {

void ArchieParams::validate() const {
  if (!(cementation > 0.0)) throw ConfigError("archie.cementation must be positive");
  if (strict_cementation && (cementation < 1.5 || cementation > 5.0 / 3.0 + 1e-15)) {
    throw ConfigError("archie.cementation must lie in [3/2, 5/3]");
  }
  if (!(sigma_fluid > 0.0)) throw ConfigError("archie.sigma_fluid must be positive");
}

double archie(double c, double sigma_medium, const ArchieParams& params) {
  if (c < 1e-12) return sigma_medium;
  if (c > 1.0 - 1e-12) return params.sigma_fluid;
  const double cb = std::pow(c, params.cementation);
  const double log_rest = std::log1p(-c);
  const double tau = std::log1p(-cb) / log_rest;
  return sigma_medium * std::exp(tau * log_rest) + params.sigma_fluid * cb;
}

Eigen::VectorXd nodal_background_conductivity(const TetMesh& mesh, const CompartmentTable& table) {
  std::vector<double> per_tet(mesh.num_tets());
  for (int t = 0; t < mesh.num_tets(); ++t) per_tet[t] = table.at(mesh.compartment(t)).sigma;
  return nodal_tissue_average(mesh, per_tet);
}

Eigen::VectorXd build_atlas(const TetMesh& mesh, const Eigen::VectorXd& c_tissue,
                            const Eigen::VectorXd& background, const ArchieParams& params) {
  const Subdomain& tis = mesh.tissue();
  const Subdomain& art = mesh.artery();
  if (c_tissue.size() != tis.size()) throw InputError("atlas: concentration size mismatch");
  if (background.size() != mesh.num_nodes()) throw InputError("atlas: background size mismatch");
  Eigen::VectorXd sigma(mesh.num_nodes());
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    if (art.contains(v)) {
      sigma[v] = params.sigma_fluid;
    } else {
      const double c = c_tissue[tis.to_local[v]];
      if (!(c >= 0.0 && c <= 1.0)) throw InputError("atlas: concentration outside [0, 1]");
      sigma[v] = archie(c, background[v], params);
    }
  }
  return sigma;
}

}  // namespace vascond
