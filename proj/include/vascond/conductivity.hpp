#pragma once

#include "vascond/mesh.hpp"

namespace vascond {

struct ArchieParams {
  double cementation = 5.0 / 3.0;  // beta
  double sigma_fluid = 0.70;       // blood conductivity, S/m
  bool strict_cementation = true;  // enforce 3/2 <= beta <= 5/3

  void validate() const;
};

/// sigma = sigma_m (1 - c)^tau + sigma_f c^beta, tau = log(1 - c^beta) / log(1 - c),
/// with the endpoint limits sigma_m at c = 0 and sigma_f at c = 1.
double archie(double c, double sigma_medium, const ArchieParams& params);

/// Nodal background conductivity: volume-weighted average over adjacent tissue
/// tets (artery tets where a node has no tissue neighbour).
Eigen::VectorXd nodal_background_conductivity(const TetMesh& mesh, const CompartmentTable& table);

/// Conductivity on all mesh nodes: Archie's law on tissue nodes with `c_tissue`
/// (tissue numbering), sigma_f on every artery node.
Eigen::VectorXd build_atlas(const TetMesh& mesh, const Eigen::VectorXd& c_tissue,
                            const Eigen::VectorXd& background, const ArchieParams& params);

}  // namespace vascond
