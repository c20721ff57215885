#include "sloc/localization.hpp"

#include <ostream>

namespace sloc {

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,phi2,phiq,phiq_plain,opnormA,trB,minEigB,maxEigB,r,ess";
  for (const auto& name : traj.set_names) out << ",g_" << name;
  out << '\n';
  const auto old = out.precision(17);
  for (const auto& r : traj.records) {
    out << r.t << ',' << r.phi2 << ',' << r.phiq << ',' << r.phiq_plain << ',' << r.opnorm_a << ',' << r.tr_b << ','
        << r.min_eig_b << ',' << r.max_eig_b << ',' << r.r << ',' << r.ess;
    for (double g : r.g) out << ',' << g;
    out << '\n';
  }
  out.precision(old);
}

void write_control_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,h,trC,rankC,psi2r,focus,stepBoundLiteral,stepBoundCorrected,qvBound,trA3C,thirdMomentTerm,minEigDB,"
         "refreshed\n";
  const auto old = out.precision(17);
  for (const auto& r : traj.records) {
    out << r.t << ',' << r.h << ',' << r.tr_c << ',' << r.rank_c << ',' << r.psi_2r << ',' << r.focus << ','
        << r.step_bound_literal << ',' << r.step_bound_corrected << ',' << r.qv_bound << ',' << r.tr_a3c << ','
        << r.third_moment_term << ',' << r.min_eig_dB << ',' << (r.refreshed ? 1 : 0) << '\n';
  }
  out.precision(old);
}

}  // namespace sloc
