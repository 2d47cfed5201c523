#include "filtkit/trajectory.hpp"

#include <ostream>

#include "filtkit/sdesim.hpp"

namespace filtkit::trajectory {

void write_csv(std::ostream& os, const FilterTrajectory& traj,
               const std::vector<std::string>& comments) {
  for (const auto& c : comments) os << "# " << c << "\n";
  if (traj.steps.empty()) {
    os << "t,tag\n";
    return;
  }
  const Index n = traj.steps.front().belief.mean.size();
  Index m = 0;
  for (const auto& s : traj.steps)
    if (s.innovation) m = std::max(m, s.innovation->size());

  os << "t,tag";
  for (Index i = 0; i < n; ++i) os << ",m" << (i + 1);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) os << ",P" << (i + 1) << (j + 1);
  for (Index i = 0; i < m; ++i) os << ",nu" << (i + 1);
  os << "\n";

  for (const auto& s : traj.steps) {
    os << sdesim::format_double(s.belief.t) << ","
       << (s.tag == StepTag::Predicted ? "predicted" : "updated");
    for (Index i = 0; i < n; ++i) os << "," << sdesim::format_double(s.belief.mean(i));
    for (Index i = 0; i < n; ++i)
      for (Index j = i; j < n; ++j) os << "," << sdesim::format_double(s.belief.cov(i, j));
    for (Index i = 0; i < m; ++i) {
      os << ",";
      if (s.innovation && i < s.innovation->size()) os << sdesim::format_double((*s.innovation)(i));
    }
    os << "\n";
  }
}

}  // namespace filtkit::trajectory
