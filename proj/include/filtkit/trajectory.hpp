#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "filtkit/models.hpp"

namespace filtkit {

enum class StepTag { Predicted, Updated };

struct FilterStep {
  GaussianBelief belief;
  StepTag tag = StepTag::Predicted;
  std::optional<Vector> innovation;      // set on Updated steps
  std::optional<Matrix> innovation_cov;  // discrete updates only
};

struct FilterTrajectory {
  std::vector<FilterStep> steps;
};

namespace trajectory {

// Schema: t,tag,m1..mn,P11,P12,...,Pnn (row-major upper triangle),nu1..num.
// Innovation columns appear when any step carries one; cells stay empty on
// steps without. `comments` become leading "# key=value" lines.
void write_csv(std::ostream& os, const FilterTrajectory& traj,
               const std::vector<std::string>& comments = {});

}  // namespace trajectory
}  // namespace filtkit
