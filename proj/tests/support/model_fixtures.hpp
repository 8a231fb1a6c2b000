#pragma once

#include "dendrostate/design.hpp"
#include "dendrostate/synth.hpp"

namespace testutil {

struct SynthDesign {
  dendrostate::SynthData data;
  dendrostate::ModelDesign design;
};

// Simulates a dataset and assembles the matching design.
inline SynthDesign make_design(const dendrostate::SynthConfig& config,
                               int n_interior_knots = 6) {
  SynthDesign out;
  out.data = dendrostate::simulate(config);
  dendrostate::AssembleOptions opts;
  opts.window = {config.start_year, config.start_year + config.n_years - 1};
  opts.spline.n_interior_knots = n_interior_knots;
  std::vector<std::string> vars =
      config.var_names.size() == static_cast<std::size_t>(config.p) ? config.var_names
                                                                    : config.default_names();
  out.design = dendrostate::assemble(out.data.rings, out.data.climate, vars, opts);
  return out;
}

}  // namespace testutil
