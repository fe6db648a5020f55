#pragma once

#include "si3/dataset.hpp"
#include "si3/ibsi.hpp"

namespace si3 {

struct PluginImputation {
  MultiViewDataset data;  // selected cells filled and marked observed
  Mask imputed;           // 1 where a cell was filled by the imputer
};

// Raw-space cross-view neighbour mean. For each selected missing (i, v) the
// k samples observing v with the smallest mean distance over the views they
// share with i are averaged (ties to the lower index). Candidates sharing no
// view with i are skipped; if none share one, every sample observing v
// contributes.
PluginImputation plugin_impute(const MultiViewDataset& data, const ibsi::InfoTable& table, int k);

}  // namespace si3
