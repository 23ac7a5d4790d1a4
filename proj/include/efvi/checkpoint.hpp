// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "efvi/backbone.hpp"

namespace efvi {

// Checkpoint: <stem>.json manifest (model config plus parameter name ->
// shape/dtype/offset) and <stem>.bin, a single raw little-endian float32
// blob. Loading validates the total length.
void save_checkpoint(DenoiserModel& model, const std::string& stem);

// Reconstructs the model from the manifest's embedded config; every
// parameter must be present.
DenoiserModel load_checkpoint(const std::string& stem);

struct LoadReport {
    std::vector<std::string> loaded;
    std::vector<std::string> kept_fresh;  // model params absent from the checkpoint
};

// Loads into an existing model. Parameters in the checkpoint must match the
// model by name and shape; model parameters missing from the checkpoint are
// allowed only under the "efnet." prefix (they keep their initialization and
// a warning is emitted).
LoadReport load_checkpoint_into(DenoiserModel& model, const std::string& stem);

}  // namespace efvi
