#pragma once

#include "treefx/models.hpp"

#include <string>
#include <variant>

namespace treefx {

/// A model file holds either a single-forest fit or a BCF fit.
using SavedModel = std::variant<FitResult, BcfFitResult>;

/// Nested-node JSON: internal nodes {"var", "cut", "threshold", "left",
/// "right"}, leaves {"mu"}.
std::string tree_to_json(const Tree& tree);
Tree tree_from_json(const std::string& text);

/// Serializes the draws, scaler and options. `metadata` must be a JSON
/// document (or empty) and is embedded verbatim under "metadata".
std::string model_to_json(const SavedModel& model, const std::string& metadata = "");
SavedModel model_from_json(const std::string& text);

void save_model(const std::string& path, const SavedModel& model, const std::string& metadata = "");
SavedModel load_model(const std::string& path);

}  // namespace treefx
