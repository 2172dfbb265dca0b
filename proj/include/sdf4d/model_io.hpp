#pragma once

#include <filesystem>
#include <string>

#include "sdf4d/training.hpp"

namespace sdf4d {

/// Everything needed to reload and rerun a trained model: the architecture,
/// normalization, training configuration, seed, a loss summary, and the flat
/// parameter block. The file is a text header (its byte length declared on
/// the first line) followed by the parameters as little-endian 64-bit floats.
struct ModelArtifact {
    int format_version = 1;
    std::string patient_id;
    MlpConfig mlp;
    NormalizationTransform transform;
    TrainingConfig training;
    LossHistorySummary loss_summary;
    ParameterSet params;

    TemporalSdfModel model() const { return {mlp, params, transform}; }
};

void save_model(const std::filesystem::path& path, const ModelArtifact& artifact);
ModelArtifact load_model(const std::filesystem::path& path);

}  // namespace sdf4d
