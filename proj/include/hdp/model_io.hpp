#pragma once

#include <filesystem>
#include <string>

#include "hdp/pipeline.hpp"

namespace hdp::model_io {

std::string to_json_text(const pipeline::TrainedModel& model);
pipeline::TrainedModel from_json_text(const std::string& text);

void save(const pipeline::TrainedModel& model, const std::filesystem::path& path);
pipeline::TrainedModel load(const std::filesystem::path& path);

}  // namespace hdp::model_io
