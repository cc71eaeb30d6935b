#pragma once

#include <filesystem>
#include <ostream>
#include <utility>
#include <vector>

#include "flowseg/capnet.hpp"
#include "flowseg/sample.hpp"
#include "flowseg/trainer.hpp"

namespace flowseg {

/// Named layer tensors plus a "config.*" record of the NetConfig.
void save_checkpoint(const std::filesystem::path& path, const NetParams& params, const NetConfig& cfg);
std::pair<NetParams, NetConfig> load_checkpoint(const std::filesystem::path& path);

/// "image" [C, H, W] plus masks "wt", "tc", "ec".
void save_sample(const std::filesystem::path& path, const Sample& sample);
Sample load_sample(const std::filesystem::path& path);

/// Masks "wt", "tc", "ec" plus "lambda_wt", "lambda_tc", "lambda_ec".
void save_prediction(const std::filesystem::path& path, const HierarchyResult& result);
HierarchyResult load_prediction(const std::filesystem::path& path);

/// Sorted *.cmf files of a directory.
std::vector<std::filesystem::path> list_tensor_files(const std::filesystem::path& dir);

/// Exit codes: 0 success, 1 usage error, 2 runtime or validation failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flowseg
