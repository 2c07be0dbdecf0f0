#pragma once

#include <filesystem>
#include <ostream>

#include "voxalign/config.hpp"
#include "voxalign/verify.hpp"

namespace voxalign {

// Subcommand bodies behind the `voxalign` executable. Each returns the
// process exit code on success (always 0); failures are thrown and mapped
// to exit codes by run_cli: ConfigError/ShapeError -> 1, DataError/
// NumericError -> 2, VerifyError -> 3.
int cmd_synth(const RunConfig& config, const std::filesystem::path& out_dir,
              std::ostream& out);
int cmd_train(const RunConfig& config, const std::filesystem::path& data_dir,
              const std::filesystem::path& out_dir, std::ostream& out);
int cmd_eval(const RunConfig& config, const std::filesystem::path& data_dir,
             const std::filesystem::path& run_dir, std::ostream& out);
int cmd_export_embeddings(const RunConfig& config,
                          const std::filesystem::path& data_dir,
                          const std::filesystem::path& run_dir,
                          std::ostream& out);
int cmd_verify(const VerifyOptions& options, std::ostream& out);
int cmd_shapes(const RunConfig& config, std::ostream& out);

int run_cli(int argc, const char* const* argv);

}  // namespace voxalign
