#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace xlslm {

/// A locked experiment directory. The resolved config snapshot is written
/// before any work so the run is self-describing; timestamps live only in
/// the run summary.
class RunDirectory {
 public:
  static RunDirectory create(const std::filesystem::path& dir,
                             const nlohmann::json& resolved_config);
  ~RunDirectory();

  RunDirectory(RunDirectory&& other) noexcept;
  RunDirectory& operator=(RunDirectory&&) = delete;
  RunDirectory(const RunDirectory&) = delete;
  RunDirectory& operator=(const RunDirectory&) = delete;

  const std::filesystem::path& path() const { return dir_; }
  std::filesystem::path arm_dir(const std::string& name) const;
  void write_summary(const nlohmann::json& summary) const;

 private:
  RunDirectory(std::filesystem::path dir, int lock_fd);

  std::filesystem::path dir_;
  int lock_fd_ = -1;
};

/// Compiler and library identification recorded in run summaries.
nlohmann::json build_fingerprint();

}  // namespace xlslm
