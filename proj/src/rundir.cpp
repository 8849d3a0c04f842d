#include "xlslm/rundir.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <Eigen/Core>
#include <fstream>

#include "xlslm/errors.hpp"

namespace xlslm {

using nlohmann::json;

RunDirectory::RunDirectory(std::filesystem::path dir, int lock_fd)
    : dir_(std::move(dir)), lock_fd_(lock_fd) {}

RunDirectory::RunDirectory(RunDirectory&& other) noexcept
    : dir_(std::move(other.dir_)), lock_fd_(other.lock_fd_) {
  other.lock_fd_ = -1;
}

RunDirectory RunDirectory::create(const std::filesystem::path& dir,
                                  const json& resolved_config) {
  std::filesystem::create_directories(dir);
  const auto lock_path = dir / "lock";
  const int fd = ::open(lock_path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw DataError("run directory is locked (remove " + lock_path.string() +
                    " if no other command owns it)");
  }
  std::ofstream cfg(dir / "config.json", std::ios::binary);
  if (!cfg) throw DataError("cannot write config snapshot in " + dir.string());
  cfg << resolved_config.dump(2) << '\n';
  return RunDirectory(dir, fd);
}

RunDirectory::~RunDirectory() {
  if (lock_fd_ >= 0) {
    ::close(lock_fd_);
    std::error_code ec;
    std::filesystem::remove(dir_ / "lock", ec);
  }
}

std::filesystem::path RunDirectory::arm_dir(const std::string& name) const {
  const auto p = dir_ / "arms" / name;
  std::filesystem::create_directories(p);
  return p;
}

void RunDirectory::write_summary(const json& summary) const {
  std::ofstream out(dir_ / "run_summary.json", std::ios::binary);
  if (!out) throw DataError("cannot write run summary in " + dir_.string());
  out << summary.dump(2) << '\n';
}

json build_fingerprint() {
  json fp;
  fp["compiler"] = __VERSION__;
  fp["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                std::to_string(EIGEN_MAJOR_VERSION) + "." +
                std::to_string(EIGEN_MINOR_VERSION);
#ifdef NDEBUG
  fp["build"] = "release";
#else
  fp["build"] = "debug";
#endif
  return fp;
}

}  // namespace xlslm
