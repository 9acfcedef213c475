#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace themes::cli {

// Exit codes: 0 success, 1 invalid input or usage, 2 computation failure.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

// Holds DIR/.lock for its lifetime; a second holder fails with an input error.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace themes::cli
