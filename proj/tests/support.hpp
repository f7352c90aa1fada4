#pragma once

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace oft_test {

namespace fs = std::filesystem;

inline fs::path source_dir() { return OFT_SOURCE_DIR; }
inline fs::path cli_path() { return OFT_CLI; }

// Fresh, empty directory under the build tree.
inline fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(OFT_BINARY_DIR) / "scratch" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

struct CliResult {
  int code = -1;
  std::string out;  // stdout only
};

// Runs the CLI with `args` (already shell-quoted), stderr discarded.
inline CliResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + cli_path().string() + "\" " + args + " 2>/dev/null";
  CliResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace oft_test
