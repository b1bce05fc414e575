#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace maglab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;       // a check failed or an unexpected error
inline constexpr int kExitConfig = 2;       // malformed or missing config / input
inline constexpr int kExitNoImpostors = 3;  // protocol lacks impostor (or genuine) pairs
inline constexpr int kExitDiverged = 4;     // training loss became non-finite

// Evaluation protocol cannot produce a threshold.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;  // replaces the config's top-level seed
};

enum class Command { kVerifyTheory, kTrain, kEval };

// Each throws on error; run_command maps exceptions to exit codes.
int cmd_verify_theory(const CommandOptions& opts, std::ostream& log);
int cmd_train(const CommandOptions& opts, std::ostream& log);
int cmd_eval(const CommandOptions& opts, std::ostream& log);

int run_command(Command cmd, const CommandOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace maglab
