#pragma once

// Subprocess contract for external explainers.
//
// The harness runs
//   <command...> --manifest <manifest.json> --output-dir <dir> --target-class-field target_class
// once per mosaic set. The explainer reads each mosaic PNG and its target
// class from the manifest and writes one <mosaic_id>.foc1 per mosaic.
// Exit codes: 0 ok, 1 usage, 2 model/load failure, 3 inference failure.
// stdout carries nothing but "PROGRESS <done>/<total>" lines; stderr is free-form.

#include "focus/attribution_io.hpp"
#include "focus/error.hpp"

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace focus {

struct ExplainerInvocation {
    std::vector<std::string> command;  // executable followed by fixed arguments
    std::chrono::milliseconds timeout{std::chrono::hours(1)};
    // Environment variables handed to the explainer. Empty: inherit everything.
    std::vector<std::string> env_passthrough;
};

// Splits a command line on whitespace; single or double quotes group words.
std::vector<std::string> split_command(const std::string& text);

class ExplainerError : public Error {
public:
    ExplainerError(const std::string& what, int exit_code, std::string stderr_tail, bool timed_out)
        : Error(ErrorKind::explainer, what),
          exit_code_(exit_code),
          stderr_tail_(std::move(stderr_tail)),
          timed_out_(timed_out) {}

    int exit_code() const noexcept { return exit_code_; }
    const std::string& stderr_tail() const noexcept { return stderr_tail_; }
    bool timed_out() const noexcept { return timed_out_; }

private:
    int exit_code_;
    std::string stderr_tail_;
    bool timed_out_;
};

struct ExplainerRun {
    ValidationReport report;
    std::chrono::duration<double> duration{};
    std::size_t progress_updates = 0;
    std::string stderr_tail;
};

inline constexpr std::size_t kStderrTailBytes = 4096;

// Invokes the explainer and validates its outputs. Throws ExplainerError on
// a nonzero exit, a signal or a timeout (the process group is killed).
ExplainerRun run_explainer(const ExplainerInvocation& invocation, const std::filesystem::path& manifest_json,
                           const std::filesystem::path& out_dir, unsigned jobs = 0);

}  // namespace focus
