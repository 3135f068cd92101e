#pragma once

namespace focus::cli {

// Entry point of the focus_bench command line. Returns the process exit
// code: 0 ok, 1 usage, 2 data error, 3 explainer failure.
int run(int argc, char** argv);

}  // namespace focus::cli
