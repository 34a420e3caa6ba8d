#pragma once

namespace slg {
// exit status: 0 success, 2 config error, 3 numerical abort (manifest written)
int run_cli(int argc, char** argv);
}  // namespace slg
