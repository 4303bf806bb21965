#pragma once

namespace ccm {

// Exit status: 0 success, 1 validation/usage error, 2 runtime failure.
int run(int argc, const char* const* argv);

}  // namespace ccm
