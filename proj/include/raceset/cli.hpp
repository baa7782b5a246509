// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace raceset {

// Exit codes: 0 race-free, 1 race found, 2 inconclusive, 3 input/parse error,
// 4 internal error. Reports go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace raceset
