// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "raceset/cli.hpp"

int main(int argc, char** argv) {
  return raceset::run_cli(argc, argv, std::cout, std::cerr);
}
