// SPDX-License-Identifier: Apache-2.0
#include "hcgst/cli.hpp"

int main(int argc, char** argv) { return hcgst::run_cli(argc, argv); }
