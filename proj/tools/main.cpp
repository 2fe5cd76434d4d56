// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/cli/cli.hpp"

int main(int argc, char** argv) { return ageshift::run_cli(argc, argv); }
