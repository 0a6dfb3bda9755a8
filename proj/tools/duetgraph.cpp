// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#include "duetgraph/cli/app.hpp"

int main(int argc, char** argv) { return duetgraph::cli::run(argc, argv); }
