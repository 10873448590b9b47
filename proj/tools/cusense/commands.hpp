/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The cusense Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "CLI11.hpp"

namespace cusense::cli {

// Each registers a subcommand whose callback runs the command. Callbacks throw
// UsageError, StartupError or ThresholdError (see main.cpp for the mapping).
void add_emulate(CLI::App& app);
void add_agent(CLI::App& app);
void add_dapp(CLI::App& app);
void add_background(CLI::App& app);
void add_dataset(CLI::App& app);
void add_evaluate(CLI::App& app);
void add_bench(CLI::App& app);
void add_e2e(CLI::App& app);

}  // namespace cusense::cli
