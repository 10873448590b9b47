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

#include <iostream>
#include <stdexcept>

#include "cli_common.hpp"
#include "commands.hpp"
#include "cusense/common/record_file.hpp"
#include "cusense/e3/transport.hpp"
#include "cusense/telemetry/plane.hpp"

int main(int argc, char** argv) {
  using namespace cusense::cli;
  CLI::App app{"cusense: RAN sensing emulator, dApp runtime and evaluation tools"};
  app.set_config("--config", "", "INI/TOML file; [subcommand] sections, flags override it");
  app.require_subcommand(1);
  add_emulate(app);
  add_agent(app);
  add_dapp(app);
  add_background(app);
  add_dataset(app);
  add_evaluate(app);
  add_bench(app);
  add_e2e(app);
  install_signal_handlers();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const StartupError& e) {
    std::cerr << "startup failed: " << e.what() << "\n";
    return kExitStartup;
  } catch (const ThresholdError& e) {
    std::cerr << e.what() << "\n";
    return kExitThreshold;
  } catch (const cusense::telemetry::PlaneError& e) {
    std::cerr << "startup failed: " << e.what() << "\n";
    return kExitStartup;
  } catch (const cusense::e3::TransportError& e) {
    std::cerr << "startup failed: " << e.what() << "\n";
    return kExitStartup;
  } catch (const cusense::RecordFileError& e) {
    std::cerr << "startup failed: " << e.what() << "\n";
    return kExitStartup;
  } catch (const std::invalid_argument& e) {
    // Library validation of user-supplied values.
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
