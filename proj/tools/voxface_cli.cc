// Copyright 2026 The voxface Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// voxface command-line tool: one subcommand per pipeline stage, plus "all"
// to run them in order and "config" to print the resolved settings.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "voxface/common.h"
#include "voxface/pipeline.h"

namespace {

struct GlobalFlags {
  std::string config;
  std::vector<std::string> overrides;
  long long seed = -1;
  int jobs = -1;
  std::string output;
  std::string dataset;
};

voxface::PipelineConfig Resolve(const GlobalFlags& flags,
                                voxface::Settings* settings) {
  if (!flags.config.empty()) settings->LoadIni(flags.config);
  settings->LoadEnvironment();
  for (const std::string& kv : flags.overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw voxface::Error("--set expects section.key=value, got '" + kv + "'");
    }
    settings->Set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (flags.seed >= 0) settings->Set("run.seed", std::to_string(flags.seed));
  if (flags.jobs >= 0) settings->Set("run.jobs", std::to_string(flags.jobs));
  if (!flags.output.empty()) settings->Set("paths.output", flags.output);
  if (!flags.dataset.empty()) settings->Set("paths.dataset", flags.dataset);
  return voxface::BuildPipelineConfig(*settings);
}

std::string SettingsHelp() {
  std::string out =
      "Settings (section.key, default). Precedence: defaults < --config < "
      "VOXFACE_SECTION_KEY environment < --set < dedicated flags.\n";
  for (const voxface::Setting& s : voxface::DefaultSettings()) {
    out += "  " + s.key + " = " + (s.value.empty() ? "(preset)" : s.value);
    if (!s.help.empty()) out += "    " + s.help;
    out += "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voice to face-shape analysis pipeline"};
  app.set_version_flag("--version", std::string("voxface ") + VOXFACE_VERSION);
  app.footer(SettingsHelp());
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("--config", flags.config, "INI config file");
  app.add_option("--set", flags.overrides, "override, section.key=value");
  app.add_option("--seed", flags.seed, "master seed");
  app.add_option("--jobs", flags.jobs, "worker threads, 0 = all cores");
  app.add_option("--out", flags.output, "artifact directory");
  app.add_option("--dataset", flags.dataset, "dataset root");

  std::vector<std::string> stages = voxface::StageNames();
  for (const std::string& s : stages) app.add_subcommand(s, "run the " + s + " stage");
  app.add_subcommand("all", "run every stage in order");
  app.add_subcommand("config", "print the resolved settings and hash");

  CLI11_PARSE(app, argc, argv);

  try {
    voxface::Settings settings;
    voxface::PipelineConfig config = Resolve(flags, &settings);
    std::string name = app.get_subcommands().front()->get_name();
    if (name == "config") {
      std::cout << settings.Canonical() << "config_hash=" << config.config_hash
                << "\n";
      return 0;
    }
    std::vector<std::string> todo = name == "all" ? stages
                                                  : std::vector<std::string>{name};
    for (const std::string& stage : todo) {
      std::fprintf(stderr, "[voxface] %s\n", stage.c_str());
      voxface::RunStage(stage, config);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "voxface: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
