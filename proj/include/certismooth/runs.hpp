#pragma once

#include <string>

#include "certismooth/config.hpp"
#include "certismooth/report.hpp"

namespace certismooth::runs {

// Each run builds its experiment from the config, writes its report (and any
// side outputs) to out.path, and returns the report for in-process callers.
report::json run_certify(const config::Config& cfg);
report::json run_attack(const config::Config& cfg);
report::json run_adapt(const config::Config& cfg);
report::json run_ablate_k(const config::Config& cfg);
report::json run_pretrain_denoiser(const config::Config& cfg);

// Exit code 0 when the report's aggregates match a recomputation from its
// records, 3 otherwise.
int run_recompute(const config::Config& cfg);

// Dispatch by command name; returns the process exit code.
int run_command(const config::CliInvocation& inv);

}  // namespace certismooth::runs
