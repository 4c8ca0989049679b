#pragma once

#include "config.hpp"

namespace condnorm::cli {

void cmd_clean(const RunConfig& config);
void cmd_normalize(const RunConfig& config);
void cmd_impute(const RunConfig& config);
void cmd_ccf(const RunConfig& config);
void cmd_lagtime(const RunConfig& config);
void cmd_synth(const RunConfig& config);

}  // namespace condnorm::cli
