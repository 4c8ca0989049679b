#pragma once

#include <string>

#include "condnorm/ar.hpp"
#include "condnorm/gam.hpp"
#include "condnorm/normalize.hpp"

namespace condnorm {

// JSON round trips. Doubles are written as shortest round-trip decimals,
// so a reloaded model predicts bit-identically. Training-row vectors
// (fitted, linear_predictor) are not stored. Parse errors throw SchemaError.

std::string to_json(const SmoothModel& model);
SmoothModel smooth_model_from_json(const std::string& text);

std::string to_json(const ConditionalNormalizer& normalizer);
ConditionalNormalizer normalizer_from_json(const std::string& text);

std::string to_json(const ArModel& model);
ArModel ar_model_from_json(const std::string& text);

}  // namespace condnorm
