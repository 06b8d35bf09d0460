#pragma once

// Text body of a model file, shared by model files and training checkpoints.

#include "pontryagus/network.hpp"

#include <istream>
#include <ostream>

namespace pontryagus {

void write_model_body(std::ostream& out, const GuidanceModel& model);
GuidanceModel read_model_body(std::istream& in, const std::string& path);

}  // namespace pontryagus
