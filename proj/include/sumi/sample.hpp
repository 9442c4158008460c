#pragma once

// The unit flowing through streams: one feature vector per modality, an
// optional held-out label, and a tag naming the corruption domain the
// sample was drawn from.

#include <string>

#include "sumi/tensor.hpp"

namespace sumi {

struct MultimodalSample {
  numkit::Tensor x_u1;
  numkit::Tensor x_u2;
  int label = -1;      // -1 when unknown / held out
  std::string domain;  // e.g. "clean", "noise-u1", "miss-u2"
};

}  // namespace sumi
