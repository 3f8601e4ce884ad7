#pragma once

#include <string>

#include "mriq/errors.hpp"
#include "mriq/nn.hpp"

namespace mriq::ckpt {

/// Checkpoint container, little-endian throughout:
///   bytes 0..3   magic "MQC1"
///   bytes 4..7   u32 length of the JSON header that follows
///   header       {"arch":..,"channels":[..],"input_size":..,
///                 "num_classes":..,"seed":..,"steps":..}
///   payload      every parameter tensor as raw f32, in network parameter
///                order (weights, biases, batchnorm gamma/beta and running
///                statistics), so a loaded model predicts bit-identically.

struct BadMagicError : Error {
  using Error::Error;
};
struct HeaderError : Error {
  using Error::Error;
};
struct TruncatedError : Error {
  using Error::Error;
};

void save_checkpoint(nn::Network<float>& net, const std::string& path);

/// Rebuilds the architecture named in the header and fills in the payload.
nn::Network<float> load_checkpoint(const std::string& path);

}  // namespace mriq::ckpt
