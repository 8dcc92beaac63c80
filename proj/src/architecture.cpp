#include "monotta/detector.hpp"

#include <sstream>

namespace monotta {

std::string Architecture::descriptor() const {
  std::ostringstream out;
  out << "toy-centernet/v1 input=" << input_size << " classes=" << classes << " width=" << width
      << " stride=" << stride << " blocks=";
  for (std::size_t i = 0; i < block_strides.size(); ++i) {
    out << (i ? "," : "") << "conv3x3s" << block_strides[i] << "-norm-softplus4";
  }
  out << " heads=heatmap:sigmoid,size,offset";
  return out.str();
}

}  // namespace monotta
