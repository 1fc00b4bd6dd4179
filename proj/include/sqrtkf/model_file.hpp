#pragma once

// JSON model files.
//
//   {
//     "d_x": 2, "d_y": 1,
//     "a": [[0.9, 0.0], [0.0, 0.9]],     nested rows, or the matrix text
//     "b": "1 2\n1 0",                   form "rows cols\n..." as a string
//     "u_sqrt": ..., "v_sqrt": ..., "s0": ...,
//     "x0": [0.0, 0.0],                  a flat list is a column vector
//     "observations": [[0.1], [-0.3]]    optional, one list of d_y values per step
//   }

#include <string>
#include <string_view>
#include <vector>

#include "sqrtkf/kalman.hpp"

namespace sqrtkf {

struct ModelFile {
  ModelParams params;
  std::vector<Matrix> observations;
};

/// Throws ValidationError / ShapeError on malformed content.
ModelFile parse_model_file(std::string_view json_text);

/// Throws IoError if the file cannot be read.
ModelFile load_model_file(const std::string& path);

std::string to_json(const ModelFile& file);

}  // namespace sqrtkf
