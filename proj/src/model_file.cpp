#include "sqrtkf/model_file.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sqrtkf {
namespace {

using json = nlohmann::json;

Matrix matrix_from_json(const json& node, std::string_view name) {
  const std::string where = "model file: " + std::string(name);
  if (node.is_string()) {
    try {
      return from_text(node.get<std::string>());
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  if (!node.is_array() || node.empty()) {
    throw ValidationError(where + ": expected a non-empty array or matrix text");
  }
  auto number = [&](const json& v) {
    if (!v.is_number()) throw ValidationError(where + ": non-numeric entry");
    return v.get<double>();
  };
  Matrix m;
  if (!node.front().is_array()) {
    m.resize(static_cast<Index>(node.size()), 1);
    for (std::size_t i = 0; i < node.size(); ++i) m(static_cast<Index>(i), 0) = number(node[i]);
  } else {
    const std::size_t cols = node.front().size();
    m.resize(static_cast<Index>(node.size()), static_cast<Index>(cols));
    for (std::size_t i = 0; i < node.size(); ++i) {
      const json& row = node[i];
      if (!row.is_array() || row.size() != cols) {
        throw ShapeError(where + ": ragged rows");
      }
      for (std::size_t j = 0; j < cols; ++j) {
        m(static_cast<Index>(i), static_cast<Index>(j)) = number(row[j]);
      }
    }
  }
  require_nonempty(m, where);
  require_finite(m, where);
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

ModelFile parse_model_file(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("model file: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("model file: expected a JSON object");

  ModelFile out;
  auto fields = out.params.fields();
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const std::string key(ModelParams::kFieldNames[i]);
    if (!doc.contains(key)) throw ValidationError("model file: missing '" + key + "'");
    *fields[i] = matrix_from_json(doc.at(key), key);
  }
  for (const char* key : {"d_x", "d_y"}) {
    if (doc.contains(key) && !doc.at(key).is_number_integer()) {
      throw ValidationError(std::string("model file: '") + key + "' must be an integer");
    }
  }
  if (doc.contains("d_x") && doc.at("d_x").get<Index>() != out.params.state_dim()) {
    throw ShapeError("model file: d_x does not match a");
  }
  if (doc.contains("d_y") && doc.at("d_y").get<Index>() != out.params.obs_dim()) {
    throw ShapeError("model file: d_y does not match b");
  }
  out.params.validate();

  if (doc.contains("observations")) {
    const json& obs = doc.at("observations");
    if (!obs.is_array()) throw ValidationError("model file: 'observations' must be an array");
    for (const json& y : obs) {
      Matrix col = matrix_from_json(y, "observations");
      require_shape(col, out.params.obs_dim(), 1, "model file: observation");
      out.observations.push_back(std::move(col));
    }
  }
  return out;
}

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_file(buf.str());
}

std::string to_json(const ModelFile& file) {
  json doc;
  doc["d_x"] = file.params.state_dim();
  doc["d_y"] = file.params.obs_dim();
  const auto fields = file.params.fields();
  for (std::size_t i = 0; i < fields.size(); ++i) {
    doc[std::string(ModelParams::kFieldNames[i])] = matrix_to_json(*fields[i]);
  }
  if (!file.observations.empty()) {
    json obs = json::array();
    for (const Matrix& y : file.observations) {
      json col = json::array();
      for (Index i = 0; i < y.rows(); ++i) col.push_back(y(i, 0));
      obs.push_back(std::move(col));
    }
    doc["observations"] = std::move(obs);
  }
  return doc.dump(2);
}

}  // namespace sqrtkf
