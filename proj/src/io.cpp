#include "eit/io.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "eit/common.hpp"

namespace eit {
namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  // Binary mode everywhere so text artifacts get exact LF newlines.
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

void finish_write(std::ostream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

// Line reader that tracks positions for error messages of the form path:line.
class TextReader {
 public:
  explicit TextReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open '" + path + "'");
  }

  bool next_line(std::string* line) {
    if (!std::getline(in_, *line)) return false;
    ++line_no_;
    if (!line->empty() && line->back() == '\r') line->pop_back();
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(path_ + ":" + std::to_string(line_no_) + ": " + what);
  }

  const std::string& path() const { return path_; }

 private:
  std::ifstream in_;
  std::string path_;
  int line_no_ = 0;
};

json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(origin + ": " + e.what());
  }
}

json parse_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str(), path);
}

json angles_to_json(const Eigen::MatrixXd& angles) {
  json list = json::array();
  for (int e = 0; e < angles.rows(); ++e)
    list.push_back(json::array({angles(e, 0), angles(e, 1)}));
  return list;
}

Eigen::MatrixXd angles_from_json(const json& list, const std::string& origin) {
  if (!list.is_array() || list.empty())
    throw IoError(origin + ": electrode angle list must be a non-empty array");
  Eigen::MatrixXd angles(static_cast<int>(list.size()), 2);
  for (int e = 0; e < angles.rows(); ++e) {
    const json& pair = list[e];
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
      throw IoError(origin + ": electrode angle entries must be [theta, phi] pairs");
    angles(e, 0) = pair[0].get<double>();
    angles(e, 1) = pair[1].get<double>();
  }
  return angles;
}

// Binary block helpers for the dump formats.
void write_block(std::ostream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void read_block(std::istream& in, void* data, std::size_t bytes, const std::string& path) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes)
    throw IoError(path + ": truncated binary section");
}

std::string header_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": missing header line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

// Parses "keyword value" and returns the value; throws naming the file.
std::string keyword_value(const std::string& line, const std::string& keyword,
                          const std::string& path) {
  std::istringstream ss(line);
  std::string word, value, extra;
  if (!(ss >> word >> value) || word != keyword || (ss >> extra))
    throw IoError(path + ": expected header line '" + keyword + " <value>', got '" + line + "'");
  return value;
}

long long parse_count(const std::string& text, const std::string& what, const std::string& path) {
  std::istringstream ss(text);
  long long value = -1;
  std::string extra;
  if (!(ss >> value) || value < 0 || (ss >> extra))
    throw IoError(path + ": bad " + what + " '" + text + "'");
  return value;
}

}  // namespace

void write_measurements(const std::string& path, const Eigen::VectorXd& values,
                        const Eigen::MatrixXd& layout, const std::string& config_hash,
                        std::uint64_t seed) {
  const int m = static_cast<int>(layout.rows());
  if (layout.cols() != 2 || m < 2)
    throw ParameterError("measurement writer needs an M x 2 electrode layout with M >= 2");
  if (values.size() != static_cast<long>(m) * (m - 1))
    throw ParameterError("measurement vector length does not match M(M-1) for the layout");
  std::ofstream out = open_out(path);
  out << "# config_hash=" << config_hash << "\n";
  out << "# seed=" << seed << "\n";
  out << "# layout=" << angles_to_json(layout).dump() << "\n";
  out << "pattern_index,electrode_index,value_volts\n";
  for (int j = 0; j + 1 < m; ++j)
    for (int a = 0; a < m; ++a)
      out << j << "," << a << "," << format_double(values[j * m + a]) << "\n";
  finish_write(out, path);
}

MeasurementFile read_measurements(const std::string& path) {
  TextReader reader(path);
  MeasurementFile file;
  file.layout.resize(0, 2);

  std::string line;
  bool saw_header = false;
  struct Row {
    long pattern;
    long electrode;
    double value;
  };
  std::vector<Row> rows;

  while (reader.next_line(&line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::size_t start = line.find_first_not_of("# \t", 0);
      if (start == std::string::npos) continue;
      const std::string body = line.substr(start);
      const std::size_t eq = body.find('=');
      if (eq == std::string::npos) continue;  // free-form comment
      const std::string key = body.substr(0, eq);
      const std::string value = body.substr(eq + 1);
      if (key == "config_hash") {
        file.config_hash = value;
      } else if (key == "seed") {
        char* end = nullptr;
        file.seed = std::strtoull(value.c_str(), &end, 10);
        if (end == value.c_str() || *end != '\0') reader.fail("bad seed value '" + value + "'");
      } else if (key == "layout") {
        file.layout = angles_from_json(parse_json_text(value, reader.path()), reader.path());
      }
      continue;
    }
    if (!saw_header) {
      if (line != "pattern_index,electrode_index,value_volts")
        reader.fail("expected header 'pattern_index,electrode_index,value_volts'");
      saw_header = true;
      continue;
    }
    std::istringstream ss(line);
    Row row;
    char c1 = 0, c2 = 0;
    std::string extra;
    if (!(ss >> row.pattern >> c1 >> row.electrode >> c2 >> row.value) || c1 != ',' ||
        c2 != ',' || (ss >> extra))
      reader.fail("bad measurement row '" + line + "'");
    if (!std::isfinite(row.value)) reader.fail("non-finite measurement value");
    rows.push_back(row);
  }
  if (!saw_header) throw IoError(path + ": missing measurement header line");
  if (rows.empty()) throw IoError(path + ": no measurement rows");

  long max_electrode = -1, max_pattern = -1;
  for (const Row& row : rows) {
    if (row.pattern < 0 || row.electrode < 0)
      throw IoError(path + ": negative pattern or electrode index");
    max_electrode = std::max(max_electrode, row.electrode);
    max_pattern = std::max(max_pattern, row.pattern);
  }
  const long m = max_electrode + 1;
  if (m < 2 || max_pattern != m - 2)
    throw IoError(path + ": pattern/electrode indices do not form a complete M(M-1) table");
  file.values.setZero(m * (m - 1));
  std::vector<char> seen(static_cast<std::size_t>(m) * (m - 1), 0);
  for (const Row& row : rows) {
    const long at = row.pattern * m + row.electrode;
    if (seen[static_cast<std::size_t>(at)])
      throw IoError(path + ": duplicate measurement entry for pattern " +
                    std::to_string(row.pattern) + ", electrode " + std::to_string(row.electrode));
    seen[static_cast<std::size_t>(at)] = 1;
    file.values[at] = row.value;
  }
  if (rows.size() != static_cast<std::size_t>(m) * (m - 1))
    throw IoError(path + ": incomplete measurement table");
  if (file.layout.rows() != 0 && file.layout.rows() != m)
    throw IoError(path + ": embedded layout has " + std::to_string(file.layout.rows()) +
                  " electrodes but the data table implies " + std::to_string(m));
  return file;
}

void write_nodal_field(const std::string& path, const SimplicialMesh& mesh,
                       const Eigen::VectorXd& values, const std::string& config_hash) {
  if (values.size() != mesh.n_nodes())
    throw ParameterError("nodal field length does not match the mesh");
  std::ofstream out = open_out(path);
  out << "# config_hash=" << config_hash << "\n";
  out << "node_index,x,y,z,kappa\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    out << i;
    for (int d = 0; d < 3; ++d) out << "," << format_double(mesh.nodes(i, d));
    out << "," << format_double(values[i]) << "\n";
  }
  finish_write(out, path);
}

void write_tv_trace(const std::string& path, const std::vector<TvTraceRow>& rows,
                    const std::string& config_hash) {
  std::ofstream out = open_out(path);
  out << "# config_hash=" << config_hash << "\n";
  out << "linearization,inner_step,tikhonov_value\n";
  for (const TvTraceRow& row : rows)
    out << row.linearization << "," << row.inner_step << "," << format_double(row.tikhonov)
        << "\n";
  finish_write(out, path);
}

void write_design_trace(const std::string& path, const std::vector<DesignTraceRow>& rows,
                        const std::string& config_hash) {
  if (rows.empty()) throw ParameterError("design trace needs at least one row");
  const int m = static_cast<int>(rows.front().angles.rows());
  std::ofstream out = open_out(path);
  out << "# config_hash=" << config_hash << "\n";
  out << "iter";
  for (int e = 1; e <= m; ++e) out << ",theta_" << e;
  for (int e = 1; e <= m; ++e) out << ",phi_" << e;
  out << ",psi_a,psi_a_sqrt,grad_norm,lambda_bar,armijo_trials,accepted\n";
  for (const DesignTraceRow& row : rows) {
    if (row.angles.rows() != m) throw ParameterError("design trace rows disagree on M");
    out << row.iteration;
    for (int e = 0; e < m; ++e) out << "," << format_double(row.angles(e, 0));
    for (int e = 0; e < m; ++e) out << "," << format_double(row.angles(e, 1));
    out << "," << format_double(row.value) << "," << format_double(row.value_sqrt) << ","
        << format_double(row.gradient_norm) << "," << format_double(row.lambda) << ","
        << row.armijo_trials << "," << (row.accepted ? 1 : 0) << "\n";
  }
  finish_write(out, path);
}

void write_density_dump(const std::string& path, const DensityDump& dump) {
  const long n = static_cast<long>(dump.node_indices.size());
  if (n < 1) throw ParameterError("density dump needs at least one node");
  if (dump.mean.size() != n || dump.covariance.rows() != n || dump.covariance.cols() != n)
    throw ParameterError("density dump mean/covariance sizes do not match the node map");
  const std::uint64_t map_hash =
      fnv1a64(dump.node_indices.data(), dump.node_indices.size() * sizeof(std::int64_t));
  std::ofstream out = open_out(path);
  out << "eitgauss 1\n";
  out << "n " << n << "\n";
  out << "nodemap_hash " << hash_hex(map_hash) << "\n";
  out << "config_hash " << dump.config_hash << "\n";
  out << "sections indices mean covariance\n";
  write_block(out, dump.node_indices.data(), dump.node_indices.size() * sizeof(std::int64_t));
  write_block(out, dump.mean.data(), static_cast<std::size_t>(n) * sizeof(double));
  Eigen::RowVectorXd row(n);
  for (long i = 0; i < n; ++i) {
    row = dump.covariance.row(i);
    write_block(out, row.data(), static_cast<std::size_t>(n) * sizeof(double));
  }
  finish_write(out, path);
}

DensityDump read_density_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  if (header_line(in, path) != "eitgauss 1")
    throw IoError(path + ": not a density dump (bad format tag)");
  const long n = static_cast<long>(
      parse_count(keyword_value(header_line(in, path), "n", path), "node count", path));
  if (n < 1) throw IoError(path + ": node count must be positive");
  const std::string stored_map_hash = keyword_value(header_line(in, path), "nodemap_hash", path);
  DensityDump dump;
  dump.config_hash = keyword_value(header_line(in, path), "config_hash", path);
  const std::string sections = header_line(in, path);
  if (sections != "sections indices mean covariance")
    throw IoError(path + ": unexpected section list '" + sections + "'");

  dump.node_indices.resize(static_cast<std::size_t>(n));
  read_block(in, dump.node_indices.data(), dump.node_indices.size() * sizeof(std::int64_t), path);
  const std::uint64_t map_hash =
      fnv1a64(dump.node_indices.data(), dump.node_indices.size() * sizeof(std::int64_t));
  if (hash_hex(map_hash) != stored_map_hash)
    throw IoError(path + ": node map hash mismatch (corrupt or mismatched file)");
  dump.mean.resize(n);
  read_block(in, dump.mean.data(), static_cast<std::size_t>(n) * sizeof(double), path);
  dump.covariance.resize(n, n);
  Eigen::RowVectorXd row(n);
  for (long i = 0; i < n; ++i) {
    read_block(in, row.data(), static_cast<std::size_t>(n) * sizeof(double), path);
    dump.covariance.row(i) = row;
  }
  if (in.peek() != std::ifstream::traits_type::eof())
    throw IoError(path + ": trailing bytes after covariance section");
  return dump;
}

void write_layout_json(const std::string& path, const Eigen::MatrixXd& angles,
                       int feeding_electrode, double surface_radius, double contact_radius,
                       double contact_tau, const std::string& config_hash) {
  if (angles.cols() != 2 || angles.rows() < 2)
    throw ParameterError("layout writer needs an M x 2 angle matrix with M >= 2");
  json doc;
  doc["angles"] = angles_to_json(angles);
  doc["config_hash"] = config_hash;
  doc["contact_radius"] = contact_radius;
  doc["contact_tau"] = contact_tau;
  doc["feeding_electrode"] = feeding_electrode;
  doc["surface_radius"] = surface_radius;
  std::ofstream out = open_out(path);
  out << doc.dump(2) << "\n";
  finish_write(out, path);
}

Eigen::MatrixXd read_layout_json(const std::string& path, int* feeding_electrode) {
  const json doc = parse_json_file(path);
  if (!doc.is_object() || !doc.contains("angles"))
    throw IoError(path + ": layout file must be an object with an 'angles' array");
  if (feeding_electrode != nullptr) {
    *feeding_electrode = 0;
    if (doc.contains("feeding_electrode")) {
      if (!doc["feeding_electrode"].is_number_integer())
        throw IoError(path + ": feeding_electrode must be an integer");
      *feeding_electrode = doc["feeding_electrode"].get<int>();
    }
  }
  return angles_from_json(doc["angles"], path);
}

void write_noise_state(const std::string& path, const NoiseState& state) {
  json doc;
  doc["config_hash"] = state.config_hash;
  doc["eta"] = state.eta;
  doc["omega"] = state.omega;
  std::ofstream out = open_out(path);
  out << doc.dump(2) << "\n";
  finish_write(out, path);
}

std::optional<NoiseState> read_noise_state(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) return std::nullopt;
  probe.close();
  const json doc = parse_json_file(path);
  if (!doc.is_object() || !doc.contains("config_hash") || !doc.contains("eta") ||
      !doc.contains("omega") || !doc["eta"].is_number() || !doc["omega"].is_number() ||
      !doc["config_hash"].is_string())
    throw IoError(path + ": noise state needs config_hash, eta and omega fields");
  NoiseState state;
  state.config_hash = doc["config_hash"].get<std::string>();
  state.eta = doc["eta"].get<double>();
  state.omega = doc["omega"].get<double>();
  return state;
}

void write_jacobian_dump(const std::string& path, const Eigen::MatrixXd& jacobian,
                         const std::string& base_hash) {
  std::ofstream out = open_out(path);
  out << "eitjac 1\n";
  out << "rows " << jacobian.rows() << "\n";
  out << "cols " << jacobian.cols() << "\n";
  out << "base_hash " << base_hash << "\n";
  Eigen::RowVectorXd row(jacobian.cols());
  for (long i = 0; i < jacobian.rows(); ++i) {
    row = jacobian.row(i);
    write_block(out, row.data(), static_cast<std::size_t>(jacobian.cols()) * sizeof(double));
  }
  finish_write(out, path);
}

Eigen::MatrixXd read_jacobian_dump(const std::string& path, std::string* base_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  if (header_line(in, path) != "eitjac 1")
    throw IoError(path + ": not a Jacobian dump (bad format tag)");
  const long rows = static_cast<long>(
      parse_count(keyword_value(header_line(in, path), "rows", path), "row count", path));
  const long cols = static_cast<long>(
      parse_count(keyword_value(header_line(in, path), "cols", path), "column count", path));
  const std::string stored_hash = keyword_value(header_line(in, path), "base_hash", path);
  if (base_hash != nullptr) *base_hash = stored_hash;
  if (rows < 1 || cols < 1) throw IoError(path + ": matrix dimensions must be positive");
  Eigen::MatrixXd jacobian(rows, cols);
  Eigen::RowVectorXd row(cols);
  for (long i = 0; i < rows; ++i) {
    read_block(in, row.data(), static_cast<std::size_t>(cols) * sizeof(double), path);
    jacobian.row(i) = row;
  }
  if (in.peek() != std::ifstream::traits_type::eof())
    throw IoError(path + ": trailing bytes after matrix section");
  return jacobian;
}

}  // namespace eit
