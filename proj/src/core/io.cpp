#include "mvpi/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mvpi {

namespace {

using nlohmann::json;

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, std::string(what) + ": " + e.what());
  }
}

template <class T>
T field(const json& doc, const char* key) {
  if (!doc.contains(key)) fail(ErrorCode::Parse, std::string("MDP JSON is missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("MDP JSON field '") + key + "': " + e.what());
  }
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows, std::size_t n_rows, std::size_t n_cols,
                 const char* what) {
  require(rows.size() == n_rows, ErrorCode::Parse, std::string(what) + ": wrong number of rows");
  Matrix m(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
  for (std::size_t i = 0; i < n_rows; ++i) {
    require(rows[i].size() == n_cols, ErrorCode::Parse, std::string(what) + ": wrong row length");
    for (std::size_t j = 0; j < n_cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

std::vector<std::vector<double>> from_matrix(const Matrix& m) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows[static_cast<std::size_t>(i)].assign(m.row(i).begin(), m.row(i).end());
  }
  return rows;
}

std::size_t parse_index(std::string_view token, std::size_t line, const char* column) {
  std::size_t value = 0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    fail(ErrorCode::Parse, "batch CSV line " + std::to_string(line) + ": column " + column +
                               " is not a non-negative integer");
  }
  return value;
}

double parse_real(std::string_view token, std::size_t line) {
  std::string buf(token);
  char* end = nullptr;
  const double value = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(value)) {
    fail(ErrorCode::Parse, "batch CSV line " + std::to_string(line) + ": reward is not a finite number");
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

MdpDocument parse_mdp_json(std::string_view text) {
  const json doc = parse_json(text, "MDP JSON");
  const auto ns = field<std::size_t>(doc, "n_states");
  const auto na = field<std::size_t>(doc, "n_actions");
  const auto gamma = field<double>(doc, "gamma");
  const auto mu0 = field<std::vector<double>>(doc, "mu0");
  const auto reward = field<std::vector<std::vector<double>>>(doc, "reward");
  const auto kernel = field<std::vector<std::vector<std::vector<double>>>>(doc, "kernel");

  require(mu0.size() == ns, ErrorCode::Parse, "MDP JSON: mu0 length does not match n_states");
  require(kernel.size() == ns, ErrorCode::Parse, "MDP JSON: kernel has wrong number of states");
  std::vector<double> flat;
  flat.reserve(ns * na * ns);
  for (const auto& by_action : kernel) {
    require(by_action.size() == na, ErrorCode::Parse, "MDP JSON: kernel has wrong number of actions");
    for (const auto& row : by_action) {
      require(row.size() == ns, ErrorCode::Parse, "MDP JSON: kernel row has wrong length");
      flat.insert(flat.end(), row.begin(), row.end());
    }
  }
  Vector initial = Eigen::Map<const Vector>(mu0.data(), static_cast<Eigen::Index>(ns));
  MdpDocument out{FiniteMdp(ns, na, to_matrix(reward, ns, na, "MDP JSON reward"), std::move(flat),
                            std::move(initial), gamma),
                  std::nullopt};
  if (doc.contains("d")) {
    out.sampling_d = to_matrix(field<std::vector<std::vector<double>>>(doc, "d"), ns, na, "MDP JSON d");
  }
  return out;
}

MdpDocument load_mdp_json(const std::string& path) { return parse_mdp_json(read_file(path)); }

std::string mdp_to_json(const FiniteMdp& mdp, const std::optional<Matrix>& sampling_d) {
  json doc;
  doc["n_states"] = mdp.n_states();
  doc["n_actions"] = mdp.n_actions();
  doc["gamma"] = mdp.discount();
  doc["mu0"] = std::vector<double>(mdp.initial_dist().begin(), mdp.initial_dist().end());
  doc["reward"] = from_matrix(mdp.reward());
  std::vector<std::vector<std::vector<double>>> kernel(mdp.n_states());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const auto row = mdp.kernel_row(s, a);
      kernel[s].emplace_back(row.begin(), row.end());
    }
  }
  doc["kernel"] = kernel;
  if (sampling_d) doc["d"] = from_matrix(*sampling_d);
  return doc.dump(2) + "\n";
}

TransitionBatch parse_batch_csv(std::string_view text, std::optional<Matrix> assumed_d) {
  std::vector<Transition> records;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (!header_seen) {
      if (cols.size() != 4 || cols[0] != "s" || cols[1] != "a" || cols[2] != "r" || cols[3] != "s_next") {
        fail(ErrorCode::Parse, "batch CSV must start with header s,a,r,s_next");
      }
      header_seen = true;
      continue;
    }
    if (cols.size() != 4) {
      fail(ErrorCode::Parse, "batch CSV line " + std::to_string(line_no) + ": expected 4 columns");
    }
    records.push_back({parse_index(cols[0], line_no, "s"), parse_index(cols[1], line_no, "a"),
                       parse_real(cols[2], line_no), parse_index(cols[3], line_no, "s_next")});
  }
  require(header_seen, ErrorCode::Parse, "batch CSV is empty");
  require(!records.empty(), ErrorCode::Parse, "batch CSV has no records");
  return TransitionBatch(std::move(records), std::move(assumed_d));
}

TransitionBatch load_batch_csv(const std::string& path, std::optional<Matrix> assumed_d) {
  return parse_batch_csv(read_file(path), std::move(assumed_d));
}

std::string batch_to_csv(const TransitionBatch& batch) {
  std::string out = "s,a,r,s_next\n";
  for (const auto& t : batch.records()) {
    out += std::to_string(t.s) + "," + std::to_string(t.a) + "," + format_double(t.r) + "," +
           std::to_string(t.s_next) + "\n";
  }
  return out;
}

Matrix parse_sampling_distribution_json(std::string_view text) {
  const json doc = parse_json(text, "sampling distribution JSON");
  const auto rows = field<std::vector<std::vector<double>>>(doc, "d");
  require(!rows.empty() && !rows.front().empty(), ErrorCode::Parse, "sampling distribution is empty");
  return to_matrix(rows, rows.size(), rows.front().size(), "sampling distribution");
}

Matrix load_sampling_distribution_json(const std::string& path) {
  return parse_sampling_distribution_json(read_file(path));
}

std::string sampling_distribution_to_json(const Matrix& d) {
  json doc;
  doc["d"] = from_matrix(d);
  return doc.dump(2) + "\n";
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorCode::Io, "failed writing '" + path + "'");
}

}  // namespace mvpi
