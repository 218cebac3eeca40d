#pragma once

#include "mvpi/mdp.hpp"
#include "mvpi/offline.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mvpi {

/// MDP JSON document: n_states, n_actions, gamma, mu0, reward[s][a],
/// kernel[s][a][s'], and an optional sampling distribution d[s][a].
struct MdpDocument {
  FiniteMdp mdp;
  std::optional<Matrix> sampling_d;
};

MdpDocument parse_mdp_json(std::string_view text);
MdpDocument load_mdp_json(const std::string& path);
std::string mdp_to_json(const FiniteMdp& mdp, const std::optional<Matrix>& sampling_d = std::nullopt);

/// Batch CSV with header `s,a,r,s_next`.
TransitionBatch parse_batch_csv(std::string_view text, std::optional<Matrix> assumed_d = std::nullopt);
TransitionBatch load_batch_csv(const std::string& path, std::optional<Matrix> assumed_d = std::nullopt);
std::string batch_to_csv(const TransitionBatch& batch);

/// Sidecar JSON `{"d": [[...], ...]}` holding the assumed sampling distribution.
Matrix parse_sampling_distribution_json(std::string_view text);
Matrix load_sampling_distribution_json(const std::string& path);
std::string sampling_distribution_to_json(const Matrix& d);

/// %.17g, so every double round-trips; "nan" for NaN.
std::string format_double(double x);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace mvpi
