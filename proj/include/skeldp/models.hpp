#pragma once

#include <memory>
#include <string>

#include "skeldp/dp.hpp"
#include "skeldp/structures.hpp"

namespace skeldp {

/**
 * A controlled problem assembled from a JSON description:
 *
 *   {"kind": "euler_sde" | "fbm_sde" | "rough_vol" | "sign_tree",
 *    "action": {"r": 1, "a_bar": 1, "grid": 5},
 *    "payoff": {"type": "terminal_linear" | "target_quadratic" |
 *                       "terminal_call" | "path_average", ...},
 *    ...kind-specific fields}
 *
 * See README.md for the field list of every kind.
 */
struct Model {
  std::string kind;
  std::shared_ptr<const Structure> structure;
  Payoff payoff;
  ActionSpace actions;
  std::string canonical_json;  // normalised echo, stable key order
};

Model make_model_from_json(const std::string& text);

}  // namespace skeldp
