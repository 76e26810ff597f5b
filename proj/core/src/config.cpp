#include "layerlimit/config.hpp"

#include "layerlimit/errors.hpp"

#include <cstdlib>
#include <sstream>

namespace layerlimit {

Bounds Bounds::from_env() {
  Bounds b;
  if (const char* env = std::getenv("LAYERLIMIT_BOUNDS"); env != nullptr && *env != '\0') b.apply(env);
  return b;
}

void Bounds::apply(const std::string& spec) {
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw Error("bounds", "expected key=value in '" + item + "'");
    std::string key = item.substr(0, eq);
    std::uint64_t value = 0;
    try {
      value = std::stoull(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw Error("bounds", "bad value for " + key);
    }
    auto as_int = [&] { return static_cast<int>(value); };
    if (key == "automorphism_size") automorphism_size = as_int();
    else if (key == "dcl_model_size") dcl_model_size = as_int();
    else if (key == "dcl_max_relations") dcl_max_relations = as_int();
    else if (key == "dcl_max_arity") dcl_max_arity = as_int();
    else if (key == "dcl_work") dcl_work = value;
    else if (key == "duplicate_check_k") duplicate_check_k = as_int();
    else if (key == "type_arity") type_arity = as_int();
    else if (key == "exhaustive_tuples") exhaustive_tuples = value;
    else if (key == "witness_scan") witness_scan = value;
    else if (key == "witness_patterns") witness_patterns = as_int();
    else if (key == "max_depth") max_depth = as_int();
    else throw Error("bounds", "unknown bound '" + key + "'");
  }
}

}  // namespace layerlimit
