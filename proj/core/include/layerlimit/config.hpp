#pragma once

#include <cstdint>
#include <string>

namespace layerlimit {

// Brute-force and search bounds. Defaults keep every acceptance check to
// seconds; LAYERLIMIT_BOUNDS="key=value,..." overrides them at run time.
struct Bounds {
  int automorphism_size = 9;          // automorphisms / dcl_group
  int dcl_model_size = 4;             // detect_violation model size s
  int dcl_max_relations = 2;          // detect_violation language limits
  int dcl_max_arity = 2;
  std::uint64_t dcl_work = 50'000'000;  // node budget for detect_violation
  int duplicate_check_k = 12;         // exhaustive alpha-selection re-verification
  int type_arity = 3;                 // validate_regular tuple arity bound
  std::uint64_t exhaustive_tuples = 2'000'000;  // per-check tuple budget
  std::uint64_t witness_scan = 4096;  // naturals scanned by BIT witness search
  int witness_patterns = 12;          // max atoms enumerated for a new witness
  int max_depth = 160;                // sampler refinement cap, in stages

  static Bounds from_env();
  // Applies "key=value,key=value"; throws on unknown keys.
  void apply(const std::string& spec);
};

}  // namespace layerlimit
