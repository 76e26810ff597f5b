#include "layerlimit/layering.hpp"
#include "layerlimit/morleyization.hpp"
#include "layerlimit/sampler.hpp"
#include "layerlimit/structures.hpp"
#include "layerlimit/syntax.hpp"

#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

using namespace layerlimit;

namespace {

std::string read_data(const std::string& rel) {
  std::ifstream f(std::string(LAYERLIMIT_DATA_DIR) + "/" + rel);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::shared_ptr<Layering> build(const std::string& oracle, const std::string& theory_file, int stages) {
  const Theory theory = parse_theory(read_data(theory_file));
  auto lay = std::make_shared<Layering>(make_oracle(oracle, theory.language), theory, std::vector<QfTypeSpec>{});
  lay->build(stages);
  return lay;
}

void BM_BuildDlo(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build("dlo", "theories/dlo.theory", static_cast<int>(state.range(0))));
}
BENCHMARK(BM_BuildDlo)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_BuildRado(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(build("rado", "theories/rado.theory", static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_BuildRado)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_ValidateRegular(benchmark::State& state) {
  auto lay = build("dlo", "theories/dlo.theory", 60);
  for (auto _ : state) benchmark::DoNotOptimize(validate_regular(*lay));
}
BENCHMARK(BM_ValidateRegular)->Unit(benchmark::kMillisecond);

void BM_SampleInduced(benchmark::State& state) {
  auto lay = build("rado", "theories/rado.theory", 60);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    SampleSession s(lay, StreamRng::mix(++seed));
    benchmark::DoNotOptimize(s.induced_structure(static_cast<std::size_t>(state.range(0))));
  }
}
BENCHMARK(BM_SampleInduced)->Arg(3)->Arg(10)->Arg(20);

void BM_TFull(benchmark::State& state) {
  const FiniteStructure pattern = make_graph(3, {{0, 1}, {1, 2}});
  FiniteStructure target = make_graph(static_cast<int>(state.range(0)), {});
  for (int a = 0; a < target.size(); ++a) {
    for (int b = a + 1; b < target.size(); ++b) {
      if ((a * 7 + b * 3) % 5 < 2) {
        target.set(0, {a, b});
        target.set(0, {b, a});
      }
    }
  }
  const WeightedStructure w = WeightedStructure::uniform(target);
  for (auto _ : state) benchmark::DoNotOptimize(t_full(pattern, w, target.language()));
}
BENCHMARK(BM_TFull)->Arg(8)->Arg(32);

void BM_Morleyize(benchmark::State& state) {
  const auto source = parse_fragment_source(read_data("fragments/digraph.frag"));
  std::vector<NamedFormula> gens = source.formulas;
  gens.insert(gens.end(), source.axioms.begin(), source.axioms.end());
  const Fragment fr = Fragment::generate(source.language, gens);
  const MorleyLanguage la = build_LA(fr);
  const FiniteStructure m = make_graph(static_cast<int>(state.range(0)), {{0, 1}, {1, 2}}, false);
  for (auto _ : state) benchmark::DoNotOptimize(morleyize_structure(m, fr, la));
}
BENCHMARK(BM_Morleyize)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
