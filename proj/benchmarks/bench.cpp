#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cdlgen/ast.hpp"
#include "cdlgen/interpreter.hpp"
#include "cdlgen/library_index.hpp"
#include "cdlgen/oracle.hpp"
#include "cdlgen/task.hpp"
#include "cdlgen/validator.hpp"

using namespace cdlgen;
namespace fs = std::filesystem;

namespace {

const fs::path kData = CDLGEN_DATA_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const LibraryIndex& index() {
  static const LibraryIndex idx = [] {
    auto i = load_index_file(kData / "fixtures.idx");
    i.set_renames(load_rename_map(kData / "library" / "renames.tsv"));
    return i;
  }();
  return idx;
}

void BM_ParseTask4(benchmark::State& state) {
  auto src = slurp(kData / "fixtures" / "Task4.mo");
  for (auto _ : state) benchmark::DoNotOptimize(parse(src));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * src.size()));
}
BENCHMARK(BM_ParseTask4);

void BM_PrintTask4(benchmark::State& state) {
  auto b = parse(slurp(kData / "fixtures" / "Task4.mo"));
  for (auto _ : state) benchmark::DoNotOptimize(print(b));
}
BENCHMARK(BM_PrintTask4);

void BM_HardRuleLookup(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(hard_rule_lookup(index(), "TrueDelay"));
}
BENCHMARK(BM_HardRuleLookup);

void BM_FuzzySearch(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(baseline_fuzzy_search(index(), "And", 5));
}
BENCHMARK(BM_FuzzySearch);

void BM_ValidateTask4(benchmark::State& state) {
  auto b = parse(slurp(kData / "fixtures" / "Task4.mo"));
  auto task = load_task("4");
  for (auto _ : state) benchmark::DoNotOptimize(validate(b, index(), &task));
}
BENCHMARK(BM_ValidateTask4);

// one hour at 10 s over the Task 4 probe
void BM_SimulateTask4(benchmark::State& state) {
  auto net = elaborate(parse(slurp(kData / "fixtures" / "Task4.mo")), index());
  auto oracle = make_oracle(load_task("4"));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(net, oracle.probe, oracle.step_size, oracle.horizon));
}
BENCHMARK(BM_SimulateTask4);

}  // namespace

BENCHMARK_MAIN();
