#include <benchmark/benchmark.h>

// The distribution's benchmark_main archive carries LTO bytecode from another
// compiler release, so the entry point is defined here.
BENCHMARK_MAIN();
