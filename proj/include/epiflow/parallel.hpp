#pragma once

#include <functional>

namespace epiflow {

/// Process-wide worker cap for per-pixel loops. Defaults to 1, which makes
/// every reduction bit-stable. Values > 1 distribute rows over std::thread
/// workers; per-row partials are always combined in row order, so results do
/// not depend on the thread count beyond floating-point addition order inside
/// a row (which is fixed).
void set_max_threads(int n);
int max_threads();

/// Runs fn(row) for every row in [0, rows). Rows are distributed over at most
/// max_threads() workers. fn must only write row-local state.
void parallel_rows(int rows, const std::function<void(int)>& fn);

}  // namespace epiflow
