// Copyright 2026 The segstream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "segstream/decode.hpp"

#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

namespace segstream {

namespace {

// Edit-operation codes for the backtrace.
enum class Op : unsigned char { match, substitute, del, ins };

void levenshtein_table(const std::vector<int>& ref, const std::vector<int>& hyp,
                       std::vector<std::vector<int>>& cost,
                       std::vector<std::vector<Op>>& op) {
  const size_t n = ref.size(), m = hyp.size();
  cost.assign(n + 1, std::vector<int>(m + 1, 0));
  op.assign(n + 1, std::vector<Op>(m + 1, Op::match));
  for (size_t i = 1; i <= n; ++i) {
    cost[i][0] = static_cast<int>(i);
    op[i][0] = Op::del;
  }
  for (size_t j = 1; j <= m; ++j) {
    cost[0][j] = static_cast<int>(j);
    op[0][j] = Op::ins;
  }
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const bool same = ref[i - 1] == hyp[j - 1];
      int best = cost[i - 1][j - 1] + (same ? 0 : 1);
      Op best_op = same ? Op::match : Op::substitute;
      if (cost[i - 1][j] + 1 < best) {
        best = cost[i - 1][j] + 1;
        best_op = Op::del;
      }
      if (cost[i][j - 1] + 1 < best) {
        best = cost[i][j - 1] + 1;
        best_op = Op::ins;
      }
      cost[i][j] = best;
      op[i][j] = best_op;
    }
  }
}

}  // namespace

EditCounts edit_distance(const std::vector<int>& ref, const std::vector<int>& hyp) {
  std::vector<std::vector<int>> cost;
  std::vector<std::vector<Op>> op;
  levenshtein_table(ref, hyp, cost, op);

  EditCounts counts;
  size_t i = ref.size(), j = hyp.size();
  while (i > 0 || j > 0) {
    switch (op[i][j]) {
      case Op::match:
        --i;
        --j;
        break;
      case Op::substitute:
        ++counts.substitutions;
        --i;
        --j;
        break;
      case Op::del:
        ++counts.deletions;
        --i;
        break;
      case Op::ins:
        ++counts.insertions;
        --j;
        break;
    }
  }
  return counts;
}

std::vector<bool> align_errors(const std::vector<int>& ref, const std::vector<int>& hyp) {
  std::vector<std::vector<int>> cost;
  std::vector<std::vector<Op>> op;
  levenshtein_table(ref, hyp, cost, op);

  std::vector<bool> errors(ref.size(), false);
  size_t i = ref.size(), j = hyp.size();
  while (i > 0 || j > 0) {
    switch (op[i][j]) {
      case Op::match:
        --i;
        --j;
        break;
      case Op::substitute:
        errors[i - 1] = true;
        --i;
        --j;
        break;
      case Op::del:
        errors[i - 1] = true;
        --i;
        break;
      case Op::ins:
        --j;
        break;
    }
  }
  return errors;
}

std::vector<SegmentDecode> decode_corpus(const ModelParams<float>& params,
                                         const std::vector<UtteranceRecord>& records,
                                         int beam_width, TrainMode mode, int threads) {
  std::vector<std::vector<SegmentDecode>> per_record(records.size());
  const int n_workers =
      std::max(1, std::min(threads > 0 ? threads
                                       : static_cast<int>(std::thread::hardware_concurrency()),
                           static_cast<int>(records.size())));
  auto work = [&](int i) {
    if (records[i].n_labeled() > 0) {
      per_record[i] = decode_utterance(params, records[i], beam_width, mode);
    }
  };
  if (n_workers <= 1) {
    for (size_t i = 0; i < records.size(); ++i) work(static_cast<int>(i));
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        for (size_t i = w; i < records.size(); i += n_workers) work(static_cast<int>(i));
      });
    }
    for (auto& t : pool) t.join();
  }
  std::vector<SegmentDecode> flat;
  for (auto& batch : per_record) {
    for (auto& d : batch) flat.push_back(std::move(d));
  }
  return flat;
}

namespace {

struct PooledEdits {
  int64_t edits = 0;
  int64_t ref_tokens = 0;
  double rate() const {
    if (ref_tokens == 0) return edits > 0 ? 1.0 : 0.0;
    return static_cast<double>(edits) / static_cast<double>(ref_tokens);
  }
};

PooledEdits pool_edits(const std::vector<UtteranceRecord>& records,
                       const std::vector<SegmentDecode>& results) {
  std::map<std::pair<std::string, int>, const std::vector<int>*> refs;
  for (const auto& r : records) {
    for (int i = 0; i < static_cast<int>(r.segments.size()); ++i) {
      if (r.segments[i].transcribed()) refs[{r.id, i}] = &*r.segments[i].labels;
    }
  }
  PooledEdits pooled;
  for (const auto& d : results) {
    auto it = refs.find({d.utt_id, d.segment_index});
    if (it == refs.end()) continue;
    const auto counts = edit_distance(*it->second, d.labels);
    pooled.edits += counts.total();
    pooled.ref_tokens += static_cast<int64_t>(it->second->size());
  }
  return pooled;
}

}  // namespace

double token_error_rate(const std::vector<UtteranceRecord>& records,
                        const std::vector<SegmentDecode>& results) {
  return pool_edits(records, results).rate();
}

EvalReport compare_systems(const std::vector<UtteranceRecord>& records,
                           const std::vector<SegmentDecode>& base_results,
                           const std::vector<SegmentDecode>& new_results) {
  EvalReport report;
  const PooledEdits base_overall = pool_edits(records, base_results);
  const PooledEdits new_overall = pool_edits(records, new_results);
  report.base_overall_error = base_overall.rate();
  const double norm = report.base_overall_error > 0.0 ? report.base_overall_error : 1.0;

  auto make_row = [&](const std::string& name, const std::vector<UtteranceRecord>& subset) {
    ConditionRow row;
    row.condition = name;
    row.n_utterances = static_cast<int>(subset.size());
    const PooledEdits b = pool_edits(subset, base_results);
    const PooledEdits n = pool_edits(subset, new_results);
    row.n_ref_tokens = b.ref_tokens;
    row.err_base = b.rate();
    row.err_new = n.rate();
    row.nwer_base = row.err_base / norm;
    row.nwer_new = row.err_new / norm;
    row.werr = row.err_base > 0.0 ? (row.err_base - row.err_new) / row.err_base : 0.0;
    return row;
  };

  report.overall = make_row("overall", records);
  for (const auto& [condition, subset] : split_eval_conditions(records)) {
    report.rows.push_back(make_row(condition, subset));
  }
  return report;
}

void print_eval_report(std::ostream& out, const EvalReport& report) {
  out << std::left << std::setw(20) << "condition" << std::right << std::setw(8) << "utts"
      << std::setw(10) << "ref_tok" << std::setw(12) << "nWER_base" << std::setw(12)
      << "nWER_new" << std::setw(10) << "WERR%" << "\n";
  auto line = [&](const ConditionRow& row) {
    out << std::left << std::setw(20) << row.condition << std::right << std::setw(8)
        << row.n_utterances << std::setw(10) << row.n_ref_tokens << std::setw(12) << std::fixed
        << std::setprecision(3) << row.nwer_base << std::setw(12) << row.nwer_new
        << std::setw(10) << std::setprecision(1) << 100.0 * row.werr << "\n";
  };
  line(report.overall);
  for (const auto& row : report.rows) line(row);
  out << "# scoring unit: " << report.unit << "\n";
  auto machine = [&](const ConditionRow& row) {
    out << "row condition=" << row.condition << " n_utts=" << row.n_utterances
        << " n_ref=" << row.n_ref_tokens << " err_base=" << std::setprecision(6) << row.err_base
        << " err_new=" << row.err_new << " nwer_base=" << row.nwer_base
        << " nwer_new=" << row.nwer_new << " werr=" << row.werr << "\n";
  };
  machine(report.overall);
  for (const auto& row : report.rows) machine(row);
}

}  // namespace segstream
