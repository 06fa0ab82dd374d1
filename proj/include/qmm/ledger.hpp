#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace qmm {

/// Constant factors hidden behind the O(.) / Theta(.) of the cost and
/// schedule formulas. All default to 1.
struct CostConstants {
  double c_topk = 1.0;    // top-K maximum finding
  double c_amp = 1.0;     // amplitude-amplification rounds per sample
  double c_iters = 1.0;   // inner SGD iteration budget
  double c_domain = 1.0;  // initial epoch domain D_1
  double c_delta = 1.0;   // outer-loop BROO accuracy
};

/// Phase labels used to attribute charges. Totals per phase always sum to
/// `quantum_charged()`.
enum class Phase : std::size_t {
  unattributed = 0,
  evaluation,
  sampling,
  gradient_estimation,
  tracking,
  count_
};

constexpr std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::unattributed: return "unattributed";
    case Phase::evaluation: return "evaluation";
    case Phase::sampling: return "sampling";
    case Phase::gradient_estimation: return "gradient_estimation";
    case Phase::tracking: return "tracking";
    default: return "?";
  }
}

/// Running oracle-query accounting for one experiment.
///
/// Every value or gradient query is one emulated call to the evaluation
/// oracle and adds 1 to `quantum_charged`. Emulated subroutines (top-K
/// finding, amplitude amplification) add their formula cost through
/// `record_emulated`. Counters never decrease. A ledger is owned by a single
/// experiment thread.
class QueryLedger {
 public:
  QueryLedger() = default;
  explicit QueryLedger(CostConstants constants) : constants_(constants) {}

  void record_value(std::uint64_t n = 1) {
    value_queries_ += n;
    add_total(n);
  }
  void record_gradient(std::uint64_t n = 1) {
    gradient_queries_ += n;
    add_total(n);
  }
  void record_emulated(std::uint64_t n) {
    emulated_queries_ += n;
    add_total(n);
  }
  void record_out_of_domain() { out_of_domain_ += 1; }

  std::uint64_t value_queries() const { return value_queries_; }
  std::uint64_t gradient_queries() const { return gradient_queries_; }
  std::uint64_t emulated_queries() const { return emulated_queries_; }
  std::uint64_t quantum_charged() const { return quantum_charged_; }
  std::uint64_t out_of_domain() const { return out_of_domain_; }
  std::uint64_t phase_total(Phase p) const {
    return phases_[static_cast<std::size_t>(p)];
  }

  const CostConstants& constants() const { return constants_; }
  CostConstants& constants() { return constants_; }

  Phase phase() const { return phase_; }
  void set_phase(Phase p) { phase_ = p; }

 private:
  void add_total(std::uint64_t n) {
    quantum_charged_ += n;
    phases_[static_cast<std::size_t>(phase_)] += n;
  }

  CostConstants constants_{};
  std::uint64_t value_queries_ = 0;
  std::uint64_t gradient_queries_ = 0;
  std::uint64_t emulated_queries_ = 0;
  std::uint64_t quantum_charged_ = 0;
  std::uint64_t out_of_domain_ = 0;
  std::array<std::uint64_t, static_cast<std::size_t>(Phase::count_)> phases_{};
  Phase phase_ = Phase::unattributed;
};

/// Attributes charges to `p` for the lifetime of the guard.
class PhaseScope {
 public:
  PhaseScope(QueryLedger& ledger, Phase p) : ledger_(ledger), saved_(ledger.phase()) {
    ledger_.set_phase(p);
  }
  ~PhaseScope() { ledger_.set_phase(saved_); }
  PhaseScope(const PhaseScope&) = delete;
  PhaseScope& operator=(const PhaseScope&) = delete;

 private:
  QueryLedger& ledger_;
  Phase saved_;
};

}  // namespace qmm
