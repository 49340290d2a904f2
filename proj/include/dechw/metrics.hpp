#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "dechw/errors.hpp"

namespace dechw {

struct RoundMetrics {
  int round = 0;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  double mean_train_loss = 0.0;
  double mean_hess_norm = 0.0;
  long long scalars_sent_cum = 0;
  double fallback_frac = 0.0;
};

inline const char* metrics_csv_header() {
  return "round,mean_acc,std_acc,mean_train_loss,mean_hess_norm,scalars_sent_cum,fallback_frac";
}

// Fixed 6-decimal float formatting keeps byte-identical output across runs.
inline std::string format_metrics_row(const RoundMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%lld,%.6f", m.round, m.mean_acc,
                m.std_acc, m.mean_train_loss, m.mean_hess_norm, m.scalars_sent_cum,
                m.fallback_frac);
  return buf;
}

class MetricsCsvWriter {
 public:
  MetricsCsvWriter() = default;
  explicit MetricsCsvWriter(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot open metrics file " + path);
    out_ << metrics_csv_header() << "\n";
    out_.flush();
  }

  void write(const RoundMetrics& m) {
    if (!out_.is_open()) return;
    out_ << format_metrics_row(m) << "\n";
    out_.flush();
    if (!out_) throw IoError("metrics write failed");
  }

 private:
  std::ofstream out_;
};

// Round index never reaching a threshold.
inline constexpr int kNeverReached = -1;

// First (1-based) round at which mean accuracy reaches threshold * reference.
// With the default reference of 1.0 thresholds are absolute accuracies;
// passing a reference maximum expresses them as fractions of it.
inline std::vector<int> rounds_to_threshold(const std::vector<RoundMetrics>& metrics,
                                            const std::vector<double>& thresholds,
                                            double reference = 1.0) {
  std::vector<int> out(thresholds.size(), kNeverReached);
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    double target = thresholds[k] * reference;
    for (const auto& m : metrics) {
      if (m.mean_acc >= target) {
        out[k] = m.round;
        break;
      }
    }
  }
  return out;
}

// Mean accuracy over the last `window` evaluated rounds.
inline double final_window_accuracy(const std::vector<RoundMetrics>& metrics, int window) {
  if (metrics.empty()) return 0.0;
  std::size_t n = metrics.size();
  std::size_t k = window < 1 ? 1 : static_cast<std::size_t>(window);
  if (k > n) k = n;
  double acc = 0.0;
  for (std::size_t i = n - k; i < n; ++i) acc += metrics[i].mean_acc;
  return acc / static_cast<double>(k);
}

// Closed-form scalar transmission totals. The per-sender unit counts one
// model-size payload per communication round regardless of neighbor count;
// network totals multiply by the number of directed edges.
struct CommCost {
  long long per_sender = 0;
  long long network = 0;
};

inline CommCost predicted_comm_cost(long long model_size, long long rounds, long long theta,
                                    bool hessian_exchanged, long long directed_edges) {
  long long hess_rounds = hessian_exchanged ? std::min(theta, rounds) : 0;
  CommCost c;
  c.per_sender = model_size * (rounds + hess_rounds);
  c.network = c.per_sender * directed_edges;
  return c;
}

// Normalizes a network-wide counter back to the per-sender unit of the
// closed forms above. Exact integer division by construction.
inline long long per_sender_total(long long network_total, long long directed_edges) {
  if (directed_edges == 0) return 0;
  return network_total / directed_edges;
}

}  // namespace dechw
