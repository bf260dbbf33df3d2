#pragma once

#include <cstdint>
#include <string>

namespace aan {

// One row of training telemetry; serialized verbatim to the metrics CSV.
struct StepMetrics {
  std::int64_t step = 0;
  double e_logd_real = 0.0;
  double e_log1md_fake = 0.0;
  double e_logd_fake = 0.0;
  double ratio = 0.0;  // e_logd_real / e_logd_fake
  double d_loss = 0.0;
  double g_loss = 0.0;
  double rbm_recon_error = 0.0;
  double sample_diversity = 0.0;

  bool all_finite() const;
};

inline constexpr const char* kMetricsHeader =
    "step,e_logd_real,e_log1md_fake,e_logd_fake,ratio,d_loss,g_loss,rbm_recon_error,sample_diversity";

std::string format_metrics_row(const StepMetrics& m);     // 17 significant digits
StepMetrics parse_metrics_row(const std::string& line);

}  // namespace aan
