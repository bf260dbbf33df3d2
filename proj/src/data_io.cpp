#include "aan/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "aan/rng.hpp"

namespace aan {

std::vector<int> Dataset::sample_shape() const {
  std::vector<int> s(samples.shape.begin() + 1, samples.shape.end());
  return s;
}

Tensor Dataset::gather(const std::vector<std::int64_t>& indices) const {
  const std::int64_t per = samples.numel() / size();
  std::vector<int> shape = samples.shape;
  shape[0] = static_cast<int>(indices.size());
  Tensor out(shape);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::int64_t i = indices[r];
    if (i < 0 || i >= size()) throw std::out_of_range("Dataset::gather: index " + std::to_string(i));
    std::memcpy(out.data.data() + static_cast<std::int64_t>(r) * per, samples.data.data() + i * per,
                static_cast<std::size_t>(per) * sizeof(double));
  }
  return out;
}

// ---------------------------------------------------------------------------
// IDX
// ---------------------------------------------------------------------------

namespace {

std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t offset, const std::string& path) {
  if (offset + 4 > b.size()) {
    throw std::runtime_error(path + ": truncated at byte " + std::to_string(b.size()) + ", needed " +
                             std::to_string(offset + 4));
  }
  return (static_cast<std::uint32_t>(b[offset]) << 24) | (static_cast<std::uint32_t>(b[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(b[offset + 2]) << 8) | static_cast<std::uint32_t>(b[offset + 3]);
}

}  // namespace

Dataset load_mnist_idx(const std::string& image_path, const std::string& label_path) {
  const auto img = read_file_bytes(image_path);
  const auto lab = read_file_bytes(label_path);

  const std::uint32_t img_magic = read_be32(img, 0, image_path);
  if (img_magic != 0x00000803u) {
    std::ostringstream os;
    os << image_path << ": bad image magic 0x" << std::hex << img_magic << " at byte 0 (expected 0x803)";
    throw std::runtime_error(os.str());
  }
  const std::uint32_t n = read_be32(img, 4, image_path);
  const std::uint32_t rows = read_be32(img, 8, image_path);
  const std::uint32_t cols = read_be32(img, 12, image_path);
  const std::size_t want = 16 + static_cast<std::size_t>(n) * rows * cols;
  if (img.size() < want) {
    throw std::runtime_error(image_path + ": truncated at byte " + std::to_string(img.size()) + ", header promises " +
                             std::to_string(want) + " bytes");
  }

  const std::uint32_t lab_magic = read_be32(lab, 0, label_path);
  if (lab_magic != 0x00000801u) {
    std::ostringstream os;
    os << label_path << ": bad label magic 0x" << std::hex << lab_magic << " at byte 0 (expected 0x801)";
    throw std::runtime_error(os.str());
  }
  const std::uint32_t n_lab = read_be32(lab, 4, label_path);
  if (n_lab != n) {
    throw std::runtime_error("image/label count mismatch: " + std::to_string(n) + " images in " + image_path +
                             " vs " + std::to_string(n_lab) + " labels in " + label_path);
  }
  if (lab.size() < 8 + static_cast<std::size_t>(n)) {
    throw std::runtime_error(label_path + ": truncated at byte " + std::to_string(lab.size()) +
                             ", header promises " + std::to_string(8 + n) + " bytes");
  }

  Dataset d;
  d.kind = DatasetKind::mnist;
  d.samples = Tensor({static_cast<int>(n), 1, static_cast<int>(rows), static_cast<int>(cols)});
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * rows * cols; ++i) {
    d.samples.data[i] = 2.0 * static_cast<double>(img[16 + i]) / 255.0 - 1.0;
  }
  d.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) d.labels[i] = static_cast<int>(lab[8 + i]);
  return d;
}

// ---------------------------------------------------------------------------
// toy 2-D ring mixture
// ---------------------------------------------------------------------------

std::vector<std::pair<double, double>> toy2d_centers(int centers, double radius) {
  if (centers < 1) throw std::invalid_argument("toy2d_centers: need at least one center");
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(centers));
  for (int k = 0; k < centers; ++k) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(centers);
    out.emplace_back(radius * std::cos(a), radius * std::sin(a));
  }
  return out;
}

Dataset make_toy2d(int n, int centers, double radius, double noise_std, std::uint64_t seed) {
  if (n < centers) throw std::invalid_argument("make_toy2d: n must be >= centers");
  if (radius <= 0.0 || radius > 1.0) throw std::invalid_argument("make_toy2d: radius must be in (0, 1]");
  auto cs = toy2d_centers(centers, radius);
  Rng rng = Rng::stream(seed, "toy2d");
  Dataset d;
  d.kind = DatasetKind::toy2d;
  d.samples = Tensor({n, 2});
  d.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int k = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(centers)));
    const double x = cs[static_cast<std::size_t>(k)].first + rng.normal(0.0, noise_std);
    const double y = cs[static_cast<std::size_t>(k)].second + rng.normal(0.0, noise_std);
    d.samples[2 * i] = std::clamp(x, -1.0, 1.0);
    d.samples[2 * i + 1] = std::clamp(y, -1.0, 1.0);
    d.labels[static_cast<std::size_t>(i)] = k;
  }
  return d;
}

std::pair<Dataset, Dataset> split_train_heldout(const Dataset& d, double heldout_frac) {
  if (heldout_frac <= 0.0 || heldout_frac >= 1.0) {
    throw std::invalid_argument("split_train_heldout: fraction must be in (0, 1)");
  }
  const int n = d.size();
  const int held = std::max(1, static_cast<int>(std::floor(n * heldout_frac)));
  const int train_n = n - held;
  if (train_n < 1) throw std::invalid_argument("split_train_heldout: no training samples left");
  std::vector<std::int64_t> ti(static_cast<std::size_t>(train_n)), hi(static_cast<std::size_t>(held));
  for (int i = 0; i < train_n; ++i) ti[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < held; ++i) hi[static_cast<std::size_t>(i)] = train_n + i;
  Dataset train, heldout;
  train.kind = heldout.kind = d.kind;
  train.split = DatasetSplit::train;
  heldout.split = DatasetSplit::heldout;
  train.samples = d.gather(ti);
  heldout.samples = d.gather(hi);
  for (auto i : ti) train.labels.push_back(d.labels.empty() ? 0 : d.labels[static_cast<std::size_t>(i)]);
  for (auto i : hi) heldout.labels.push_back(d.labels.empty() ? 0 : d.labels[static_cast<std::size_t>(i)]);
  return {std::move(train), std::move(heldout)};
}

// ---------------------------------------------------------------------------
// PGM grid
// ---------------------------------------------------------------------------

void write_image_grid(const Tensor& samples, int rows, int cols, const std::string& path) {
  if (samples.ndim() != 4 || samples.dim(1) != 1) {
    throw std::invalid_argument("write_image_grid: expected [N, 1, H, W] samples, got " + samples.shape_str());
  }
  const int n = samples.dim(0);
  if (rows < 1 || cols < 1 || static_cast<std::int64_t>(rows) * cols < n) {
    throw std::invalid_argument("write_image_grid: grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                                " cannot hold " + std::to_string(n) + " samples");
  }
  const int h = samples.dim(2);
  const int w = samples.dim(3);
  const int gap = 2;
  const int gh = rows * h + (rows - 1) * gap;
  const int gw = cols * w + (cols - 1) * gap;
  std::vector<unsigned char> pix(static_cast<std::size_t>(gh) * gw, 128);  // separators mid-gray
  for (int s = 0; s < n; ++s) {
    const int r = s / cols;
    const int c = s % cols;
    const int oy = r * (h + gap);
    const int ox = c * (w + gap);
    const double* src = samples.data.data() + static_cast<std::int64_t>(s) * h * w;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = std::clamp((src[static_cast<std::int64_t>(y) * w + x] + 1.0) / 2.0, 0.0, 1.0);
        pix[static_cast<std::size_t>(oy + y) * gw + (ox + x)] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_image_grid: cannot open " + path);
  out << "P5\n" << gw << " " << gh << "\n255\n";
  out.write(reinterpret_cast<const char*>(pix.data()), static_cast<std::streamsize>(pix.size()));
  if (!out) throw std::runtime_error("write_image_grid: write failed for " + path);
}

void write_points_csv(const Tensor& points, const std::string& path) {
  if (points.ndim() != 2 || points.dim(1) != 2) {
    throw std::invalid_argument("write_points_csv: expected [N, 2], got " + points.shape_str());
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_points_csv: cannot open " + path);
  out << "x,y\n";
  char buf[128];
  for (int i = 0; i < points.dim(0); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", points[2 * i], points[2 * i + 1]);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// metrics CSV
// ---------------------------------------------------------------------------

bool StepMetrics::all_finite() const {
  return std::isfinite(e_logd_real) && std::isfinite(e_log1md_fake) && std::isfinite(e_logd_fake) &&
         std::isfinite(ratio) && std::isfinite(d_loss) && std::isfinite(g_loss) &&
         std::isfinite(rbm_recon_error) && std::isfinite(sample_diversity);
}

std::string format_metrics_row(const StepMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                static_cast<long long>(m.step), m.e_logd_real, m.e_log1md_fake, m.e_logd_fake, m.ratio, m.d_loss,
                m.g_loss, m.rbm_recon_error, m.sample_diversity);
  return buf;
}

StepMetrics parse_metrics_row(const std::string& line) {
  StepMetrics m;
  long long step = 0;
  const int got = std::sscanf(line.c_str(), "%lld,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg", &step, &m.e_logd_real,
                              &m.e_log1md_fake, &m.e_logd_fake, &m.ratio, &m.d_loss, &m.g_loss,
                              &m.rbm_recon_error, &m.sample_diversity);
  if (got != 9) throw std::runtime_error("parse_metrics_row: malformed row: " + line);
  m.step = step;
  return m;
}

namespace {

std::mutex& writer_registry_mutex() {
  static std::mutex m;
  return m;
}

std::set<std::string>& writer_registry() {
  static std::set<std::string> live;
  return live;
}

std::string canonical_key(const std::string& path) {
  std::error_code ec;
  auto canon = std::filesystem::weakly_canonical(path, ec);
  return ec ? path : canon.string();
}

}  // namespace

MetricsWriter::MetricsWriter(const std::string& path) : path_(path), registry_key_(canonical_key(path)) {
  {
    std::lock_guard<std::mutex> lock(writer_registry_mutex());
    if (!writer_registry().insert(registry_key_).second) {
      throw std::runtime_error("metrics file already has a live writer: " + path);
    }
  }
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, std::ios::app);
  if (!out_) {
    std::lock_guard<std::mutex> lock(writer_registry_mutex());
    writer_registry().erase(registry_key_);
    throw std::runtime_error("cannot open metrics file " + path);
  }
  if (fresh) out_ << kMetricsHeader << "\n";
}

MetricsWriter::~MetricsWriter() {
  std::lock_guard<std::mutex> lock(writer_registry_mutex());
  writer_registry().erase(registry_key_);
}

void MetricsWriter::append(const StepMetrics& row) {
  out_ << format_metrics_row(row) << "\n";
  out_.flush();
  if (!out_) throw std::runtime_error("metrics write failed for " + path_);
}

std::vector<StepMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty metrics file " + path);
  if (line != kMetricsHeader) throw std::runtime_error("unexpected metrics header in " + path + ": " + line);
  std::vector<StepMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_metrics_row(line));
  }
  return rows;
}

}  // namespace aan
