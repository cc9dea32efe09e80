#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "avwnet/data_io.hpp"

namespace avwnet {

namespace {

cv::Mat decode(const fs::path& path, int flags) {
  if (!fs::exists(path)) throw DataError("missing file " + path.string());
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) throw DataError("cannot decode " + path.string());
  return m;
}

void encode(const fs::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<int> params;
  const auto ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") params = {cv::IMWRITE_PNG_COMPRESSION, 6};
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m, params);
  } catch (const cv::Exception& e) {
    throw DataError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw DataError("cannot write " + path.string());
}

}  // namespace

RgbImage read_rgb(const fs::path& path) {
  const cv::Mat m = decode(path, cv::IMREAD_COLOR);
  RgbImage out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const auto* row = m.ptr<cv::Vec3b>(r);
    for (int c = 0; c < m.cols; ++c) out(r, c) = {row[c][2], row[c][1], row[c][0]};
  }
  return out;
}

void write_rgb(const fs::path& path, const RgbImage& image) {
  cv::Mat m(image.rows(), image.cols(), CV_8UC3);
  for (int r = 0; r < image.rows(); ++r) {
    auto* row = m.ptr<cv::Vec3b>(r);
    for (int c = 0; c < image.cols(); ++c) {
      const Rgb& p = image(r, c);
      row[c] = cv::Vec3b(p[2], p[1], p[0]);
    }
  }
  encode(path, m);
}

Mask read_mask(const fs::path& path) {
  const cv::Mat m = decode(path, cv::IMREAD_GRAYSCALE);
  Mask out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const auto* row = m.ptr<std::uint8_t>(r);
    for (int c = 0; c < m.cols; ++c) out(r, c) = row[c] ? 1 : 0;
  }
  return out;
}

void write_mask(const fs::path& path, const Mask& mask) {
  cv::Mat m(mask.rows(), mask.cols(), CV_8UC1);
  for (int r = 0; r < mask.rows(); ++r) {
    auto* row = m.ptr<std::uint8_t>(r);
    for (int c = 0; c < mask.cols(); ++c) row[c] = mask(r, c) ? 255 : 0;
  }
  encode(path, m);
}

ProbabilityMap read_probability(const fs::path& path) {
  const cv::Mat m = decode(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  ProbabilityMap out(m.rows, m.cols);
  if (m.depth() == CV_16U) {
    for (int r = 0; r < m.rows; ++r) {
      const auto* row = m.ptr<std::uint16_t>(r);
      for (int c = 0; c < m.cols; ++c) out(r, c) = row[c] / 65535.0;
    }
  } else if (m.depth() == CV_8U) {
    for (int r = 0; r < m.rows; ++r) {
      const auto* row = m.ptr<std::uint8_t>(r);
      for (int c = 0; c < m.cols; ++c) out(r, c) = row[c] / 255.0;
    }
  } else {
    throw DataError("unsupported probability map depth in " + path.string());
  }
  return out;
}

void write_probability(const fs::path& path, const ProbabilityMap& map) {
  cv::Mat m(map.rows(), map.cols(), CV_16UC1);
  for (int r = 0; r < map.rows(); ++r) {
    auto* row = m.ptr<std::uint16_t>(r);
    for (int c = 0; c < map.cols(); ++c) {
      const double p = map(r, c);
      if (!(p >= 0.0 && p <= 1.0)) {
        throw NumericError("probability " + std::to_string(p) + " at (" + std::to_string(r) +
                           "," + std::to_string(c) + ") outside [0,1]");
      }
      row[c] = static_cast<std::uint16_t>(std::lround(p * 65535.0));
    }
  }
  encode(path, m);
}

}  // namespace avwnet
