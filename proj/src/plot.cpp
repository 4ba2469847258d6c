/*
 * Copyright 2026 SLLEN Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sllen/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "sllen/common.hpp"

namespace sllen {

namespace {

const cv::Scalar kPalette[] = {
    {180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214}, {189, 103, 148}, {75, 86, 140},
};

std::string short_num(double v) {
  std::ostringstream os;
  if (std::fabs(v) >= 100)
    os.precision(0), os << std::fixed << v;
  else if (std::fabs(v) >= 1)
    os.precision(2), os << std::fixed << v;
  else
    os.precision(3), os << std::fixed << v;
  return os.str();
}

}  // namespace

void save_bar_plot(const std::string& path, const std::string& title,
                   const std::vector<std::string>& groups, const std::vector<std::string>& series,
                   const std::vector<std::vector<double>>& values) {
  if (groups.empty() || series.empty()) raise(Err::InvalidParam, "nothing to plot");
  if (values.size() != groups.size())
    raise(Err::LengthMismatch, "values rows must match groups");
  for (const auto& row : values)
    if (row.size() != series.size()) raise(Err::LengthMismatch, "values cols must match series");

  int ng = static_cast<int>(groups.size());
  int ns = static_cast<int>(series.size());

  const int bar_w = 30, bar_gap = 4, group_gap = 42;
  const int margin_l = 50, margin_r = 30, margin_top = 64, margin_bottom = 54;
  const int plot_h = 300;
  int group_w = ns * (bar_w + bar_gap) + group_gap;
  int width = margin_l + ng * group_w + margin_r;
  int height = margin_top + plot_h + margin_bottom;

  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));

  // Per-series peak, so every metric is visible regardless of its scale.
  std::vector<double> peak(static_cast<size_t>(ns), 0.0);
  for (int g = 0; g < ng; ++g)
    for (int s = 0; s < ns; ++s)
      peak[static_cast<size_t>(s)] =
          std::max(peak[static_cast<size_t>(s)],
                   std::fabs(values[static_cast<size_t>(g)][static_cast<size_t>(s)]));
  for (double& p : peak)
    if (p <= 0) p = 1.0;

  cv::putText(img, title, {margin_l, 28}, cv::FONT_HERSHEY_SIMPLEX, 0.6, {30, 30, 30}, 1,
              cv::LINE_AA);

  // Legend row under the title.
  int lx = margin_l;
  for (int s = 0; s < ns; ++s) {
    cv::Scalar color = kPalette[static_cast<size_t>(s) % std::size(kPalette)];
    cv::rectangle(img, {lx, 40, 12, 12}, color, cv::FILLED);
    cv::putText(img, series[static_cast<size_t>(s)], {lx + 16, 51}, cv::FONT_HERSHEY_SIMPLEX, 0.42,
                {30, 30, 30}, 1, cv::LINE_AA);
    lx += 16 + 14 * static_cast<int>(series[static_cast<size_t>(s)].size()) + 18;
  }

  int base_y = margin_top + plot_h;
  cv::line(img, {margin_l - 8, base_y}, {width - margin_r, base_y}, {60, 60, 60}, 1, cv::LINE_AA);

  for (int g = 0; g < ng; ++g) {
    int gx = margin_l + g * group_w;
    for (int s = 0; s < ns; ++s) {
      double v = values[static_cast<size_t>(g)][static_cast<size_t>(s)];
      int h = static_cast<int>(std::lround(std::fabs(v) / peak[static_cast<size_t>(s)] * plot_h));
      h = std::max(h, 1);
      int x0 = gx + s * (bar_w + bar_gap);
      cv::Scalar color = kPalette[static_cast<size_t>(s) % std::size(kPalette)];
      cv::rectangle(img, {x0, base_y - h, bar_w, h}, color, cv::FILLED);
      cv::putText(img, short_num(v), {x0 - 2, base_y - h - 4}, cv::FONT_HERSHEY_SIMPLEX, 0.33,
                  {30, 30, 30}, 1, cv::LINE_AA);
    }
    cv::putText(img, groups[static_cast<size_t>(g)], {gx, base_y + 20}, cv::FONT_HERSHEY_SIMPLEX,
                0.45, {30, 30, 30}, 1, cv::LINE_AA);
  }

  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::string tmp = path + ".tmp.png";
  if (!cv::imwrite(tmp, img)) raise(Err::IoError, "failed to encode " + path);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) raise(Err::IoError, "failed to move " + tmp + " to " + path);
}

}  // namespace sllen
