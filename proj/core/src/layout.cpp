// Copyright 2026 The vdistill Authors.
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

#include "vdistill/layout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json_codec.hpp"
#include "vdistill/error.hpp"

namespace vdistill {
namespace {

using detail::json;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool same_line(const OcrBox& a, const OcrBox& b) {
  const double overlap = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  const double smaller = std::min(a.height(), b.height());
  return overlap >= 0.5 * smaller;
}

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void join(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Strict geometric order of boxes within a line; remaining ties keep input order.
bool box_before(const OcrBox& a, const OcrBox& b) {
  if (a.x0 != b.x0) return a.x0 < b.x0;
  return a.y0 < b.y0;
}

double line_top(const OcrLine& line) {
  double sum = 0.0;
  for (const OcrBox& b : line) sum += b.y0;
  return sum / static_cast<double>(line.size());
}

}  // namespace

void OcrPage::validate() const {
  require(width > 0.0 && height > 0.0, ErrorKind::kData,
          "page " + page_id + ": width and height must be positive");
  constexpr double kTolerance = 1.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const OcrBox& b = boxes[i];
    const std::string where = "page " + page_id + " box " + std::to_string(i);
    require(b.x0 < b.x1 && b.y0 < b.y1, ErrorKind::kData,
            where + ": box needs positive width and height");
    require(b.confidence >= 0.0 && b.confidence <= 1.0, ErrorKind::kData,
            where + ": confidence outside [0, 1]");
    require(b.x0 >= -kTolerance && b.y0 >= -kTolerance && b.x1 <= width + kTolerance &&
                b.y1 <= height + kTolerance,
            ErrorKind::kData, where + ": box lies outside the page");
  }
}

std::vector<OcrBox> filter_confidence(std::span<const OcrBox> boxes, double threshold) {
  std::vector<OcrBox> kept;
  for (const OcrBox& b : boxes) {
    if (b.confidence > threshold) kept.push_back(b);
  }
  return kept;
}

std::vector<OcrLine> order_boxes(std::span<const OcrBox> boxes) {
  const std::size_t n = boxes.size();
  DisjointSet groups(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (same_line(boxes[i], boxes[j])) groups.join(i, j);
    }
  }
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[groups.find(i)].push_back(i);

  std::vector<OcrLine> lines;
  for (auto& idx : members) {
    if (idx.empty()) continue;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return box_before(boxes[a], boxes[b]);
    });
    OcrLine line;
    for (std::size_t i : idx) line.push_back(boxes[i]);
    lines.push_back(std::move(line));
  }
  std::stable_sort(lines.begin(), lines.end(), [](const OcrLine& a, const OcrLine& b) {
    const double ta = line_top(a);
    const double tb = line_top(b);
    if (ta != tb) return ta < tb;
    return box_before(a.front(), b.front());
  });
  return lines;
}

std::size_t codepoint_count(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string assemble_layout(std::span<const OcrLine> lines, const OcrPage& /*page*/) {
  std::vector<double> char_widths;
  std::vector<double> heights;
  for (const OcrLine& line : lines) {
    for (const OcrBox& b : line) {
      const double chars = static_cast<double>(std::max<std::size_t>(1, codepoint_count(b.text)));
      char_widths.push_back(b.width() / chars);
      heights.push_back(b.height());
    }
  }
  if (char_widths.empty()) return {};
  const double char_width = median(char_widths);
  const double line_height = median(heights);

  std::string out;
  double prev_bottom = 0.0;
  bool first_line = true;
  for (const OcrLine& line : lines) {
    if (line.empty()) continue;
    double top = line.front().y0;
    double bottom = line.front().y1;
    for (const OcrBox& b : line) {
      top = std::min(top, b.y0);
      bottom = std::max(bottom, b.y1);
    }
    if (!first_line) {
      const double blank = std::floor((top - prev_bottom) / line_height);
      const int extra = static_cast<int>(std::clamp(blank, 0.0, 3.0));
      out.append(static_cast<std::size_t>(1 + extra), '\n');
    }
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i > 0) {
        const double gap = line[i].x0 - line[i - 1].x1;
        const double spaces = std::max(1.0, std::round(gap / char_width));
        out.append(static_cast<std::size_t>(spaces), ' ');
      }
      out += line[i].text;
    }
    prev_bottom = bottom;
    first_line = false;
  }
  out += '\n';
  return out;
}

std::string assemble_page(const OcrPage& page, double threshold) {
  const auto kept = filter_confidence(page.boxes, threshold);
  const auto lines = order_boxes(kept);
  return assemble_layout(lines, page);
}

OcrPage parse_ocr_page(const std::string& line, const std::string& where) {
  const json obj = detail::parse_json(line, where);
  const std::string w = where + ": ";
  detail::reject_unknown_keys(obj, {"page_id", "width", "height", "boxes"}, where);
  OcrPage page;
  const json& id = detail::field(obj, "page_id", w);
  if (!id.is_string()) fail(ErrorKind::kFormat, w + "page_id: expected a string");
  page.page_id = id.get<std::string>();
  page.width = detail::real(detail::field(obj, "width", w), w + "width");
  page.height = detail::real(detail::field(obj, "height", w), w + "height");
  const json& boxes = detail::field(obj, "boxes", w);
  if (!boxes.is_array()) fail(ErrorKind::kFormat, w + "boxes: expected an array");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const std::string bw = w + "boxes[" + std::to_string(i) + "].";
    const json& b = boxes[i];
    detail::reject_unknown_keys(b, {"bbox", "text", "conf"}, bw);
    OcrBox box;
    const json& bbox = detail::field(b, "bbox", bw);
    if (bbox.is_array() && bbox.size() == 4 && bbox[0].is_array()) {
      // Quadrilateral corners: keep the enclosing axis-aligned rectangle.
      std::vector<double> xs, ys;
      for (const json& pt : bbox) {
        auto xy = detail::real_vector(pt, bw + "bbox");
        if (xy.size() != 2) fail(ErrorKind::kFormat, bw + "bbox: corner needs [x, y]");
        xs.push_back(xy[0]);
        ys.push_back(xy[1]);
      }
      box.x0 = *std::min_element(xs.begin(), xs.end());
      box.x1 = *std::max_element(xs.begin(), xs.end());
      box.y0 = *std::min_element(ys.begin(), ys.end());
      box.y1 = *std::max_element(ys.begin(), ys.end());
    } else {
      auto xy = detail::real_vector(bbox, bw + "bbox");
      if (xy.size() != 4) fail(ErrorKind::kFormat, bw + "bbox: expected [x0, y0, x1, y1]");
      box.x0 = xy[0];
      box.y0 = xy[1];
      box.x1 = xy[2];
      box.y1 = xy[3];
    }
    const json& text = detail::field(b, "text", bw);
    if (!text.is_string()) fail(ErrorKind::kFormat, bw + "text: expected a string");
    box.text = text.get<std::string>();
    box.confidence = detail::real(detail::field(b, "conf", bw), bw + "conf");
    page.boxes.push_back(std::move(box));
  }
  page.validate();
  return page;
}

std::vector<OcrPage> read_ocr_jsonl(const std::filesystem::path& path) {
  std::istringstream in(detail::read_file(path));
  std::vector<OcrPage> pages;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    pages.push_back(parse_ocr_page(line, path.filename().string() + ":" + std::to_string(lineno)));
  }
  return pages;
}

std::string ocr_page_to_json(const OcrPage& page) {
  json boxes = json::array();
  for (const OcrBox& b : page.boxes) {
    boxes.push_back({{"bbox", {b.x0, b.y0, b.x1, b.y1}}, {"text", b.text}, {"conf", b.confidence}});
  }
  json obj = {{"page_id", page.page_id},
              {"width", page.width},
              {"height", page.height},
              {"boxes", std::move(boxes)}};
  return obj.dump();
}

void write_ocr_jsonl(const std::filesystem::path& path, const std::vector<OcrPage>& pages) {
  std::string out;
  for (const OcrPage& p : pages) {
    out += ocr_page_to_json(p);
    out += '\n';
  }
  detail::write_file(path, out);
}

}  // namespace vdistill
