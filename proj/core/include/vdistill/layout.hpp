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

// Layout-preserving text assembly from OCR recognition records.
//
// Pipeline: drop boxes with confidence <= threshold, group the rest into
// lines by vertical overlap, order lines top to bottom and boxes left to
// right, then emit text where spaces and blank lines stand in for the
// horizontal and vertical gaps on the page.
//
// Rules:
//  - Two boxes share a line when their vertical overlap is at least half the
//    smaller box height. Lines are the connected components of that relation.
//  - Lines are sorted by the mean y0 of their boxes; boxes in a line by x0,
//    then y0, then input order.
//  - char_width = median of width / max(1, codepoints); line_height = median
//    box height (medians over all retained boxes).
//  - Between boxes in a line: max(1, round(gap_x / char_width)) spaces.
//  - Between lines: 1 + clamp(floor(gap_y / line_height), 0, 3) newlines.
//  - Output ends with exactly one newline.
//
// No column detection is attempted: a multi-column page interleaves its
// columns line by line.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vdistill {

/// Axis-aligned text region; y grows downward.
struct OcrBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
  std::string text;
  double confidence = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
};

struct OcrPage {
  std::string page_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<OcrBox> boxes;

  /// Throws kData on degenerate boxes, confidences outside [0, 1], or boxes
  /// outside the page by more than 1 px.
  void validate() const;
};

using OcrLine = std::vector<OcrBox>;

inline constexpr double kDefaultConfidenceThreshold = 0.6;

/// Keeps boxes with confidence strictly greater than threshold, in order.
std::vector<OcrBox> filter_confidence(std::span<const OcrBox> boxes,
                                      double threshold = kDefaultConfidenceThreshold);

std::vector<OcrLine> order_boxes(std::span<const OcrBox> boxes);

std::string assemble_layout(std::span<const OcrLine> lines, const OcrPage& page);

/// filter_confidence -> order_boxes -> assemble_layout.
std::string assemble_page(const OcrPage& page,
                          double threshold = kDefaultConfidenceThreshold);

/// Number of UTF-8 code points in text.
std::size_t codepoint_count(std::string_view text);

/// One page per line: {"page_id", "width", "height",
///   "boxes": [{"bbox": [x0, y0, x1, y1], "text", "conf"}]}.
/// A bbox given as four [x, y] corner points is reduced to its bounding
/// rectangle.
OcrPage parse_ocr_page(const std::string& line, const std::string& where);
std::vector<OcrPage> read_ocr_jsonl(const std::filesystem::path& path);
std::string ocr_page_to_json(const OcrPage& page);
void write_ocr_jsonl(const std::filesystem::path& path, const std::vector<OcrPage>& pages);

}  // namespace vdistill
