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


#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"
#include "vdistill/io.hpp"
#include "vdistill/layout.hpp"
#include "vdistill/synthdata.hpp"

namespace vdistill {
namespace {

using testing::TempDir;
using testing::throws_kind;

const std::filesystem::path kOcrDir = std::filesystem::path(VDISTILL_TEST_DATA_DIR) / "ocr";
const std::vector<std::string> kGoldenPages = {"two_lines_basic", "confidence_boundary",
                                               "staircase", "utf8_widths"};

OcrBox box(double x0, double y0, double x1, double y1, std::string text, double conf = 0.9) {
  return OcrBox{x0, y0, x1, y1, std::move(text), conf};
}

OcrPage page_of(std::vector<OcrBox> boxes) {
  return OcrPage{"p", 1000.0, 1000.0, std::move(boxes)};
}

std::vector<std::string> texts(const std::vector<OcrBox>& boxes) {
  std::vector<std::string> out;
  for (const auto& b : boxes) out.push_back(b.text);
  return out;
}

std::string strip_ws(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\n'; }),
          s.end());
  return s;
}

OcrPage scaled(OcrPage page, double f) {
  page.width *= f;
  page.height *= f;
  for (auto& b : page.boxes) {
    b.x0 *= f;
    b.y0 *= f;
    b.x1 *= f;
    b.y1 *= f;
  }
  return page;
}

TEST(Golden, PagesAssembleToExpectedText) {
  for (const auto& name : kGoldenPages) {
    const auto pages = read_ocr_jsonl(kOcrDir / (name + ".jsonl"));
    ASSERT_EQ(pages.size(), 1u) << name;
    EXPECT_EQ(assemble_page(pages[0]), read_text_file(kOcrDir / (name + ".txt"))) << name;
  }
}

TEST(Golden, InvariantUnderShuffleAndScale) {
  std::mt19937_64 rng(5);
  for (const auto& name : kGoldenPages) {
    const OcrPage page = read_ocr_jsonl(kOcrDir / (name + ".jsonl"))[0];
    const std::string want = assemble_page(page);
    for (int trial = 0; trial < 10; ++trial) {
      OcrPage p = page;
      std::shuffle(p.boxes.begin(), p.boxes.end(), rng);
      EXPECT_EQ(assemble_page(p), want) << name << " shuffle " << trial;
    }
    for (double f : {0.5, 2.0, 3.0, 8.0}) {
      EXPECT_EQ(assemble_page(scaled(page, f)), want) << name << " scale " << f;
    }
  }
}

TEST(Filter, ThresholdIsStrict) {
  const std::vector<OcrBox> boxes = {box(0, 0, 1, 1, "a", 0.59), box(0, 0, 1, 1, "b", 0.60),
                                     box(0, 0, 1, 1, "c", 0.61)};
  EXPECT_EQ(texts(filter_confidence(boxes)), (std::vector<std::string>{"c"}));
}

TEST(Filter, ZeroThresholdKeepsPositiveConfidences) {
  const std::vector<OcrBox> boxes = {box(0, 0, 1, 1, "a", 0.01), box(0, 0, 1, 1, "b", 1.0)};
  EXPECT_EQ(filter_confidence(boxes, 0.0).size(), 2u);
}

TEST(Filter, EmptyInput) {
  EXPECT_TRUE(filter_confidence(std::vector<OcrBox>{}).empty());
}

TEST(Order, SameLineLeftToRight) {
  const std::vector<OcrBox> boxes = {box(100, 10, 150, 30, "right"), box(10, 10, 60, 30, "left")};
  const auto lines = order_boxes(boxes);
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(texts(lines[0]), (std::vector<std::string>{"left", "right"}));
}

TEST(Order, DisjointExtentsTopFirst) {
  const std::vector<OcrBox> boxes = {box(10, 50, 60, 70, "bottom"), box(10, 10, 60, 30, "top")};
  const auto lines = order_boxes(boxes);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0][0].text, "top");
  EXPECT_EQ(lines[1][0].text, "bottom");
}

TEST(Order, OverlapRuleUsesHalfTheSmallerHeight) {
  // Both boxes are 20 px tall: 10 px of overlap groups them, 9 px does not.
  const std::vector<OcrBox> half = {box(0, 0, 10, 20, "a"), box(20, 10, 30, 30, "b")};
  EXPECT_EQ(order_boxes(half).size(), 1u);
  const std::vector<OcrBox> under = {box(0, 0, 10, 20, "a"), box(20, 11, 30, 31, "b")};
  EXPECT_EQ(order_boxes(under).size(), 2u);
}

TEST(Order, StaircaseHandWalk) {
  const OcrPage page = read_ocr_jsonl(kOcrDir / "staircase.jsonl")[0];
  const auto lines = order_boxes(page.boxes);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(texts(lines[0]), (std::vector<std::string>{"aaa", "bbb"}));
  EXPECT_EQ(texts(lines[1]), (std::vector<std::string>{"ccc", "ddd"}));
}

TEST(Assemble, SingleBox) {
  EXPECT_EQ(assemble_page(page_of({box(10, 10, 60, 30, "Total")})), "Total\n");
}

TEST(Assemble, EmptyPageIsEmptyString) {
  EXPECT_EQ(assemble_page(page_of({})), "");
  EXPECT_EQ(assemble_page(page_of({box(10, 10, 60, 30, "x", 0.2)})), "");
}

TEST(Assemble, GapOfThreeCharWidths) {
  // Both boxes are 10 px per character, so a 30 px gap is 3 spaces.
  EXPECT_EQ(assemble_page(page_of({box(0, 0, 20, 10, "ab"), box(50, 0, 70, 10, "cd")})),
            "ab   cd\n");
}

TEST(Assemble, AdjacentBoxesGetOneSpace) {
  EXPECT_EQ(assemble_page(page_of({box(0, 0, 20, 10, "ab"), box(20, 0, 40, 10, "cd")})),
            "ab cd\n");
}

TEST(Assemble, VerticalGapOfTwoAndAHalfLines) {
  EXPECT_EQ(assemble_page(page_of({box(0, 0, 20, 10, "ab"), box(0, 35, 20, 45, "cd")})),
            "ab\n\n\ncd\n");
}

TEST(Assemble, NewlinesAreCappedAtFour) {
  EXPECT_EQ(assemble_page(page_of({box(0, 0, 20, 10, "ab"), box(0, 500, 20, 510, "cd")})),
            "ab\n\n\n\ncd\n");
}

TEST(Assemble, DroppedBoxesContributeNothing) {
  const std::string out = assemble_page(
      page_of({box(0, 0, 20, 10, "keep"), box(30, 0, 50, 10, "DROPPED", 0.6)}));
  EXPECT_EQ(out.find("DROPPED"), std::string::npos);
}

TEST(Assemble, CodepointCount) {
  EXPECT_EQ(codepoint_count("abc"), 3u);
  EXPECT_EQ(codepoint_count("Größe"), 5u);
  EXPECT_EQ(codepoint_count("€"), 1u);
  EXPECT_EQ(codepoint_count(""), 0u);
}

TEST(Properties, SyntheticFixturesMatchConstruction) {
  const auto fixtures = gen_ocr_fixtures(11, 25);
  ASSERT_EQ(fixtures.size(), 25u);
  std::mt19937_64 rng(3);
  for (const auto& f : fixtures) {
    EXPECT_EQ(assemble_page(f.page), f.expected) << f.name;
    OcrPage p = f.page;
    std::shuffle(p.boxes.begin(), p.boxes.end(), rng);
    EXPECT_EQ(assemble_page(p), f.expected) << f.name << " shuffled";
    EXPECT_EQ(assemble_page(scaled(f.page, 4.0)), f.expected) << f.name << " scaled";
  }
}

TEST(Properties, TokensFollowBoxOrder) {
  for (const auto& f : gen_ocr_fixtures(2, 15)) {
    std::string concat;
    for (const auto& line : order_boxes(filter_confidence(f.page.boxes))) {
      for (const auto& b : line) concat += b.text;
    }
    EXPECT_EQ(strip_ws(assemble_page(f.page)), strip_ws(concat)) << f.name;
  }
}

TEST(Parse, QuadrilateralBoxReducesToBoundingRectangle) {
  const OcrPage p = parse_ocr_page(
      R"({"page_id": "q", "width": 100, "height": 100, "boxes": [{"bbox": [[10, 12], [40, 10], [42, 30], [9, 31]], "text": "t", "conf": 0.9}]})",
      "mem:1");
  ASSERT_EQ(p.boxes.size(), 1u);
  EXPECT_EQ(p.boxes[0].x0, 9.0);
  EXPECT_EQ(p.boxes[0].y0, 10.0);
  EXPECT_EQ(p.boxes[0].x1, 42.0);
  EXPECT_EQ(p.boxes[0].y1, 31.0);
}

TEST(Parse, InvalidBoxesAreRejected) {
  EXPECT_TRUE(throws_kind(
      [] {
        parse_ocr_page(
            R"({"page_id": "q", "width": 100, "height": 100, "boxes": [{"bbox": [10, 10, 5, 20], "text": "t", "conf": 0.9}]})",
            "mem:1");
      },
      ErrorKind::kData));
  EXPECT_TRUE(throws_kind(
      [] {
        parse_ocr_page(
            R"({"page_id": "q", "width": 100, "height": 100, "boxes": [{"bbox": [10, 10, 15, 20], "text": "t", "conf": 1.5}]})",
            "mem:1");
      },
      ErrorKind::kData));
  EXPECT_TRUE(throws_kind([] { parse_ocr_page("{not json", "mem:1"); }, ErrorKind::kFormat));
}

TEST(Parse, JsonlRoundTrip) {
  TempDir dir("ocr");
  const auto fixtures = gen_ocr_fixtures(4, 5);
  std::vector<OcrPage> pages;
  for (const auto& f : fixtures) pages.push_back(f.page);
  write_ocr_jsonl(dir / "p.jsonl", pages);
  const auto back = read_ocr_jsonl(dir / "p.jsonl");
  ASSERT_EQ(back.size(), pages.size());
  for (std::size_t i = 0; i < pages.size(); ++i) {
    EXPECT_EQ(assemble_page(back[i]), assemble_page(pages[i]));
    EXPECT_EQ(back[i].boxes.size(), pages[i].boxes.size());
  }
}

}  // namespace
}  // namespace vdistill
