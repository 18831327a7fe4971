/*
 * Copyright 2026 The FundusNet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "fnet/errors.hpp"
#include "fnet/image.hpp"
#include "test_util.hpp"

using namespace fnet;
using fnet::test_util::TempDir;

namespace {

// Smooth test pattern so OpenCV's fixed-point interpolation stays close.
Tensor pattern(std::size_t h, std::size_t w, std::size_t c) {
  Tensor t(Shape{h, w, c});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t ch = 0; ch < c; ++ch) {
        t.at({i, j, ch}) = 0.5 + 0.4 * std::sin(0.21 * static_cast<double>(i) + 0.5 * static_cast<double>(ch)) *
                                     std::cos(0.17 * static_cast<double>(j));
      }
  return t;
}

cv::Mat to_mat(const Tensor& t) {
  const int h = static_cast<int>(t.shape()[0]), w = static_cast<int>(t.shape()[1]), c = static_cast<int>(t.shape()[2]);
  cv::Mat m(h, w, CV_64FC(c));
  std::copy(t.values().begin(), t.values().end(), m.ptr<double>(0));
  return m;
}

double max_diff(const Tensor& t, const cv::Mat& m) {
  cv::Mat cont = m.isContinuous() ? m : m.clone();
  const double* p = cont.ptr<double>(0);
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(t[i] - p[i]));
  return worst;
}

}  // namespace

TEST(GeometryTest, ParsesAndPrints) {
  const ImageGeometry g = ImageGeometry::parse("224x200x3");
  EXPECT_EQ(g.height, 224u);
  EXPECT_EQ(g.width, 200u);
  EXPECT_EQ(g.channels, 3u);
  EXPECT_EQ(g.to_string(), "224x200x3");
  EXPECT_THROW(ImageGeometry::parse("224x224"), ParseError);
  EXPECT_THROW(ImageGeometry::parse("0x4x3"), ParseError);
  EXPECT_THROW(ImageGeometry::parse("4x4x2"), ParseError);
}

TEST(ResizeTest, MatchesOpenCvLinear) {
  const Tensor img = pattern(37, 29, 3);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{16, 16}, {50, 41}, {37, 10}}) {
    cv::Mat ref;
    cv::resize(to_mat(img), ref, cv::Size(static_cast<int>(w), static_cast<int>(h)), 0, 0, cv::INTER_LINEAR);
    EXPECT_LE(max_diff(resize_bilinear(img, h, w), ref), 0.02) << h << "x" << w;
  }
}

TEST(ResizeTest, IdentityAndConstant) {
  const Tensor img = pattern(8, 9, 1);
  EXPECT_EQ(resize_bilinear(img, 8, 9), img);
  const Tensor flat = resize_bilinear(Tensor(Shape{5, 7, 3}, 0.3), 11, 2);
  for (double v : flat.values()) EXPECT_NEAR(v, 0.3, 1e-15);
  EXPECT_THROW(resize_bilinear(img, 0, 3), ShapeError);
}

TEST(RotateTest, MatchesOpenCvWarpAffine) {
  const Tensor img = pattern(33, 33, 3);
  for (double deg : {30.0, -30.0, 12.5}) {
    const cv::Point2f center(16.0f, 16.0f);
    cv::Mat ref;
    cv::warpAffine(to_mat(img), ref, cv::getRotationMatrix2D(center, deg, 1.0), cv::Size(33, 33), cv::INTER_LINEAR,
                   cv::BORDER_CONSTANT, cv::Scalar::all(0));
    EXPECT_LE(max_diff(rotate_bilinear(img, deg), ref), 0.02) << deg;
  }
}

TEST(RotateTest, QuarterTurnIsCounterClockwise) {
  Tensor img(Shape{5, 5, 1});
  img.at({0, 4, 0}) = 1.0;  // top-right corner
  const Tensor r = rotate_bilinear(img, 90.0);
  EXPECT_NEAR(r.at({0, 0, 0}), 1.0, 1e-9);  // lands top-left
  double total = 0.0;
  for (double v : r.values()) total += v;
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(RotateTest, CornersFillBlackAndZeroIsIdentity) {
  const Tensor img(Shape{21, 21, 3}, 1.0);
  const Tensor r = rotate_bilinear(img, 30.0);
  EXPECT_EQ(r.at({0, 0, 0}), 0.0);
  EXPECT_NEAR(r.at({10, 10, 1}), 1.0, 1e-12);
  EXPECT_EQ(rotate_bilinear(img, 0.0), img);
}

TEST(ChannelsTest, GreyAndColour) {
  const Tensor rgb = Tensor::from_values(Shape{1, 1, 3}, {0.3, 0.6, 0.9});
  EXPECT_NEAR(convert_channels(rgb, 1)[0], 0.6, 1e-15);
  const Tensor grey = Tensor::from_values(Shape{1, 1, 1}, {0.25});
  EXPECT_EQ(convert_channels(grey, 3).flatten(), (std::vector<double>{0.25, 0.25, 0.25}));
  EXPECT_THROW(convert_channels(rgb, 2), ShapeError);
}

TEST(CodecTest, PngRoundTripWithinQuantisation) {
  TempDir dir("png");
  const Tensor img = pattern(12, 10, 3);
  write_image(dir / "a.png", img);
  const Tensor back = decode_image(dir / "a.png");
  ASSERT_EQ(back.shape(), img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back[i], img[i], 0.5 / 255.0 + 1e-12);
}

TEST(CodecTest, ChannelOrderIsRgb) {
  TempDir dir("rgb");
  write_image(dir / "red.png", Tensor::from_values(Shape{1, 1, 3}, {1.0, 0.0, 0.0}));
  EXPECT_EQ(decode_image(dir / "red.png").flatten(), (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(CodecTest, FailuresAreIoErrors) {
  TempDir dir("bad");
  EXPECT_THROW(decode_image(dir / "missing.png"), IoError);
  std::ofstream(dir / "junk.png") << "not an image";
  EXPECT_THROW(decode_image(dir / "junk.png"), IoError);
}

TEST(PrepareTest, ResizesAndConverts) {
  const Tensor out = prepare_image(pattern(40, 30, 3), ImageGeometry{16, 16, 1});
  EXPECT_EQ(out.shape(), (Shape{16, 16, 1}));
}
