#include "augmix/image_io.hpp"

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "augmix/image.hpp"
#include "test_util.hpp"

namespace {

using augmix::Image;
using augmix::LabeledDataset;
using augmix_test::TempDir;

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& b) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
}

TEST(ImageValidation, CatchesBadShapesAndRanges) {
  Image img = Image::zeros(2, 2, 1);
  EXPECT_NO_THROW(augmix::validate_image(img));
  img.pixels[0] = 1.5;
  EXPECT_THROW(augmix::validate_image(img), std::invalid_argument);
  img.pixels[0] = 0.0;
  img.pixels.pop_back();
  EXPECT_THROW(augmix::validate_image(img), std::invalid_argument);
  EXPECT_THROW(augmix::validate_image(Image::zeros(0, 2, 1)),
               std::invalid_argument);
  EXPECT_FALSE(augmix::image_is_valid(Image::zeros(2, 2, 2)));
}

TEST(LoadImage, FullScalePgmIsAllOnes) {
  TempDir dir("pgm_ones");
  // 2x2 PGM, maxval 255, every byte 255
  write_bytes(dir.path("ones.pgm"),
              {'P', '5', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n', 255,
               255, 255, 255});
  const Image img = augmix::load_image(dir.path("ones.pgm"), 1);
  ASSERT_EQ(img.height, 2);
  ASSERT_EQ(img.width, 2);
  ASSERT_EQ(img.channels, 1);
  for (const double p : img.pixels) EXPECT_DOUBLE_EQ(p, 1.0);
}

TEST(LoadImage, MidGrayScalesByFullScale) {
  TempDir dir("pgm_mid");
  write_bytes(dir.path("mid.pgm"),
              {'P', '5', '\n', '1', ' ', '1', '\n', '2', '5', '5', '\n', 128});
  const Image img = augmix::load_image(dir.path("mid.pgm"), 1);
  EXPECT_DOUBLE_EQ(img.pixels[0], 128.0 / 255.0);
}

TEST(LoadImage, SixteenBitPgmScalesBy65535) {
  TempDir dir("pgm16");
  write_bytes(dir.path("deep.pgm"),
              {'P', '5', '\n', '1', ' ', '1', '\n', '6', '5', '5', '3', '5',
               '\n', 0x80, 0x00});
  const Image img = augmix::load_image(dir.path("deep.pgm"), 1);
  EXPECT_DOUBLE_EQ(img.pixels[0], 32768.0 / 65535.0);
}

TEST(LoadImage, PgmHeaderCommentsAreSkipped) {
  TempDir dir("pgm_comment");
  const std::string header = "P5\n# a comment line\n1 1\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.push_back(42);
  write_bytes(dir.path("c.pgm"), bytes);
  const Image img = augmix::load_image(dir.path("c.pgm"), 1);
  EXPECT_DOUBLE_EQ(img.pixels[0], 42.0 / 255.0);
}

TEST(SaveLoadImage, OnePixelBlackPngRoundTrips) {
  TempDir dir("png_black");
  Image img = Image::zeros(1, 1, 1);
  augmix::save_image(img, dir.path("black.png"));
  const Image back = augmix::load_image(dir.path("black.png"), 1);
  ASSERT_EQ(back.pixels.size(), 1u);
  EXPECT_DOUBLE_EQ(back.pixels[0], 0.0);
}

TEST(SaveLoadImage, HalfRoundsUpTo128) {
  TempDir dir("png_half");
  Image img = Image::filled(1, 1, 1, 0.5);
  augmix::save_image(img, dir.path("half.png"));
  const Image back = augmix::load_image(dir.path("half.png"), 1);
  EXPECT_DOUBLE_EQ(back.pixels[0], 128.0 / 255.0);
}

TEST(SaveLoadImage, QuantizedImagesAreFixedPoints) {
  TempDir dir("roundtrip");
  augmix::PhiloxRng rng(17);
  for (const char* name : {"a.png", "b.pgm"}) {
    const Image img =
        augmix_test::quantized(augmix_test::random_image(rng, 5, 7, 1));
    augmix::save_image(img, dir.path(name));
    const Image back = augmix::load_image(dir.path(name), 1);
    ASSERT_TRUE(back.same_shape(img)) << name;
    EXPECT_EQ(back.pixels, img.pixels) << name;
  }
  for (const char* name : {"c.png", "d.ppm"}) {
    const Image img =
        augmix_test::quantized(augmix_test::random_image(rng, 4, 3, 3));
    augmix::save_image(img, dir.path(name));
    const Image back = augmix::load_image(dir.path(name), 3);
    ASSERT_TRUE(back.same_shape(img)) << name;
    EXPECT_EQ(back.pixels, img.pixels) << name;
  }
}

TEST(SaveLoadImage, LoadedImagesSatisfyInvariants) {
  TempDir dir("valid");
  augmix::PhiloxRng rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 1 + static_cast<int>(rng.uniform_index(8));
    const int w = 1 + static_cast<int>(rng.uniform_index(8));
    const int c = rng.uniform_index(2) == 0 ? 1 : 3;
    const Image img = augmix_test::random_image(rng, h, w, c);
    augmix::save_image(img, dir.path("t.png"));
    EXPECT_TRUE(augmix::image_is_valid(augmix::load_image(dir.path("t.png"), c)));
    EXPECT_TRUE(augmix::image_is_valid(augmix::load_image(dir.path("t.png"),
                                                          c == 1 ? 3 : 1)));
  }
}

TEST(ChannelCoercion, GrayReplicatesAndRgbTakesLuma) {
  Image gray = Image::filled(1, 1, 1, 0.25);
  const Image rgb = augmix::convert_channels(gray, 3);
  EXPECT_EQ(rgb.channels, 3);
  for (const double p : rgb.pixels) EXPECT_DOUBLE_EQ(p, 0.25);

  Image color = Image::zeros(1, 1, 3);
  color.pixels = {1.0, 0.5, 0.25};
  const Image luma = augmix::convert_channels(color, 1);
  EXPECT_DOUBLE_EQ(luma.pixels[0], 0.299 * 1.0 + 0.587 * 0.5 + 0.114 * 0.25);
}

TEST(LoadImage, ErrorsOnMissingUnsupportedAndZeroDim) {
  TempDir dir("errors");
  EXPECT_THROW(augmix::load_image(dir.path("nope.png"), 1),
               std::runtime_error);
  write_bytes(dir.path("junk.bin"), {'h', 'e', 'l', 'l', 'o'});
  EXPECT_THROW(augmix::load_image(dir.path("junk.bin"), 1),
               std::runtime_error);
  write_bytes(dir.path("zero.pgm"),
              {'P', '5', '\n', '0', ' ', '2', '\n', '2', '5', '5', '\n'});
  EXPECT_THROW(augmix::load_image(dir.path("zero.pgm"), 1),
               std::runtime_error);
  write_bytes(dir.path("trunc.pgm"),
              {'P', '5', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n', 1});
  EXPECT_THROW(augmix::load_image(dir.path("trunc.pgm"), 1),
               std::runtime_error);
}

std::vector<std::uint8_t> cifar_record(std::uint8_t label,
                                       std::uint8_t fill = 0) {
  std::vector<std::uint8_t> rec(augmix::kCifarRecordBytes, fill);
  rec[0] = label;
  return rec;
}

TEST(IngestCifar10, ParsesRecordsPlanesAndLabels) {
  TempDir dir("cifar");
  auto rec0 = cifar_record(7);
  rec0[1] = 255;           // R plane, pixel (0,0)
  rec0[1 + 1024] = 128;    // G plane, pixel (0,0)
  rec0[1 + 2048 + 33] = 9; // B plane, pixel (1,1)
  auto rec1 = cifar_record(3, 10);
  std::vector<std::uint8_t> bytes = rec0;
  bytes.insert(bytes.end(), rec1.begin(), rec1.end());
  ASSERT_EQ(bytes.size(), 6146u);
  write_bytes(dir.path("batch.bin"), bytes);

  const LabeledDataset ds = augmix::ingest_cifar10(dir.path("batch.bin"));
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.num_classes, 10);
  EXPECT_EQ(ds.labels[0], 7);
  EXPECT_EQ(ds.labels[1], 3);
  for (const Image& img : ds.images) {
    EXPECT_EQ(img.height, 32);
    EXPECT_EQ(img.width, 32);
    EXPECT_EQ(img.channels, 3);
  }
  EXPECT_DOUBLE_EQ(ds.images[0].at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(ds.images[0].at(0, 0, 1), 128.0 / 255.0);
  EXPECT_DOUBLE_EQ(ds.images[0].at(1, 1, 2), 9.0 / 255.0);
  EXPECT_DOUBLE_EQ(ds.images[0].at(0, 1, 0), 0.0);
  EXPECT_DOUBLE_EQ(ds.images[1].at(5, 5, 1), 10.0 / 255.0);
}

TEST(IngestCifar10, CountIsLengthOver3073) {
  TempDir dir("cifar_count");
  augmix::PhiloxRng rng(5);
  for (const std::size_t count : {1u, 3u, 11u}) {
    std::vector<std::uint8_t> bytes;
    for (std::size_t i = 0; i < count; ++i) {
      const auto rec = cifar_record(static_cast<std::uint8_t>(
          rng.uniform_index(10)));
      bytes.insert(bytes.end(), rec.begin(), rec.end());
    }
    write_bytes(dir.path("b.bin"), bytes);
    EXPECT_EQ(augmix::ingest_cifar10(dir.path("b.bin")).size(), count);
  }
}

TEST(IngestCifar10, RejectsBadLengthAndBadLabel) {
  TempDir dir("cifar_bad");
  write_bytes(dir.path("short.bin"), std::vector<std::uint8_t>(3072, 0));
  EXPECT_THROW(augmix::ingest_cifar10(dir.path("short.bin")),
               std::runtime_error);
  write_bytes(dir.path("badlabel.bin"), cifar_record(200));
  try {
    augmix::ingest_cifar10(dir.path("badlabel.bin"));
    FAIL() << "expected invalid label error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("invalid label"), std::string::npos);
  }
}

TEST(WriteCifar10, RoundTripsThroughIngest) {
  TempDir dir("cifar_rt");
  augmix::PhiloxRng rng(6);
  LabeledDataset ds;
  ds.num_classes = 10;
  for (int i = 0; i < 4; ++i) {
    ds.images.push_back(
        augmix_test::quantized(augmix_test::random_image(rng, 32, 32, 3)));
    ds.labels.push_back(static_cast<int>(rng.uniform_index(10)));
  }
  augmix::write_cifar10(ds, dir.path("out.bin"));
  const LabeledDataset back = augmix::ingest_cifar10(dir.path("out.bin"));
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.labels[i], ds.labels[i]);
    EXPECT_EQ(back.images[i].pixels, ds.images[i].pixels);
  }
}

}  // namespace
