#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "bindet/dataset_io.hpp"
#include "bindet/image_io.hpp"
#include "oracles.hpp"
#include "planted.hpp"

namespace bindet {
namespace {

namespace fs = std::filesystem;

class DatasetTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = testing::make_temp_dir("bindet_ds"); }
  void TearDown() override { fs::remove_all(dir_); }

  void write(const fs::path& rel, const std::string& text) {
    fs::create_directories((dir_ / rel).parent_path());
    std::ofstream(dir_ / rel) << text;
  }

  fs::path dir_;
};

TEST_F(DatasetTest, CameraFieldMapping) {
  write("scene_camera.json",
        R"({"3": {"cam_K": [100, 0, 320, 0, 110, 240, 0, 0, 1], "depth_scale": 0.1}})");
  const auto cams = load_scene_camera(dir_ / "scene_camera.json");
  ASSERT_EQ(cams.size(), 1U);
  const auto& c = cams.at(3);
  EXPECT_EQ(c.intrinsics, (CameraIntrinsics{100, 110, 320, 240}));
  EXPECT_DOUBLE_EQ(c.depth_scale, 0.1);
}

TEST_F(DatasetTest, EmptyCameraFileGivesEmptyMap) {
  write("scene_camera.json", "{}");
  EXPECT_TRUE(load_scene_camera(dir_ / "scene_camera.json").empty());
}

TEST_F(DatasetTest, MissingCamKNamesTheImage) {
  write("scene_camera.json", R"({"17": {"depth_scale": 1.0}})");
  try {
    (void)load_scene_camera(dir_ / "scene_camera.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedInput);
    EXPECT_NE(std::string(e.what()).find("17"), std::string::npos);
  }
}

TEST_F(DatasetTest, NonPositiveFocalIsValidationError) {
  write("scene_camera.json", R"({"0": {"cam_K": [0, 0, 320, 0, 100, 240, 0, 0, 1]}})");
  try {
    (void)load_scene_camera(dir_ / "scene_camera.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
}

TEST_F(DatasetTest, GrayFrameIsReplicatedAndDepthScaled) {
  const fs::path scene = scene_dir(dir_, 2);
  write("000002/scene_camera.json",
        R"({"5": {"cam_K": [100, 0, 2, 0, 100, 1, 0, 0, 1], "depth_scale": 0.1}})");
  write_png(scene / "gray" / "000005.png", GrayImage(4, 3, 77));
  write_png(scene / "depth" / "000005.png", Depth16(4, 3, 20000));

  const SceneFrame f = load_frame(dir_, 2, 5);
  EXPECT_EQ(f.scene_id, 2);
  EXPECT_EQ(f.image_id, 5);
  EXPECT_EQ(f.rgb, RgbImage(4, 3, 77));
  ASSERT_TRUE(f.depth.has_value());
  for (const float d : f.depth->data()) {
    EXPECT_FLOAT_EQ(d, 2000.0F);
  }
}

TEST_F(DatasetTest, FrameWithoutDepthHasNoDepth) {
  write("000001/scene_camera.json", R"({"0": {"cam_K": [100, 0, 2, 0, 100, 1, 0, 0, 1]}})");
  write_png(scene_dir(dir_, 1) / "rgb" / "000000.png", RgbImage(5, 5, 9));
  EXPECT_FALSE(load_frame(dir_, 1, 0).depth.has_value());
}

TEST_F(DatasetTest, MissingRgbIsNotFound) {
  write("000001/scene_camera.json", R"({"0": {"cam_K": [100, 0, 2, 0, 100, 1, 0, 0, 1]}})");
  try {
    (void)load_frame(dir_, 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFound);
  }
}

TEST_F(DatasetTest, DepthSizeMismatchIsValidationError) {
  write("000001/scene_camera.json", R"({"0": {"cam_K": [100, 0, 2, 0, 100, 1, 0, 0, 1]}})");
  write_png(scene_dir(dir_, 1) / "rgb" / "000000.png", RgbImage(5, 5, 9));
  write_png(scene_dir(dir_, 1) / "depth" / "000000.png", Depth16(4, 5, 100));
  try {
    (void)load_frame(dir_, 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
}

TEST_F(DatasetTest, GroundTruthFromPlantedScene) {
  const auto ds = testing::make_planted_dataset(dir_);
  const auto frames = list_frames(ds.root);
  ASSERT_EQ(frames.size(), ds.frames.size());
  EXPECT_TRUE(std::is_sorted(frames.begin(), frames.end()));

  const auto gt = load_scene_gt(ds.root, 1);
  const auto& planted = ds.frames[0];
  const auto& loaded = gt.at(0);
  ASSERT_EQ(loaded.size(), planted.objects.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].object_id, planted.objects[i].object_id);
    EXPECT_EQ(loaded[i].bbox, planted.objects[i].box);
    EXPECT_EQ(loaded[i].mask.count(), static_cast<std::size_t>(planted.objects[i].box.area()));
    EXPECT_DOUBLE_EQ(loaded[i].visibility_fraction, 1.0);
  }
}

TEST_F(DatasetTest, FullyOccludedInstanceIsSkipped) {
  write("000001/scene_gt.json", R"({"0": [{"obj_id": 4}, {"obj_id": 5}]})");
  write_png(scene_dir(dir_, 1) / "mask_visib" / "000000_000000.png", GrayImage(6, 6, 0));
  GrayImage visible(6, 6, 0);
  visible.at(2, 3) = 255;
  write_png(scene_dir(dir_, 1) / "mask_visib" / "000000_000001.png", visible);
  const auto gt = load_scene_gt(dir_, 1);
  ASSERT_EQ(gt.at(0).size(), 1U);
  EXPECT_EQ(gt.at(0)[0].object_id, 5);
  EXPECT_EQ(gt.at(0)[0].bbox, (BoundingBox{2, 3, 1, 1}));
}

DetectionRecord random_record(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> id(0, 50);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DetectionRecord r;
  r.scene_id = id(rng);
  r.image_id = id(rng);
  r.object_id = id(rng) + 1;
  r.score = u(rng);
  r.bbox = {u(rng) * 100, u(rng) * 100, 1 + u(rng) * 50, 1 + u(rng) * 50};
  r.mask_rle = rle_encode(testing::random_blob_mask(rng, 7, 5, u(rng)));
  r.time_s = u(rng);
  return r;
}

TEST(DetectionJson, EmptyListIsBrackets) {
  EXPECT_EQ(detections_to_json({}), "[]");
  EXPECT_TRUE(detections_from_json("[]").empty());
}

TEST(DetectionJson, KeysFollowResultFormat) {
  std::mt19937_64 rng(1);
  const auto r = random_record(rng);
  const auto j = nlohmann::json::parse(detections_to_json({r}));
  ASSERT_EQ(j.size(), 1U);
  for (const char* key : {"scene_id", "image_id", "category_id", "score", "bbox", "segmentation", "time"}) {
    EXPECT_TRUE(j[0].contains(key)) << key;
  }
  EXPECT_EQ(j[0]["category_id"], r.object_id);
  EXPECT_EQ(j[0]["segmentation"]["size"], nlohmann::json({r.mask_rle.height, r.mask_rle.width}));
}

TEST(DetectionJson, RoundtripRandomRecords) {
  std::mt19937_64 rng(2);
  std::vector<DetectionRecord> records;
  for (int i = 0; i < 100; ++i) {
    records.push_back(random_record(rng));
  }
  EXPECT_EQ(detections_from_json(detections_to_json(records)), records);
  EXPECT_EQ(detections_from_json(detections_to_json({records[0]})), std::vector<DetectionRecord>{records[0]});
}

TEST(DetectionJson, MalformedInputReportsLine) {
  try {
    (void)detections_from_json("[\n{\"scene_id\": 1,\n oops}\n]");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedInput);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  try {
    (void)detections_from_json(R"([{"scene_id": 1}])");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedInput);
    EXPECT_NE(std::string(e.what()).find("record 0"), std::string::npos);
  }
}

TEST(DetectionJson, UnwritablePathIsIoError) {
  const fs::path dir = testing::make_temp_dir("bindet_ro");
  const fs::path blocker = dir / "file";
  std::ofstream(blocker) << "x";
  try {
    write_detections({}, blocker / "sub" / "out.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
  fs::remove_all(dir);
}

TEST(DetectionJson, FileRoundtrip) {
  const fs::path dir = testing::make_temp_dir("bindet_rt");
  std::mt19937_64 rng(4);
  const std::vector<DetectionRecord> records{random_record(rng), random_record(rng)};
  write_detections(records, dir / "d.json");
  EXPECT_EQ(read_detections(dir / "d.json"), records);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace bindet
