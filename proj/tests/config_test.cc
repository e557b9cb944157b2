#include <fstream>

#include <gtest/gtest.h>

#include "mapprior/config.h"
#include "mapprior/errors.h"
#include "scenes.h"

namespace mapprior {
namespace {

TEST(PipelineConfig, Defaults) {
  const PipelineConfig c;
  EXPECT_EQ(c.map_pool_voxel, 0.4);
  EXPECT_EQ(c.bev_voxel, 0.2);
  EXPECT_EQ(c.bev_cells, 128);
  EXPECT_EQ(c.tile_size, 50.0);
  EXPECT_EQ(c.range, 50.0);
  EXPECT_EQ(c.d_max, 61.0);
  EXPECT_EQ(c.spread_radius, 24);
  EXPECT_EQ(c.embedding_dim, 16);
  EXPECT_EQ(c.outlier_k, 20);
  EXPECT_EQ(c.outlier_std_ratio, 2.0);
  EXPECT_EQ(c.cameras.size(), 6u);
  EXPECT_NO_THROW(c.Validate());
}

TEST(PipelineConfig, DefaultRigLooksOutward) {
  const PipelineConfig c;
  for (std::size_t k = 0; k < c.cameras.size(); ++k) {
    const double yaw = k * M_PI / 3;
    const Eigen::Vector3d ahead(10 * std::cos(yaw), 10 * std::sin(yaw), 1.6);
    const auto p = ProjectPoint(c.cameras[k], ahead);
    ASSERT_TRUE(p) << c.cameras[k].id;
    EXPECT_NEAR(p->u, 480.0, 1e-9);
    EXPECT_NEAR(p->v, 320.0, 1e-9);
    EXPECT_NEAR(p->depth, 10.0, 1e-12);
  }
}

TEST(PipelineConfig, JsonRoundTripIsExact) {
  const PipelineConfig c;
  const PipelineConfig back = PipelineConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.Echo(), c.Echo());
}

TEST(LoadPipelineConfig, OverridesAndErrors) {
  const PipelineConfig c = LoadPipelineConfig(
      "", {"map.pool_voxel=0.5", "gridmask.seed=42", "bev.z_bounds=[-3,2]"});
  EXPECT_EQ(c.map_pool_voxel, 0.5);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.z_min, -3.0);
  try {
    LoadPipelineConfig("", {"map.pool_voxel=-1"});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "map.pool_voxel");
  }
  try {
    LoadPipelineConfig("", {"map.nope=1"});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "map.nope");
  }
  try {
    LoadPipelineConfig("", {"pv.embedding_dim=\"x\""});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "pv.embedding_dim");
  }
  EXPECT_THROW(LoadPipelineConfig("", {"pv.embedding_dim=7"}), ConfigError);
  EXPECT_THROW(LoadPipelineConfig("", {"cameras=[]"}), ConfigError);
}

TEST(LoadPipelineConfig, FileMergesOverDefaults) {
  const auto dir = testing::TempDir("config");
  std::ofstream(dir / "c.json") << R"({"pv": {"d_max": 152}, "range": 60})";
  const PipelineConfig c = LoadPipelineConfig((dir / "c.json").string(), {"range=70"});
  EXPECT_EQ(c.d_max, 152.0);
  EXPECT_EQ(c.range, 70.0);
  EXPECT_EQ(c.spread_radius, 24);
  std::ofstream(dir / "bad.json") << R"({"pv": {"dmax": 1}})";
  try {
    LoadPipelineConfig((dir / "bad.json").string(), {});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "pv.dmax");
  }
}

}  // namespace
}  // namespace mapprior
