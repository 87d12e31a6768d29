#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bevfuse/grid.hpp"
#include "bevfuse/rng.hpp"

using namespace bevfuse;

TEST_CASE("grid shape follows the extent and cell size") {
  const GridSpec spec{0.0, 48.0, -24.0, 24.0, 0.5, 3};
  spec.validate();
  REQUIRE(spec.rows() == 96);
  REQUIRE(spec.cols() == 96);
}

TEST_CASE("grid validation rejects inconsistent extents") {
  GridSpec spec{0.0, 10.0, 0.0, 10.0, 1.0, 1};
  spec.validate();

  spec.cell_size = 0.0;
  REQUIRE_THROWS_AS(spec.validate(), ValidationError);
  spec.cell_size = -1.0;
  REQUIRE_THROWS_AS(spec.validate(), ValidationError);

  spec.cell_size = 3.0;  // 10 / 3 is not an integer
  REQUIRE_THROWS_AS(spec.validate(), ValidationError);

  spec = GridSpec{0.0, 10.0, 0.0, 10.0, 1.0, 0};
  REQUIRE_THROWS_AS(spec.validate(), ValidationError);

  spec = GridSpec{0.0, 0.0, 0.0, 10.0, 1.0, 1};  // empty x extent
  REQUIRE_THROWS_AS(spec.validate(), ValidationError);

  spec = GridSpec{10.0, 0.0, 0.0, 10.0, 1.0, 1};  // inverted x extent
  REQUIRE_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("binning is half-open on both axes") {
  const GridSpec spec{0.0, 4.0, -2.0, 2.0, 1.0, 1};

  // Lower edges belong to the grid.
  auto cell = world_to_cell(spec, 0.0, -2.0);
  REQUIRE(cell.has_value());
  REQUIRE(*cell == CellIndex{0, 0});

  // Upper edges do not.
  REQUIRE_FALSE(world_to_cell(spec, 4.0, 0.0).has_value());
  REQUIRE_FALSE(world_to_cell(spec, 0.0, 2.0).has_value());
  REQUIRE_FALSE(world_to_cell(spec, -0.001, 0.0).has_value());

  // Interior cell boundaries round down into the upper cell.
  cell = world_to_cell(spec, 1.0, 0.0);
  REQUIRE(*cell == CellIndex{1, 2});

  // Just inside the upper edge stays in the last cell even when the
  // division rounds up.
  cell = world_to_cell(spec, std::nextafter(4.0, 0.0), 1.999999);
  REQUIRE(*cell == CellIndex{3, 3});
}

TEST_CASE("cell centers land back in their own cell") {
  const GridSpec spec{-8.0, 8.0, -8.0, 8.0, 0.25, 1};
  const auto [cx, cy] = cell_to_world(spec, 0, 0);
  REQUIRE(cx == Catch::Approx(-7.875));
  REQUIRE(cy == Catch::Approx(-7.875));
  SplitMix64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const int r = rng.uniform_int(spec.rows());
    const int c = rng.uniform_int(spec.cols());
    const auto [x, y] = cell_to_world(spec, r, c);
    const auto cell = world_to_cell(spec, x, y);
    REQUIRE(cell.has_value());
    REQUIRE(*cell == CellIndex{r, c});
  }
}

TEST_CASE("grid storage is per-cell per-channel and starts at zero") {
  const GridSpec spec{0.0, 2.0, 0.0, 2.0, 1.0, 3};
  BevGrid g(spec);
  for (double v : g.data()) REQUIRE(v == 0.0);
  g.at(1, 0, 2) = 7.0;
  REQUIRE(g.at(1, 0, 2) == 7.0);
  REQUIRE(g.at(1, 0, 1) == 0.0);
  REQUIRE(g.at(0, 1, 2) == 0.0);
  REQUIRE(g.channel_sum(2) == Catch::Approx(7.0));
  REQUIRE(g.channel_sum(0) == 0.0);
  REQUIRE(g.all_finite());
  g.at(0, 0, 0) = std::nan("");
  REQUIRE_FALSE(g.all_finite());
}

TEST_CASE("downsampling averages each 2x2 block") {
  const GridSpec spec{0.0, 2.0, 0.0, 2.0, 1.0, 1};
  BevGrid g(spec);
  g.at(0, 0, 0) = 1.0;
  g.at(0, 1, 0) = 2.0;
  g.at(1, 0, 0) = 3.0;
  g.at(1, 1, 0) = 4.0;
  const BevGrid half = resample(g, 0.5);
  REQUIRE(half.rows() == 1);
  REQUIRE(half.cols() == 1);
  REQUIRE(half.spec().cell_size == Catch::Approx(2.0));
  REQUIRE(half.at(0, 0, 0) == Catch::Approx(2.5));
  // The extent is untouched.
  REQUIRE(half.spec().same_extent(spec));
}

TEST_CASE("upsampling repeats each cell into a 2x2 block") {
  const GridSpec spec{0.0, 2.0, 0.0, 2.0, 1.0, 2};
  BevGrid g(spec);
  g.at(0, 0, 0) = 1.0;
  g.at(0, 1, 0) = 2.0;
  g.at(1, 0, 1) = -3.0;
  const BevGrid twice = resample(g, 2.0);
  REQUIRE(twice.rows() == 4);
  REQUIRE(twice.cols() == 4);
  REQUIRE(twice.spec().cell_size == Catch::Approx(0.5));
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      REQUIRE(twice.at(r, c, 0) == 1.0);
      REQUIRE(twice.at(r, 2 + c, 0) == 2.0);
      REQUIRE(twice.at(2 + r, c, 1) == -3.0);
    }
  }
}

TEST_CASE("upsample then downsample returns the original grid") {
  const GridSpec spec{0.0, 6.0, -3.0, 3.0, 1.0, 2};
  BevGrid g(spec);
  SplitMix64 rng(17);
  for (double& v : g.data()) v = rng.uniform(-5, 5);
  const BevGrid round = resample(resample(g, 2.0), 0.5);
  REQUIRE(round.spec().same_raster(spec));
  for (std::size_t i = 0; i < g.data().size(); ++i) {
    REQUIRE(round.data()[i] == Catch::Approx(g.data()[i]).margin(1e-12));
  }
}

TEST_CASE("downsampling preserves total mass up to the area weight") {
  const GridSpec spec{0.0, 8.0, 0.0, 8.0, 0.5, 1};
  BevGrid g(spec);
  SplitMix64 rng(23);
  for (double& v : g.data()) v = rng.uniform(0, 1);
  const BevGrid half = resample(g, 0.5);
  REQUIRE(half.channel_sum(0) == Catch::Approx(0.25 * g.channel_sum(0)));
}

TEST_CASE("resampling rejects odd shapes and unsupported factors") {
  const GridSpec odd{0.0, 3.0, 0.0, 3.0, 1.0, 1};
  REQUIRE_THROWS_AS(resample(BevGrid(odd), 0.5), IndivisibleShape);

  const GridSpec even{0.0, 2.0, 0.0, 2.0, 1.0, 1};
  REQUIRE_THROWS_AS(resample(BevGrid(even), 3.0), ValidationError);
  REQUIRE_THROWS_AS(resample(BevGrid(even), 0.25), ValidationError);
}
