#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "kpeval/masks.hpp"

using namespace kpeval;

namespace {

const DescriptorMaskConfig kSift = *mask_config_for("SIFT");

double integral(const Eigen::ArrayXXd& field) { return field.sum(); }

}  // namespace

TEST_CASE("built-in mask table") {
  CHECK(builtin_mask_table().size() == 13);

  const auto sift = mask_config_for("sift");
  REQUIRE(sift.has_value());
  CHECK(sift->rho == doctest::Approx(6.0 * std::sqrt(2.0)));
  CHECK(sift->zeta == doctest::Approx(6.0));

  const auto surf = mask_config_for("SURF");
  REQUIRE(surf.has_value());
  CHECK(surf->rho == doctest::Approx(10.0 * std::sqrt(2.0)));
  CHECK(surf->zeta == doctest::Approx(3.3));

  const auto brisk = mask_config_for("BRISK");
  REQUIRE(brisk.has_value());
  CHECK(brisk->rho == doctest::Approx(1.5 * std::sqrt(2.0)));
  CHECK(brisk->zeta == doctest::Approx(1.5));

  const auto mser = mask_config_for("mser");
  REQUIRE(mser.has_value());
  CHECK(mser->rho == doctest::Approx(2.0));
  CHECK(mser->flat());

  for (const char* label : {"EBR", "ibr"}) {
    const auto cfg = mask_config_for(label);
    REQUIRE(cfg.has_value());
    CHECK(cfg->rho == doctest::Approx(1.0));
    CHECK(cfg->flat());
  }

  // aliases used by the benchmark tables
  CHECK(mask_config_for("heslap").has_value());
  CHECK(mask_config_for("HARAFF").has_value());
  CHECK(mask_config_for("sift-single").has_value());
  CHECK_FALSE(mask_config_for("unknown-detector").has_value());

  // the s = 4*sigma footprint compensation
  const DescriptorMaskConfig grown = brisk->scaled(4.0);
  CHECK(grown.rho == doctest::Approx(6.0 * std::sqrt(2.0)));
  CHECK(grown.zeta == doctest::Approx(6.0));
  CHECK(mser->scaled(4.0).flat());
}

TEST_CASE("mask values") {
  const DomainRect domain(200, 200);

  SUBCASE("peak at the region center, zero outside the truncation") {
    const EllipticalRegion region = EllipticalRegion::disk(Vec2(100.0, 100.0), 4.0);
    const MaskPatch patch = mask_values(region, kSift, domain);

    Eigen::Index peak_row = 0, peak_col = 0;
    patch.values.maxCoeff(&peak_row, &peak_col);
    // pixel centers sit at +0.5, so the peak pixel is at (99, 99) or (100, 100)
    CHECK(std::abs(patch.x0 + peak_col + 0.5 - 100.0) <= 0.5);
    CHECK(std::abs(patch.y0 + peak_row + 0.5 - 100.0) <= 0.5);

    const double support_radius = kSift.rho * 4.0;
    for (Eigen::Index row = 0; row < patch.values.rows(); ++row) {
      for (Eigen::Index col = 0; col < patch.values.cols(); ++col) {
        const double dx = patch.x0 + col + 0.5 - 100.0;
        const double dy = patch.y0 + row + 0.5 - 100.0;
        if (std::hypot(dx, dy) > support_radius + 1e-9) {
          CHECK(patch.values(row, col) == 0.0);
        }
      }
    }
  }

  SUBCASE("discrete unit integral, interior and border-clipped") {
    const MaskPatch interior =
        mask_values(EllipticalRegion::disk(Vec2(100.0, 100.0), 5.0), kSift, domain);
    CHECK(integral(interior.values) == doctest::Approx(1.0).epsilon(1e-6));

    const MaskPatch clipped =
        mask_values(EllipticalRegion::disk(Vec2(3.0, 1.0), 5.0), kSift, domain);
    CHECK(integral(clipped.values) == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("flat masks are constant on their support") {
    const auto mser = *mask_config_for("MSER");
    const MaskPatch patch =
        mask_values(EllipticalRegion::disk(Vec2(100.0, 100.0), 10.0), mser, domain);
    double level = 0.0;
    for (Eigen::Index row = 0; row < patch.values.rows(); ++row) {
      for (Eigen::Index col = 0; col < patch.values.cols(); ++col) {
        const double v = patch.values(row, col);
        if (v > 0.0) {
          if (level == 0.0) level = v;
          CHECK(v == level);
        }
      }
    }
    CHECK(level > 0.0);
  }

  SUBCASE("support entirely outside the domain throws") {
    CHECK_THROWS_AS(
        mask_values(EllipticalRegion::disk(Vec2(-500.0, -500.0), 2.0), kSift, domain),
        EmptySupport);
  }

  SUBCASE("masked-out domain pixels do not carry mass") {
    DomainRect masked(50, 50);
    masked.valid.setConstant(50, 50, false);
    for (int y = 0; y < 50; ++y) {       // only the left half is visible
      for (int x = 0; x < 25; ++x) {
        masked.valid(y, x) = true;
      }
    }
    const MaskPatch patch =
        mask_values(EllipticalRegion::disk(Vec2(25.0, 25.0), 3.0), kSift, masked);
    CHECK(integral(patch.values) == doctest::Approx(1.0).epsilon(1e-6));
    for (Eigen::Index row = 0; row < patch.values.rows(); ++row) {
      for (Eigen::Index col = 0; col < patch.values.cols(); ++col) {
        if (patch.x0 + col >= 25) {
          CHECK(patch.values(row, col) == 0.0);
        }
      }
    }
  }
}

TEST_CASE("coverage accumulation and keypoint counts") {
  const DomainRect domain(400, 400);

  SUBCASE("empty set gives zero fields") {
    const CoverageMap map = accumulate({}, kSift, domain);
    CHECK(integral(map.sum_field) == 0.0);
    CHECK(integral(map.max_field) == 0.0);
    CHECK(map.accumulated == 0);
  }

  SUBCASE("one interior keypoint integrates to one in both fields") {
    const CoverageMap map =
        accumulate({EllipticalRegion::disk(Vec2(200.0, 200.0), 3.0)}, kSift, domain);
    const auto [k, k_nr] = count_keypoints(map);
    CHECK(k == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(k_nr == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("two identical keypoints: K = 2, K_nr = 1") {
    const auto region = EllipticalRegion::disk(Vec2(200.0, 200.0), 3.0);
    const auto [k, k_nr] = count_keypoints(accumulate({region, region}, kSift, domain));
    CHECK(k == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(k_nr == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("far-apart keypoints are both non-redundant") {
    const auto [k, k_nr] =
        count_keypoints(accumulate({EllipticalRegion::disk(Vec2(80.0, 80.0), 2.0),
                                    EllipticalRegion::disk(Vec2(320.0, 320.0), 2.0)},
                                   kSift, domain));
    CHECK(k == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(std::abs(k_nr - 2.0) <= 0.02);
  }

  SUBCASE("concentric keypoints with a moderate scale gap") {
    const auto [k, k_nr] =
        count_keypoints(accumulate({EllipticalRegion::disk(Vec2(200.0, 200.0), 2.0),
                                    EllipticalRegion::disk(Vec2(200.0, 200.0), 4.0)},
                                   kSift, domain));
    CHECK(k == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(k_nr > 1.0 + 1e-3);
    CHECK(k_nr < 2.0 - 1e-3);
  }

  SUBCASE("concentric keypoints with a x20 scale gap are nearly independent") {
    DomainRect big(900, 900);
    const auto [k, k_nr] =
        count_keypoints(accumulate({EllipticalRegion::disk(Vec2(450.0, 450.0), 2.0),
                                    EllipticalRegion::disk(Vec2(450.0, 450.0), 40.0)},
                                   kSift, big));
    CHECK(k == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(k_nr >= 1.9);
  }

  SUBCASE("max field never exceeds the sum field") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<EllipticalRegion> regions;
    for (int i = 0; i < 30; ++i) {
      regions.push_back(EllipticalRegion::disk(
          Vec2(40.0 + 320.0 * unit(rng), 40.0 + 320.0 * unit(rng)), 1.5 + 4.0 * unit(rng)));
    }
    const CoverageMap map = accumulate(regions, kSift, domain);
    CHECK((map.max_field <= map.sum_field + 1e-12).all());
    const auto [k, k_nr] = count_keypoints(map);
    CHECK(k_nr <= k + 1e-9);
    CHECK(std::abs(k - 30.0) <= 0.3);  // 1% of the count
  }

  SUBCASE("duplicating the whole set leaves the max field bit-identical") {
    std::vector<EllipticalRegion> regions = {
        EllipticalRegion::disk(Vec2(100.0, 120.0), 3.0),
        EllipticalRegion::disk(Vec2(140.0, 120.0), 5.0),
        EllipticalRegion::disk(Vec2(120.0, 160.0), 2.0)};
    std::vector<EllipticalRegion> doubled = regions;
    doubled.insert(doubled.end(), regions.begin(), regions.end());

    const CoverageMap once = accumulate(regions, kSift, domain);
    const CoverageMap twice = accumulate(doubled, kSift, domain);
    CHECK((once.max_field == twice.max_field).all());
    CHECK(integral(twice.sum_field) == doctest::Approx(2.0 * integral(once.sum_field)));
  }

  SUBCASE("K_nr is invariant under permutations") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<EllipticalRegion> regions;
    for (int i = 0; i < 12; ++i) {
      regions.push_back(EllipticalRegion::disk(
          Vec2(60.0 + 280.0 * unit(rng), 60.0 + 280.0 * unit(rng)), 2.0 + 3.0 * unit(rng)));
    }
    const CoverageMap base = accumulate(regions, kSift, domain);
    std::shuffle(regions.begin(), regions.end(), rng);
    const CoverageMap shuffled = accumulate(regions, kSift, domain);
    CHECK((base.max_field == shuffled.max_field).all());
  }

  SUBCASE("adding a detection adds exactly one to K and never lowers K_nr") {
    std::vector<EllipticalRegion> regions = {
        EllipticalRegion::disk(Vec2(150.0, 150.0), 3.0),
        EllipticalRegion::disk(Vec2(180.0, 150.0), 4.0)};
    const auto [k_before, knr_before] = count_keypoints(accumulate(regions, kSift, domain));
    regions.push_back(EllipticalRegion::disk(Vec2(160.0, 170.0), 2.5));
    const auto [k_after, knr_after] = count_keypoints(accumulate(regions, kSift, domain));
    CHECK(k_after - k_before == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(knr_after >= knr_before - 1e-9);
  }
}

TEST_CASE("non-redundant ratio") {
  const DomainRect domain(400, 400);

  SUBCASE("empty set throws") {
    CHECK_THROWS_AS(nr_ratio({}, kSift, domain), EmptySet);
  }

  SUBCASE("disjoint supports give ratio 1") {
    const double ratio = nr_ratio({EllipticalRegion::disk(Vec2(80.0, 80.0), 2.0),
                                   EllipticalRegion::disk(Vec2(320.0, 320.0), 2.0)},
                                  kSift, domain);
    CHECK(std::abs(ratio - 1.0) <= 0.02);
  }

  SUBCASE("duplicating every detection halves the ratio") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<EllipticalRegion> regions;
    for (int i = 0; i < 15; ++i) {
      regions.push_back(EllipticalRegion::disk(
          Vec2(60.0 + 280.0 * unit(rng), 60.0 + 280.0 * unit(rng)), 2.0 + 3.0 * unit(rng)));
    }
    std::vector<EllipticalRegion> doubled = regions;
    doubled.insert(doubled.end(), regions.begin(), regions.end());
    const double base = nr_ratio(regions, kSift, domain);
    const double halved = nr_ratio(doubled, kSift, domain);
    CHECK(std::abs(halved - 0.5 * base) <= 0.02);
  }
}
