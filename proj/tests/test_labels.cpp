#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "monosim/detect.hpp"
#include "monosim/gradcheck.hpp"
#include "monosim/labels.hpp"
#include "monosim/losses.hpp"
#include "monosim/rng.hpp"

using namespace monosim;

#ifndef MONOSIM_TEST_DATA_DIR
#define MONOSIM_TEST_DATA_DIR "tests/data"
#endif

namespace {

DetectionBox car_with_confidence(double confidence) {
  DetectionBox box;
  box.label = ObjectClass::Car;
  box.confidence = confidence;
  return box;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

TEST_CASE("confidence filtering keeps boxes at or above the class threshold") {
  SoftLabelSet predictions;
  predictions.boxes.push_back(car_with_confidence(0.9));
  predictions.boxes.push_back(car_with_confidence(0.6));
  SoftLabelSet kept = filter_soft_labels(predictions, ThresholdPolicy{0.7, 0.0, 0.0});
  REQUIRE(kept.boxes.size() == 1);
  CHECK(kept.boxes[0].confidence == 0.9);

  SoftLabelSet pedestrians;
  DetectionBox ped;
  ped.label = ObjectClass::Pedestrian;
  ped.confidence = 0.1;
  pedestrians.boxes.push_back(ped);
  ped.confidence = 0.05;
  pedestrians.boxes.push_back(ped);
  CHECK(filter_soft_labels(pedestrians, ThresholdPolicy{0.7, 0.0, 0.0}).boxes.size() == 2);

  CHECK(filter_soft_labels(SoftLabelSet{}, ThresholdPolicy{}).boxes.empty());
}

TEST_CASE("filtering at threshold zero is the identity and counts are monotone") {
  Rng rng(61);
  SoftLabelSet predictions;
  for (int i = 0; i < 500; ++i) {
    DetectionBox box = car_with_confidence(rng.uniform());
    box.x = rng.uniform(-5.0, 5.0);
    predictions.boxes.push_back(box);
  }
  SoftLabelSet at_zero = filter_soft_labels(predictions, ThresholdPolicy{0.0, 0.0, 0.0});
  REQUIRE(at_zero.boxes.size() == predictions.boxes.size());
  for (std::size_t i = 0; i < at_zero.boxes.size(); ++i) {
    CHECK(at_zero.boxes[i].confidence == predictions.boxes[i].confidence);
    CHECK(at_zero.boxes[i].x == predictions.boxes[i].x);
  }

  std::size_t previous = predictions.boxes.size() + 1;
  for (double threshold : {0.0, 0.3, 0.5, 0.7, 0.9}) {
    const std::size_t kept =
        filter_soft_labels(predictions, ThresholdPolicy{threshold, 0.0, 0.0}).boxes.size();
    CHECK(kept <= previous);
    previous = kept;
  }
}

TEST_CASE("threshold policy validates its range") {
  CHECK_THROWS_AS(filter_soft_labels(SoftLabelSet{}, ThresholdPolicy{1.2, 0.0, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("kitti line parsing maps fields directly") {
  const std::string line =
      "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59 0.91";
  SoftLabelSet labels = parse_kitti_labels(line);
  REQUIRE(labels.boxes.size() == 1);
  const DetectionBox& box = labels.boxes[0];
  CHECK(box.label == ObjectClass::Car);
  CHECK(box.h == 1.65);
  CHECK(box.w == 1.67);
  CHECK(box.l == 3.64);
  CHECK(box.x == -0.65);
  CHECK(box.y == 1.71);
  CHECK(box.z == 46.70);
  CHECK(box.yaw == -1.59);
  CHECK(box.confidence == 0.91);
}

TEST_CASE("score field is optional on parse") {
  const std::string line =
      "Pedestrian 0.00 0 0.31 712.40 143.00 810.73 307.92 1.89 0.48 1.20 5.55 1.37 14.10 0.73";
  SoftLabelSet labels = parse_kitti_labels(line);
  REQUIRE(labels.boxes.size() == 1);
  CHECK(labels.boxes[0].confidence == 1.0);
}

TEST_CASE("golden file round trips exactly") {
  const std::string golden = read_file(std::string(MONOSIM_TEST_DATA_DIR) + "/golden_labels.txt");
  SoftLabelSet parsed = parse_kitti_labels(golden);
  CHECK(parsed.boxes.size() == 10);
  CHECK(emit_kitti_labels(parsed) == golden);
  SoftLabelSet reparsed = parse_kitti_labels(emit_kitti_labels(parsed));
  REQUIRE(reparsed.boxes.size() == parsed.boxes.size());
  for (std::size_t i = 0; i < parsed.boxes.size(); ++i) {
    CHECK(reparsed.boxes[i].x == parsed.boxes[i].x);
    CHECK(reparsed.boxes[i].yaw == parsed.boxes[i].yaw);
    CHECK(reparsed.boxes[i].confidence == parsed.boxes[i].confidence);
  }
}

TEST_CASE("malformed lines are rejected with their line number") {
  const std::string fourteen_fields =
      "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70";
  try {
    parse_kitti_labels("Car 0.0 0 0.0 0 0 10 10 1.5 1.6 3.9 0 1.7 10 0 0.9\n" + fourteen_fields);
    FAIL("expected ParseError");
  } catch (const ParseError& error) {
    CHECK(error.line == 2);
  }

  try {
    parse_kitti_labels("Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 abc 3.64 -0.65 1.71 "
                       "46.70 -1.59 0.91");
    FAIL("expected ParseError");
  } catch (const ParseError& error) {
    CHECK(error.line == 1);
  }

  CHECK_THROWS_AS(parse_kitti_labels("Van 0.0 0 0.0 0 0 10 10 1.5 1.6 3.9 0 1.7 10 0 0.9"),
                  ParseError);
}

TEST_CASE("confidence histogram bins and sums") {
  SoftLabelSet frame;
  frame.boxes.push_back(car_with_confidence(0.05));
  frame.boxes.push_back(car_with_confidence(0.95));
  auto hist = confidence_histogram({frame}, 10);
  CHECK(hist[0][0] == 1);
  CHECK(hist[0][9] == 1);
  for (int b = 1; b < 9; ++b) CHECK(hist[0][b] == 0);

  auto empty = confidence_histogram({}, 10);
  for (const auto& per_class : empty) {
    for (std::size_t count : per_class) CHECK(count == 0);
  }

  Rng rng(63);
  SoftLabelSet big;
  for (int i = 0; i < 1000; ++i) big.boxes.push_back(car_with_confidence(rng.uniform()));
  auto uniform_hist = confidence_histogram({big}, 10);
  std::size_t total = 0;
  const double sigma = std::sqrt(1000.0 * 0.1 * 0.9);
  for (std::size_t count : uniform_hist[0]) {
    total += count;
    CHECK(std::abs(static_cast<double>(count) - 100.0) < 5.0 * sigma);
  }
  CHECK(total == 1000);

  CHECK(confidence_histogram({frame}, 1)[0][0] == 2);
}

TEST_CASE("response loss is zero for perfect predictions") {
  // two anchors: one positive matched to a label it predicts exactly, one negative
  std::vector<DetectionBox> anchors(2);
  anchors[0].x = 0.0;
  anchors[0].z = 8.0;
  anchors[0].h = 1.5;
  anchors[0].w = 1.6;
  anchors[0].l = 3.9;
  anchors[1] = anchors[0];
  anchors[1].x = 10.0;

  SoftLabelSet labels;
  DetectionBox gt = anchors[0];
  gt.x = 0.2;
  gt.yaw = 0.1;
  labels.boxes.push_back(gt);

  std::vector<AnchorMatch> matches{{AnchorRole::Positive, 0}, {AnchorRole::Negative, 0}};

  Tensor params({2, 7});
  const auto target = regression_target(anchors[0], gt);
  for (std::size_t k = 0; k < 7; ++k) params.at(0, k) = target[k];
  Tensor objectness({2});
  objectness[0] = 1.0;
  objectness[1] = 0.0;

  ag::Var loss = response_loss(ag::constant(params), ag::constant(objectness), anchors, labels,
                               matches);
  CHECK(std::abs(loss->scalar()) < 1e-9);
}

TEST_CASE("a one-meter center miss contributes half a unit") {
  std::vector<DetectionBox> anchors(1);
  anchors[0].z = 8.0;
  anchors[0].h = 1.5;
  anchors[0].w = 1.6;
  anchors[0].l = 3.9;
  SoftLabelSet labels;
  labels.boxes.push_back(anchors[0]);
  std::vector<AnchorMatch> matches{{AnchorRole::Positive, 0}};

  Tensor params({1, 7});
  params.at(0, 0) = 1.0;  // center x off by one meter, all else exact
  Tensor objectness({1});
  objectness[0] = 1.0;

  ag::Var loss =
      response_loss(ag::constant(params), ag::constant(objectness), anchors, labels, matches);
  CHECK(loss->scalar() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("empty label sets reduce to negative objectness loss") {
  std::vector<DetectionBox> anchors(3);
  for (auto& a : anchors) {
    a.h = 1.5;
    a.w = 1.6;
    a.l = 3.9;
  }
  SoftLabelSet empty;
  std::vector<AnchorMatch> matches(3, {AnchorRole::Negative, 0});
  Tensor params({3, 7});
  Tensor objectness({3});
  objectness[0] = 0.2;
  objectness[1] = 0.4;
  objectness[2] = 0.1;
  ag::Var loss =
      response_loss(ag::constant(params), ag::constant(objectness), anchors, empty, matches);
  const double expected =
      -(std::log(0.8) + std::log(0.6) + std::log(0.9)) / 3.0;
  CHECK(loss->scalar() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("response loss rejects empty anchor sets") {
  SoftLabelSet labels;
  std::vector<DetectionBox> anchors;
  std::vector<AnchorMatch> matches;
  CHECK_THROWS_AS(response_loss(ag::constant(Tensor({0, 7})), ag::constant(Tensor({0})), anchors,
                                labels, matches),
                  std::invalid_argument);
}

TEST_CASE("response loss passes the gradient suite") {
  Rng rng(67);
  std::vector<DetectionBox> anchors(4);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    anchors[i].x = static_cast<double>(i) * 2.0;
    anchors[i].z = 8.0;
    anchors[i].h = 1.5;
    anchors[i].w = 1.6;
    anchors[i].l = 3.9;
  }
  SoftLabelSet labels;
  DetectionBox gt = anchors[1];
  gt.x += 0.3;
  labels.boxes.push_back(gt);
  std::vector<AnchorMatch> matches{{AnchorRole::Negative, 0},
                                   {AnchorRole::Positive, 0},
                                   {AnchorRole::Ignore, 0},
                                   {AnchorRole::Negative, 0}};

  for (int trial = 0; trial < 3; ++trial) {
    Tensor params({4, 7});
    for (std::size_t i = 0; i < params.size(); ++i) params[i] = rng.uniform(-0.8, 0.8);
    Tensor objectness({4});
    for (std::size_t i = 0; i < 4; ++i) objectness[i] = rng.uniform(0.1, 0.9);
    auto build = [&](const std::vector<ag::Var>& in) {
      return response_loss(in[0], in[1], anchors, labels, matches);
    };
    CHECK(finite_difference_check(build, {params, objectness}, 1e-5, 1e-3).pass);
  }
}
