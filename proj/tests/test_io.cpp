#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lidarnav/checkpoint.hpp"
#include "lidarnav/csv.hpp"
#include "lidarnav/dataset.hpp"
#include "lidarnav/errors.hpp"
#include "lidarnav/image_io.hpp"
#include "lidarnav/nn.hpp"
#include "lidarnav/rng.hpp"
#include "lidarnav/world.hpp"

using namespace lidarnav;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "lidarnav_io_test") {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  return std::vector<char>(std::istreambuf_iterator<char>(is),
                           std::istreambuf_iterator<char>());
}

void dump(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream os(path, std::ios::binary);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

DatasetArchive sample_archive() {
  DatasetArchive d;
  d.sensor.beam_count = 8;
  d.sensor.max_range = 10.0;
  d.sensor.noise_sigma = 0.0;
  d.sensor.invalid_fraction = 0.25;
  d.generation = {{"env", "simple"}, {"rooms", 2}};

  Rng rng(4);
  for (int s = 0; s < 3; ++s) {
    LidarScan scan;
    scan.sensor = d.sensor;
    for (int i = 0; i < 8; ++i) {
      const bool ok = !(s == 1 && i % 3 == 0);
      scan.valid.push_back(ok ? 1 : 0);
      scan.ranges.push_back(ok ? rng.uniform(0.5, 9.5) : NAN);
    }
    d.append(scan, Pose{rng.uniform(0.0, 4.0), rng.uniform(0.0, 4.0),
                        rng.uniform(-3.0, 3.0)});
  }
  return d;
}

}  // namespace

TEST_CASE("dataset archive: bitwise roundtrip including NaN invalids") {
  TempDir tmp;
  const DatasetArchive d = sample_archive();
  const std::string path = tmp.file("scans.l2ds");
  write_dataset(path, d);

  const DatasetArchive r = read_dataset(path);
  CHECK(r.scan_count == 3);
  CHECK(r.sensor.beam_count == 8);
  CHECK(r.sensor.max_range == d.sensor.max_range);
  CHECK(r.sensor.invalid_fraction == d.sensor.invalid_fraction);
  CHECK(r.generation == d.generation);
  REQUIRE(r.ranges.size() == d.ranges.size());
  for (std::size_t i = 0; i < d.ranges.size(); ++i) {
    if (std::isnan(d.ranges[i])) {
      CHECK(std::isnan(r.ranges[i]));
    } else {
      CHECK(r.ranges[i] == d.ranges[i]);
    }
  }
  CHECK(r.poses == d.poses);

  // rewriting the parsed archive reproduces the file byte for byte
  const std::string path2 = tmp.file("scans2.l2ds");
  write_dataset(path2, r);
  CHECK(slurp(path) == slurp(path2));

  // magic and version are enforced
  auto bytes = slurp(path);
  REQUIRE(bytes.size() > 6);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "L2DS");
  bytes[0] = 'X';
  dump(tmp.file("bad_magic.l2ds"), bytes);
  CHECK_THROWS_AS(read_dataset(tmp.file("bad_magic.l2ds")), DataError);

  bytes = slurp(path);
  bytes[4] = 99;  // unsupported version
  dump(tmp.file("bad_version.l2ds"), bytes);
  CHECK_THROWS_AS(read_dataset(tmp.file("bad_version.l2ds")), DataError);

  bytes = slurp(path);
  bytes.pop_back();  // truncated payload
  dump(tmp.file("short.l2ds"), bytes);
  CHECK_THROWS_AS(read_dataset(tmp.file("short.l2ds")), DataError);

  CHECK_THROWS_AS(read_dataset(tmp.file("missing.l2ds")), DataError);
}

TEST_CASE("dataset append validates beam count") {
  DatasetArchive d;
  d.sensor.beam_count = 8;
  LidarScan scan;
  scan.sensor.beam_count = 4;
  scan.ranges.assign(4, 1.0f);
  scan.valid.assign(4, 1);
  CHECK_THROWS_AS(d.append(scan, Pose{0, 0, 0}), DataError);
}

TEST_CASE("checkpoint: roundtrip of values and optimizer state") {
  TempDir tmp;
  Rng rng(9);
  Dense a("a", 3, 2, rng);
  Dense b("b", 2, 2, rng);
  std::vector<Param*> params = {&a.weight, &a.bias, &b.weight, &b.bias};
  for (Param* p : params)
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      p->m[i] = rng.uniform(-1.0, 1.0);
      p->v[i] = rng.uniform01();
    }
  const std::string graph = "dense(3,2)|dense(2,2)";
  const std::string path = tmp.file("model.nnck");
  save_checkpoint(path, graph, params, {{"kind", "test"}, {"epoch", 7}},
                  /*opt_state=*/true, /*adam_t=*/42);

  Rng rng2(1234);  // different init must be overwritten on load
  Dense a2("a", 3, 2, rng2);
  Dense b2("b", 2, 2, rng2);
  std::vector<Param*> params2 = {&a2.weight, &a2.bias, &b2.weight, &b2.bias};
  const std::int64_t t = load_checkpoint(path, graph, params2, true);
  CHECK(t == 42);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::int64_t j = 0; j < params[i]->value.size(); ++j) {
      // values survive through the f32 narrowing exactly once
      CHECK(params2[i]->value[j] ==
            static_cast<double>(static_cast<float>(params[i]->value[j])));
      CHECK(params2[i]->m[j] ==
            static_cast<double>(static_cast<float>(params[i]->m[j])));
      CHECK(params2[i]->v[j] ==
            static_cast<double>(static_cast<float>(params[i]->v[j])));
    }
  }

  // saving the reloaded parameters reproduces the file bitwise
  const std::string path2 = tmp.file("model2.nnck");
  save_checkpoint(path2, graph, params2, {{"kind", "test"}, {"epoch", 7}}, true, 42);
  CHECK(slurp(path) == slurp(path2));

  // meta can be read without reconstructing the model
  const nlohmann::json meta = read_checkpoint_meta(path);
  CHECK(meta.at("kind") == "test");
  CHECK(meta.at("epoch") == 7);
}

TEST_CASE("checkpoint: structural mismatches are rejected") {
  TempDir tmp;
  Rng rng(9);
  Dense a("a", 3, 2, rng);
  std::vector<Param*> params = {&a.weight, &a.bias};
  const std::string path = tmp.file("model.nnck");
  save_checkpoint(path, "graph-a", params, {});

  // wrong graph spec
  CHECK_THROWS_AS(load_checkpoint(path, "graph-b", params), DataError);

  // wrong parameter name
  Dense renamed("z", 3, 2, rng);
  std::vector<Param*> bad_name = {&renamed.weight, &renamed.bias};
  CHECK_THROWS_AS(load_checkpoint(path, "graph-a", bad_name), DataError);

  // wrong shape
  Dense fat("a", 4, 2, rng);
  std::vector<Param*> bad_shape = {&fat.weight, &fat.bias};
  CHECK_THROWS_AS(load_checkpoint(path, "graph-a", bad_shape), DataError);

  // wrong parameter count
  std::vector<Param*> too_few = {&a.weight};
  CHECK_THROWS_AS(load_checkpoint(path, "graph-a", too_few), DataError);

  // asking for optimizer state that was never saved
  CHECK_THROWS_AS(load_checkpoint(path, "graph-a", params, true), DataError);

  // corrupted magic / version
  auto bytes = slurp(path);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NNCK");
  bytes[1] = 'X';
  dump(tmp.file("bad.nnck"), bytes);
  CHECK_THROWS_AS(load_checkpoint(tmp.file("bad.nnck"), "graph-a", params),
                  DataError);
  bytes = slurp(path);
  bytes[4] = 77;
  dump(tmp.file("badv.nnck"), bytes);
  CHECK_THROWS_AS(load_checkpoint(tmp.file("badv.nnck"), "graph-a", params),
                  DataError);
}

TEST_CASE("pgm output: header and payload") {
  TempDir tmp;
  LocalOccupancyImage img;
  img.resolution_px = 4;
  img.extent_m = 20.0;
  img.pixels.assign(16, 0);
  img.pixels[1 * 4 + 2] = 1;  // (ix=2, iy=1)

  const auto bytes = occupancy_to_bytes(img);
  REQUIRE(bytes.size() == 16);
  CHECK(bytes[6] == 255);
  CHECK(bytes[0] == 0);

  const std::string path = tmp.file("img.pgm");
  write_pgm(path, 4, 4, bytes);
  const auto file = slurp(path);
  const std::string header = "P5\n4 4\n255\n";
  REQUIRE(file.size() == header.size() + 16);
  CHECK(std::string(file.begin(), file.begin() + header.size()) == header);
  CHECK(static_cast<std::uint8_t>(file[header.size() + 6]) == 255);

  // byte-count validation
  CHECK_THROWS_AS(write_pgm(tmp.file("bad.pgm"), 4, 4,
                            std::vector<std::uint8_t>(15, 0)),
                  DataError);

  // probability scaling: round(p * 255) with clamping
  const auto probs = probability_to_bytes({0.0, 1.0, 0.5, 2.0, -1.0, 0.25});
  CHECK(probs[0] == 0);
  CHECK(probs[1] == 255);
  CHECK(probs[2] == 128);  // lround(127.5)
  CHECK(probs[3] == 255);
  CHECK(probs[4] == 0);
  CHECK(probs[5] == 64);
}

TEST_CASE("csv writer: layout and number formatting") {
  TempDir tmp;
  const std::string path = tmp.file("table.csv");
  {
    CsvWriter w(path);
    w.row({"epoch", "loss"});
    w.row({csv_num(static_cast<std::int64_t>(1)), csv_num(0.5)});
    w.row({csv_num(static_cast<std::int64_t>(2)), csv_num(123.25)});
  }
  std::ifstream is(path);
  std::string l1, l2, l3;
  std::getline(is, l1);
  std::getline(is, l2);
  std::getline(is, l3);
  CHECK(l1 == "epoch,loss");
  CHECK(l2 == "1,0.5");
  CHECK(l3 == "2,123.25");

  // shortest-round-trip doubles parse back exactly
  for (double v : {0.1, 1e-9, 123456.789, -2.5e17, 3.0}) {
    const std::string s = csv_num(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(csv_num(static_cast<std::int64_t>(-7)) == "-7");

  CHECK_THROWS_AS(CsvWriter("/nonexistent_dir_xyz/out.csv"), DataError);
}

TEST_CASE("lidar scan fields survive a dataset cycle through append") {
  // append stores invalid beams as NaN regardless of their in-memory range
  DatasetArchive d;
  d.sensor.beam_count = 4;
  LidarScan s;
  s.sensor = d.sensor;
  s.ranges = {1.0, 2.0, 3.0, 4.0};
  s.valid = {1, 0, 1, 1};
  d.append(s, Pose{1, 2, 0.5});
  CHECK(d.scan_count == 1);
  CHECK(std::isnan(d.scan(0)[1]));
  CHECK(d.scan(0)[2] == 3.0f);
  CHECK(d.pose(0).x == 1.0f);
}
