#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mir3/checkpoint.hpp>

#include <filesystem>
#include <fstream>

using namespace mir3;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mir3-ckpt-tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("checkpoint round-trip is bitwise stable") {
  CheckpointData data;
  Vector v(5);
  v << 0.1, -2.5, 1e-7, 3.25, -0.0;
  data.entries.emplace_back("actor.0.W0", v);
  Vector w(2);
  w << 42.0, -1.0;
  data.entries.emplace_back("actor.0.b0", w);

  const auto path_a = temp_file("a.ckpt");
  save_checkpoint(path_a, data);
  const CheckpointData loaded = load_checkpoint(path_a);

  REQUIRE(loaded.entries.size() == 2);
  CHECK(loaded.entries[0].first == "actor.0.W0");
  // Values widen deterministically from f32.
  for (Index i = 0; i < v.size(); ++i)
    CHECK(loaded.entries[0].second[i] == static_cast<Scalar>(static_cast<float>(v[i])));

  const auto path_b = temp_file("b.ckpt");
  save_checkpoint(path_b, loaded);
  CHECK(file_bytes(path_a) == file_bytes(path_b));
}

TEST_CASE("adversary checkpoints carry trailing partition flags") {
  CheckpointData data;
  Vector v(3);
  v << 1.0, 2.0, 3.0;
  data.entries.emplace_back("adv_actor.2.W0", v);
  data.trailing = {0, 0, 1, 0};

  const auto path = temp_file("adv.ckpt");
  save_checkpoint(path, data);
  const CheckpointData loaded = load_checkpoint(path);
  CHECK(loaded.entries.size() == 1);
  CHECK(loaded.trailing == std::vector<std::uint8_t>{0, 0, 1, 0});
}

TEST_CASE("corrupt files are rejected") {
  const auto path = temp_file("bad.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTMAGIC" << std::string(16, '\0');
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint(temp_file("missing.ckpt")), std::runtime_error);
}

TEST_CASE("collect/restore move parameters through stores by prefix") {
  Rng rng(5);
  Net net({3, 4}, {Activation::kRelu}, rng);
  CheckpointData data;
  collect_params(net.params(), "critic.1.", data);
  CHECK(data.contains("critic.1.W0"));
  CHECK(data.contains("critic.1.b0"));

  Net other({3, 4}, {Activation::kRelu}, rng);
  restore_params(data, "critic.1.", other.params());
  // Restored values are float-rounded copies only after disk round-trip; the
  // in-memory path is exact.
  CHECK((other.params().at("W0").values - net.params().at("W0").values).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK_THROWS_AS(restore_params(data, "actor.0.", other.params()), std::runtime_error);
}

TEST_CASE("sha256 matches a known vector") {
  CHECK(sha256_bytes("abc", 3) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
