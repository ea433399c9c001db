#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mir3/format.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "mir3-cli-tests";

struct CommandResult {
  int exit_code;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  const fs::path log = kRoot / "last-output.txt";
  fs::create_directories(kRoot);
  const std::string cmd = std::string(MIR3_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::string output((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return {WEXITSTATUS(status), output};
}

const std::string kTinyOverrides =
    "--set env.n_agents=2 --set env.max_episode_len=15 --set train.total_timesteps=60 "
    "--set train.hidden_dim=16 --set train.buffer_size=32 --set train.batch_size=2 "
    "--set mir3.mi_hidden_dim=16 --set mir3.mi_batch_size=8 --set eval.episodes=3 "
    "--set attack.budget_steps=45";

fs::path single_run_dir(const fs::path& root) {
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) return entry.path();
  return {};
}

std::string file_text(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("missing config file exits 1 and names the path") {
  const auto r = run_cli("train --config /nonexistent/conf.ini");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("/nonexistent/conf.ini") != std::string::npos);
}

TEST_CASE("invalid config values exit 1 with the field path") {
  const auto r = run_cli("train --set train.gamma=2.0");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("train.gamma") != std::string::npos);

  const auto unknown = run_cli("train --set train.turbo=1");
  CHECK(unknown.exit_code == 1);
  CHECK(unknown.output.find("turbo") != std::string::npos);
}

TEST_CASE("train/attack/eval/plot pipeline on a tiny configuration") {
  const fs::path out = kRoot / "pipeline";
  fs::remove_all(out);

  const auto train = run_cli("train --algo mir3 --seed 3 --deterministic --out-dir " +
                             out.string() + " " + kTinyOverrides);
  REQUIRE(train.exit_code == 0);
  const fs::path run_dir = single_run_dir(out);
  REQUIRE_FALSE(run_dir.empty());
  CHECK(fs::exists(run_dir / "checkpoint_final.ckpt"));
  CHECK(fs::exists(run_dir / "metrics.csv"));
  CHECK(fs::exists(run_dir / "trajectory.csv"));

  SUBCASE("rerunning the same config and seed is refused") {
    const auto again = run_cli("train --algo mir3 --seed 3 --deterministic --out-dir " +
                               out.string() + " " + kTinyOverrides);
    CHECK(again.exit_code == 1);
    CHECK(again.output.find("already exists") != std::string::npos);
  }

  SUBCASE("attack rejects the all-defender partition") {
    const auto r = run_cli("attack " + run_dir.string() + " --partition 00");
    CHECK(r.exit_code == 1);
  }
  SUBCASE("attack rejects a wrong-length partition") {
    const auto r = run_cli("attack " + run_dir.string() + " --partition 0001");
    CHECK(r.exit_code == 1);
  }

  SUBCASE("attacked eval without adversaries exits 2 listing the gaps") {
    const auto r = run_cli("eval " + run_dir.string() + " --mode attacked");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("adversary.ckpt") != std::string::npos);
  }

  SUBCASE("explicit attack then cooperative and attacked eval") {
    const auto attack = run_cli("attack " + run_dir.string() + " --partition 01");
    REQUIRE(attack.exit_code == 0);

    const fs::path coop_csv = out / "coop.csv";
    const auto coop = run_cli("eval " + run_dir.string() + " --mode cooperative --out " +
                              coop_csv.string());
    REQUIRE(coop.exit_code == 0);
    CHECK(file_text(coop_csv).rfind("scenario,defender_seed,partition,n_episodes,mean_return,ci95",
                                    0) == 0);

    const fs::path atk_csv = out / "attacked.csv";
    const auto attacked = run_cli("eval " + run_dir.string() +
                                  " --mode attacked --train-attackers --out " + atk_csv.string());
    REQUIRE(attacked.exit_code == 0);

    const auto bars = run_cli("plot bars " + coop_csv.string() + " " + atk_csv.string() +
                              " --out " + (out / "bars.svg").string());
    CHECK(bars.exit_code == 0);
    CHECK(fs::exists(out / "bars.svg"));

    const auto traj = run_cli("plot trajectory " + (run_dir / "trajectory.csv").string() +
                              " --out " + (out / "traj.svg").string());
    CHECK(traj.exit_code == 0);
    CHECK(file_text(out / "traj.svg").find("<svg") == 0);
  }
}

TEST_CASE("the lambda=0 metrics CSV is byte-identical to the plain backbone's") {
  const fs::path out = kRoot / "reduction";
  fs::remove_all(out);

  const auto a = run_cli("train --algo maddpg --seed 11 --deterministic --out-dir " +
                         (out / "a").string() + " " + kTinyOverrides);
  const auto b = run_cli("train --algo mir3 --set mir3.lambda=0 --seed 11 --deterministic "
                         "--out-dir " + (out / "b").string() + " " + kTinyOverrides);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  const std::string ma = file_text(single_run_dir(out / "a") / "metrics.csv");
  const std::string mb = file_text(single_run_dir(out / "b") / "metrics.csv");
  REQUIRE_FALSE(ma.empty());
  CHECK(ma == mb);
}

TEST_CASE("plot rejects empty and schema-mismatched CSVs") {
  fs::create_directories(kRoot);
  const fs::path empty = kRoot / "empty.csv";
  std::ofstream(empty).close();
  CHECK(run_cli("plot ablation " + empty.string()).exit_code != 0);

  const fs::path wrong = kRoot / "wrong.csv";
  std::ofstream(wrong) << "a,b\n1,2\n";
  const auto r = run_cli("plot ablation " + wrong.string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("lambda") != std::string::npos);
}

TEST_CASE("bench reports seconds per epoch and the algorithm ratio") {
  const auto r = run_cli("bench --epochs 2 " + kTinyOverrides);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("maddpg:") != std::string::npos);
  CHECK(r.output.find("mir3:") != std::string::npos);
  CHECK(r.output.find("ratio mir3/maddpg") != std::string::npos);
}

TEST_CASE("sweep emits one row per lambda with the pinned header") {
  const fs::path out = kRoot / "sweep";
  fs::remove_all(out);
  const auto r = run_cli("sweep --lambda 0 5e-5 --seeds 1 2 --out-dir " + out.string() +
                         " --out " + (out / "sweep.csv").string() + " " + kTinyOverrides +
                         " --deterministic --jobs 2");
  REQUIRE(r.exit_code == 0);
  const std::string text = file_text(out / "sweep.csv");
  CHECK(text.rfind("lambda,cooperative_mean,cooperative_ci95,attacked_mean,attacked_ci95", 0) ==
        0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);  // header + 2 rows

  SUBCASE("ablation plot renders from the sweep CSV") {
    const auto plot = run_cli("plot ablation " + (out / "sweep.csv").string() + " --out " +
                              (out / "ablation.svg").string());
    CHECK(plot.exit_code == 0);
    CHECK(fs::exists(out / "ablation.svg"));
  }
}
