#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "mollikit/runner.hpp"

using namespace mollikit;
using namespace mollikit::runner;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mollikit_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name, const std::string& content) const {
        const fs::path p = path / name;
        write_text_file(p, content);
        return p.string();
    }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

using Flags = std::vector<std::pair<std::string, std::string>>;

}  // namespace

TEST_CASE("empty config plus a system flag resolves the table defaults") {
    const TempDir tmp;
    const std::string cfg_path = tmp.file("empty.cfg", "");
    const ExperimentConfig cfg =
        parse_config("train", cfg_path, {{"system", "quadrotor"}});
    CHECK(cfg.system == sysdyn::SystemKind::PlanarQuadrotor);
    CHECK(cfg.batch == 16);
    CHECK(cfg.epochs == 50);
    CHECK(cfg.horizon == 1000);
    CHECK(cfg.gamma == 0.99);
    CHECK(cfg.sigma == 0.1);
    CHECK(cfg.delta == 0.001);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1});
}

TEST_CASE("pendulum defaults differ where the experiments differ") {
    const ExperimentConfig cfg = parse_config("train", "", {{"system", "double_pendulum"}});
    CHECK(cfg.delta == 1.0);
    const ExperimentConfig sweep = parse_config("sweep", "", {{"system", "pendulum"}});
    CHECK(sweep.batch == 32);
    CHECK(sweep.epochs == 100);
    CHECK(sweep.sigmas == std::vector<double>{0.005, 0.05, 0.5, 5.0});
}

TEST_CASE("constraint violations name the key") {
    CHECK_THROWS_WITH(parse_config("train", "", {{"gamma", "1.5"}}),
                      Catch::Matchers::ContainsSubstring("gamma must lie in (0,1)"));
    CHECK_THROWS_WITH(parse_config("train", "", {{"batch", "0"}}),
                      Catch::Matchers::ContainsSubstring("batch"));
    CHECK_THROWS_WITH(parse_config("train", "", {{"sigma", "-1"}}),
                      Catch::Matchers::ContainsSubstring("sigma"));
    CHECK_THROWS_WITH(parse_config("train", "", {{"grid_n", "100"}}),
                      Catch::Matchers::ContainsSubstring("power of two"));
}

TEST_CASE("unknown keys and malformed values are rejected with their line") {
    const TempDir tmp;
    const std::string cfg_path =
        tmp.file("bad.cfg", "# comment\ngamma=0.99\nfrobnicate=3\n");
    CHECK_THROWS_WITH(parse_config("train", cfg_path, {}),
                      Catch::Matchers::ContainsSubstring("unknown key 'frobnicate' (line 3)"));
    const std::string bad_type = tmp.file("bad2.cfg", "batch=many\n");
    CHECK_THROWS_WITH(parse_config("train", bad_type, {}),
                      Catch::Matchers::ContainsSubstring("expected integer"));
    CHECK_THROWS_WITH(parse_config("dance", "", {}),
                      Catch::Matchers::ContainsSubstring("unknown command"));
}

TEST_CASE("seed lists accept commas and inclusive ranges") {
    const ExperimentConfig a = parse_config("train", "", {{"seeds", "1,2,3,4,5"}});
    CHECK(a.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    const ExperimentConfig b = parse_config("train", "", {{"seeds", "1..5"}});
    CHECK(b.seeds == a.seeds);
    const ExperimentConfig c = parse_config("train", "", {{"seeds", "7,10..12"}});
    CHECK(c.seeds == std::vector<std::uint64_t>{7, 10, 11, 12});
    CHECK_THROWS(parse_config("train", "", {{"seeds", ""}}));
    const ExperimentConfig d =
        parse_config("train", "", {{"sigma", "0.05"}, {"seeds", "1,2,3,4,5"}});
    CHECK(d.sigma == 0.05);
    CHECK(d.seeds.size() == 5);
}

TEST_CASE("flags override config-file entries") {
    const TempDir tmp;
    const std::string cfg_path = tmp.file("base.cfg", "gamma=0.9\nbatch=4 # trailing comment\n");
    const ExperimentConfig cfg = parse_config("train", cfg_path, {{"gamma", "0.95"}});
    CHECK(cfg.gamma == 0.95);
    CHECK(cfg.batch == 4);
}

TEST_CASE("manifest lists every resolved key") {
    const ExperimentConfig cfg = parse_config("train", "", {{"system", "quadrotor"}});
    const std::string manifest = manifest_string(cfg);
    for (const char* key :
         {"command=", "system=", "batch=", "epochs=", "horizon=", "gamma=", "delta=", "sigma=",
          "seeds=", "init=", "baseline=", "svg=", "scan_points=", "grid_n=", "mle_steps=",
          "holder_h0=", "timestamp="})
        CHECK(manifest.find(key) != std::string::npos);
}

TEST_CASE("train command writes per-seed CSVs and checkpoints, reproducibly") {
    const TempDir tmp;
    Flags flags = {{"system", "quadrotor"}, {"epochs", "2"},        {"batch", "2"},
                   {"horizon", "40"},       {"seeds", "1,2"},       {"out", tmp.sub("a")}};
    run(parse_config("train", "", flags));
    flags.back().second = tmp.sub("b");
    run(parse_config("train", "", flags));

    for (const char* name : {"train_seed1.csv", "train_seed2.csv", "policy_seed1.txt"}) {
        CAPTURE(name);
        REQUIRE(fs::exists(fs::path(tmp.sub("a")) / name));
        CHECK(read_text_file(fs::path(tmp.sub("a")) / name) ==
              read_text_file(fs::path(tmp.sub("b")) / name));
    }
    const std::string csv = read_text_file(fs::path(tmp.sub("a")) / "train_seed1.csv");
    CHECK(csv.rfind("epoch,seed,sigma,J_det,J_stoch_mean,grad_norm\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + epochs 0..2
}

TEST_CASE("svg emission does not change the CSV bytes") {
    const TempDir tmp;
    Flags base = {{"system", "quadrotor"}, {"epochs", "1"}, {"batch", "2"},
                  {"horizon", "30"},       {"seeds", "3"},  {"out", tmp.sub("plain")}};
    run(parse_config("train", "", base));
    base.back().second = tmp.sub("svg");
    base.emplace_back("svg", "true");
    run(parse_config("train", "", base));

    CHECK(read_text_file(fs::path(tmp.sub("plain")) / "train_seed3.csv") ==
          read_text_file(fs::path(tmp.sub("svg")) / "train_seed3.csv"));
    CHECK(fs::exists(fs::path(tmp.sub("svg")) / "train.svg"));
    CHECK_FALSE(fs::exists(fs::path(tmp.sub("plain")) / "train.svg"));
}

TEST_CASE("simulate writes the trajectory CSV schema") {
    const TempDir tmp;
    run(parse_config("simulate", "",
                     {{"system", "quadrotor"}, {"horizon", "5"}, {"out", tmp.sub("sim")}}));
    const std::string csv = read_text_file(fs::path(tmp.sub("sim")) / "trajectory.csv");
    CHECK(csv.rfind("k,s_1,s_2,s_3,s_4,s_5,s_6,a_1,a_2,reward\n", 0) == 0);
    CHECK(fs::exists(fs::path(tmp.sub("sim")) / "manifest.txt"));
}

TEST_CASE("scan and qscan emit the grid schema") {
    const TempDir tmp;
    run(parse_config("scan", "",
                     {{"system", "quadrotor"},
                      {"horizon", "50"},
                      {"scan_points", "5"},
                      {"out", tmp.sub("scan")}}));
    const std::string csv = read_text_file(fs::path(tmp.sub("scan")) / "scan.csv");
    CHECK(csv.rfind("i,j,off1,off2,value\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);

    run(parse_config("qscan", "",
                     {{"system", "quadrotor"},
                      {"horizon", "50"},
                      {"scan_points", "5"},
                      {"scan_dims", "2"},
                      {"out", tmp.sub("qscan")}}));
    const std::string qcsv = read_text_file(fs::path(tmp.sub("qscan")) / "qscan.csv");
    CHECK(std::count(qcsv.begin(), qcsv.end(), '\n') == 26);
}

TEST_CASE("backward command writes the amplification report") {
    const TempDir tmp;
    run(parse_config("backward", "",
                     {{"grid_n", "256"}, {"noise_mode", "8"}, {"noise_eps", "1e-6"},
                      {"backward_kmax", "10"}, {"out", tmp.sub("bw")}}));
    const std::string csv = read_text_file(fs::path(tmp.sub("bw")) / "amplification.csv");
    CHECK(csv.rfind("k,omega,factor\n", 0) == 0);
    CHECK(csv.find("2980.9579870417283") != std::string::npos);  // e^8 at mode 8
}

TEST_CASE("heat, uncertainty, mle, holder and lqr commands produce their artifacts") {
    const TempDir tmp;
    run(parse_config("heat", "",
                     {{"grid_n", "128"}, {"heat_times", "8"}, {"out", tmp.sub("heat")}}));
    CHECK(read_text_file(fs::path(tmp.sub("heat")) / "heatfield.csv").rfind("t,x,u\n", 0) == 0);

    run(parse_config("uncertainty", "",
                     {{"grid_n", "512"}, {"uncertainty_count", "2"}, {"out", tmp.sub("unc")}}));
    const std::string ucsv = read_text_file(fs::path(tmp.sub("unc")) / "uncertainty.csv");
    CHECK(std::count(ucsv.begin(), ucsv.end(), '\n') == 6);  // header + 3 canonical + 2 random

    run(parse_config("mle", "",
                     {{"system", "quadrotor"}, {"init", "lqr"}, {"mle_steps", "2000"},
                      {"mle_renorm", "20"}, {"out", tmp.sub("mle")}}));
    CHECK(read_text_file(fs::path(tmp.sub("mle")) / "mle.csv")
              .rfind("system,lambda,delta0,steps\n", 0) == 0);

    run(parse_config("holder", "",
                     {{"holder_target", "weierstrass"}, {"out", tmp.sub("hold")}}));
    CHECK(fs::exists(fs::path(tmp.sub("hold")) / "holder_scales.csv"));
    CHECK(fs::exists(fs::path(tmp.sub("hold")) / "holder_fit.csv"));

    run(parse_config("lqr", "", {{"system", "quadrotor"}, {"out", tmp.sub("lqr")}}));
    const std::string gain = read_text_file(fs::path(tmp.sub("lqr")) / "lqr_gain.txt");
    CHECK(gain.rfind("linear 6 2 0 0\n", 0) == 0);
}

TEST_CASE("mlp init trains a 16-unit tanh controller end to end") {
    const TempDir tmp;
    run(parse_config("train", "",
                     {{"system", "double_pendulum"}, {"init", "mlp"}, {"epochs", "1"},
                      {"batch", "2"}, {"horizon", "25"}, {"out", tmp.sub("mlp")}}));
    const std::string ckpt = read_text_file(fs::path(tmp.sub("mlp")) / "policy_seed1.txt");
    CHECK(ckpt.rfind("mlp 4 2 16", 0) == 0);
}

TEST_CASE("checkpoint init loads a saved policy") {
    const TempDir tmp;
    const auto p = policy::initial_policy(sysdyn::SystemKind::PlanarQuadrotor, 0.0);
    const std::string ckpt = tmp.file("policy.txt", policy::checkpoint_string(p));
    run(parse_config("simulate", "",
                     {{"system", "quadrotor"}, {"horizon", "5"}, {"init", ckpt},
                      {"out", tmp.sub("fromckpt")}}));
    const std::string csv = read_text_file(fs::path(tmp.sub("fromckpt")) / "trajectory.csv");
    CHECK(csv.find("4.9050000000000002,4.9050000000000002") != std::string::npos);

    CHECK_THROWS_WITH(parse_config("simulate", "", {{"init", tmp.sub("missing.txt")}}),
                      Catch::Matchers::ContainsSubstring("init"));
}

TEST_CASE("sweep emits per-configuration records plus the dispersion summary") {
    const TempDir tmp;
    run(parse_config("sweep", "",
                     {{"system", "double_pendulum"},
                      {"sigmas", "0.05,0.5"},
                      {"seeds", "1,2"},
                      {"epochs", "1"},
                      {"batch", "2"},
                      {"horizon", "30"},
                      {"out", tmp.sub("sweep")}}));
    const std::string summary = read_text_file(fs::path(tmp.sub("sweep")) / "sweep_summary.csv");
    CHECK(summary.rfind("sigma,seed,j_std\n", 0) == 0);
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 5);
    CHECK(fs::exists(fs::path(tmp.sub("sweep")) / "train_sigma0.050000000000000003_seed2.csv"));
}
