// End-to-end checks of the ltcf binary: subcommands, artifacts, exit codes.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ltcf/data.hpp"
#include "ltcf/image_io.hpp"

namespace fs = std::filesystem;

namespace {

std::string bin() {
    const char* b = std::getenv("LTCF_BIN");
    REQUIRE(b != nullptr);
    return b;
}

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args) {
    const auto outfile = fs::temp_directory_path() / "ltcf_cli_out.txt";
    const std::string cmd = bin() + " " + args + " > " + outfile.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream is(outfile);
    std::stringstream ss;
    ss << is.rdbuf();
    r.out = ss.str();
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path root;
    explicit TempDir(const std::string& tag) {
        root = fs::temp_directory_path() / ("ltcf_cli_" + tag);
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~TempDir() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("inspect prints a consistent module table", "[cli]") {
    auto r1 = run("inspect");
    REQUIRE(r1.code == 0);
    CHECK(r1.out.find("TOTAL") != std::string::npos);
    CHECK(r1.out.find("cd(shared)") != std::string::npos);
    CHECK(r1.out.find("model card") != std::string::npos);

    auto r2 = run("inspect");
    CHECK(r1.out == r2.out);  // identical output on identical input

    // LTCF-Net* strictly below the full model
    auto star = run("inspect --no-fbp");
    REQUIRE(star.code == 0);
    auto total_of = [](const std::string& s) {
        const auto pos = s.rfind("params ");  // the summary line, not the header
        REQUIRE(pos != std::string::npos);
        return std::stod(s.substr(pos + 7));
    };
    CHECK(total_of(star.out) < total_of(r1.out));
}

TEST_CASE("train writes config, history, checkpoint, metrics", "[cli]") {
    TempDir td("train");
    const std::string out = (td.root / "run").string();
    auto r = run("train --synthetic 2 --synth-size 32 --epochs 2 --batch 2 --patch 32 --seed 3 "
                 "--max-tokens 256 --out " + out);
    REQUIRE(r.code == 0);

    CHECK(fs::exists(fs::path(out) / "config_resolved.json"));
    CHECK(fs::exists(fs::path(out) / "model.ckpt"));
    CHECK(fs::exists(fs::path(out) / "metrics.csv"));

    std::ifstream hist(fs::path(out) / "history.csv");
    REQUIRE(hist.good());
    std::string header;
    std::getline(hist, header);
    CHECK(header == "epoch,lr,total,s1,psnr,color,hist,perceptual,ssim");
    int lines = 0;
    for (std::string line; std::getline(hist, line);) {
        if (!line.empty()) ++lines;
    }
    CHECK(lines == 2);

    // ablation flags land in the echoed config
    const std::string out2 = (td.root / "lab").string();
    auto r2 = run("train --synthetic 1 --synth-size 32 --epochs 1 --patch 32 --branches lab "
                  "--no-fbp --max-tokens 256 --out " + out2);
    REQUIRE(r2.code == 0);
    const auto cfg = read_file(fs::path(out2) / "config_resolved.json");
    CHECK(cfg.find("\"branches\": \"lab\"") != std::string::npos);
    CHECK(cfg.find("\"use_fbp\": false") != std::string::npos);
}

TEST_CASE("enhance is deterministic and writes previews", "[cli]") {
    TempDir td("enhance");
    const std::string run_dir = (td.root / "run").string();
    auto tr = run("train --synthetic 1 --synth-size 32 --epochs 1 --patch 32 --seed 5 "
                  "--max-tokens 256 --out " + run_dir);
    REQUIRE(tr.code == 0);

    // input image
    ltcf::Rng rng(9);
    ltcf::Tensor img({24, 28, 3});
    for (auto& v : img.data) v = static_cast<float>(rng.uniform(0.0, 0.4));
    const auto in_path = td.root / "dark.png";
    ltcf::write_png(in_path.string(), img);

    const std::string out1 = (td.root / "o1").string();
    const std::string out2 = (td.root / "o2").string();
    const std::string ckpt = run_dir + "/model.ckpt";
    auto e1 = run("enhance " + ckpt + " " + in_path.string() + " --preview --out " + out1);
    REQUIRE(e1.code == 0);
    auto e2 = run("enhance " + ckpt + " " + in_path.string() + " --out " + out2);
    REQUIRE(e2.code == 0);

    REQUIRE(fs::exists(fs::path(out1) / "dark.png"));
    CHECK(fs::exists(fs::path(out1) / "preview_dark.png"));
    // identical bytes across runs
    CHECK(read_file(fs::path(out1) / "dark.png") == read_file(fs::path(out2) / "dark.png"));
    // output dimensions equal input dimensions
    auto enhanced = ltcf::read_image((fs::path(out1) / "dark.png").string());
    CHECK(enhanced.shape == img.shape);
}

TEST_CASE("eval reports per-image rows plus a mean that matches", "[cli]") {
    TempDir td("eval");
    const std::string run_dir = (td.root / "run").string();
    auto tr = run("train --synthetic 2 --synth-size 32 --epochs 1 --patch 32 --seed 7 "
                  "--max-tokens 256 --out " + run_dir);
    REQUIRE(tr.code == 0);

    const std::string out = (td.root / "ev").string();
    auto ev = run("eval " + run_dir + "/model.ckpt --synthetic 2 --synth-size 32 --seed 7 --out " +
                  out);
    REQUIRE(ev.code == 0);

    std::ifstream csv(fs::path(out) / "eval.csv");
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    CHECK(header == "name,psnr_db,ssim");
    double psum = 0, ssum = 0, pmean = -1, smean = -1;
    int rows = 0;
    for (std::string line; std::getline(csv, line);) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string name, p, s;
        std::getline(ss, name, ',');
        std::getline(ss, p, ',');
        std::getline(ss, s, ',');
        if (name == "MEAN") {
            pmean = std::stod(p);
            smean = std::stod(s);
        } else {
            psum += std::stod(p);
            ssum += std::stod(s);
            ++rows;
        }
    }
    REQUIRE(rows == 2);
    CHECK(pmean == Catch::Approx(psum / rows).margin(1e-6));
    CHECK(smean == Catch::Approx(ssum / rows).margin(1e-6));
}

TEST_CASE("exit codes are distinct per failure class", "[cli]") {
    TempDir td("codes");
    // ingestion: missing dataset directory
    auto ingest = run("train --data /nonexistent_ltcf_dataset --epochs 1 --out " +
                      (td.root / "a").string());
    CHECK(ingest.code == 3);

    // config: malformed alphas
    auto config = run("train --synthetic 1 --alphas 1,2 --epochs 1 --out " +
                      (td.root / "b").string());
    CHECK(config.code == 2);

    // io: unreadable checkpoint
    auto io = run("eval /nonexistent.ckpt --synthetic 1 --out " + (td.root / "c").string());
    CHECK(io.code == 5);

    // config: unknown flag
    auto parse = run("train --definitely-not-a-flag");
    CHECK(parse.code == 2);

    // config: branches typo
    auto branches = run("inspect --branches lba");
    CHECK(branches.code == 2);
}
