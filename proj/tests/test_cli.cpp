// Exercises the command-line harness as a user would: subprocesses only,
// checking exit codes, printed output, and the files left behind.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "tuber/runconfig.hpp"

using namespace tuber;
using nlohmann::json;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               (tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CmdResult {
    int code;
    std::string out;  // stdout and stderr interleaved
};

CmdResult run(const std::string& cmd) {
    FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    const int status = ::pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string tuber_bin() { return TUBER_BIN; }

RunConfig tiny_config(const std::string& root) {
    RunConfig cfg;
    cfg.data.height = 24;
    cfg.data.width = 24;
    cfg.data.t_in = 8;
    cfg.data.t_out = 4;
    cfg.data.min_actors = 1;
    cfg.data.max_actors = 2;
    cfg.data.class_count = 4;
    cfg.data.min_active = 3;
    cfg.data.max_active = 6;
    cfg.data.seed = 11;
    cfg.model.t_in = 8;
    cfg.model.t_out = 4;
    cfg.model.label_count = 5;
    cfg.model.tubelet_count = 4;
    cfg.model.model_dim = 16;
    cfg.model.head_count = 2;
    cfg.model.encoder_layers = 1;
    cfg.model.decoder_layers = 1;
    cfg.model.compress_tokens0 = 16;
    cfg.model.compress_tokens1 = 8;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 2;
    cfg.optim.transformer_lr = 1e-3;
    cfg.optim.backbone_lr = 1e-4;
    cfg.data_dir = root + "/data";
    cfg.out_dir = root + "/out";
    cfg.seed = 7;
    return cfg;
}

std::string write_config(const TempDir& dir) {
    const std::string path = dir.str() + "/run.json";
    std::ofstream out(path);
    out << run_config_to_json(tiny_config(dir.str()));
    return path;
}

// Every file in `a` must exist in `b` with identical bytes, and vice versa.
bool dirs_equal(const std::filesystem::path& a, const std::filesystem::path& b) {
    size_t count_a = 0;
    for (const auto& entry : std::filesystem::directory_iterator(a)) {
        ++count_a;
        const auto other = b / entry.path().filename();
        if (!std::filesystem::exists(other)) return false;
        if (slurp(entry.path()) != slurp(other)) return false;
    }
    size_t count_b = 0;
    for ([[maybe_unused]] const auto& entry : std::filesystem::directory_iterator(b)) ++count_b;
    return count_a == count_b;
}

}  // namespace

TEST_CASE("generate-data is deterministic and guards non-empty directories") {
    TempDir dir("tuber_cli_gen");
    const std::string cfg = write_config(dir);
    const std::string base = tuber_bin() + " generate-data --config " + cfg + " --count 10 ";

    auto first = run(base + "--out " + dir.str() + "/a --workers 2");
    CHECK(first.code == 0);
    CHECK(first.out.find("wrote 10 samples") != std::string::npos);
    CHECK(first.out.find("seed 11") != std::string::npos);
    CHECK(first.out.find("class 0:") != std::string::npos);
    CHECK(std::filesystem::exists(dir.path / "a/manifest.json"));

    auto second = run(base + "--out " + dir.str() + "/b");
    CHECK(second.code == 0);
    CHECK(dirs_equal(dir.path / "a", dir.path / "b"));

    auto refuse = run(base + "--out " + dir.str() + "/a");
    CHECK(refuse.code == 2);
    CHECK(refuse.out.find("--force") != std::string::npos);
    CHECK(run(base + "--out " + dir.str() + "/a --force").code == 0);
}

TEST_CASE("missing config file names the path") {
    auto r = run(tuber_bin() + " generate-data --config /no/such/cfg.json --count 1 --out /tmp/x");
    CHECK(r.code == 1);
    CHECK(r.out.find("/no/such/cfg.json") != std::string::npos);
}

TEST_CASE("config seed yields to the seed override") {
    TempDir dir("tuber_cli_seed");
    const std::string cfg = write_config(dir);
    auto r = run("TUBER_SEED=99 " + tuber_bin() + " generate-data --config " + cfg +
                 " --count 4 --out " + dir.str() + "/d");
    CHECK(r.code == 0);
    CHECK(r.out.find("seed 99") != std::string::npos);

    auto bad = run("TUBER_SEED=banana " + tuber_bin() + " generate-data --config " + cfg +
                   " --count 4 --out " + dir.str() + "/e");
    CHECK(bad.code == 1);
}

TEST_CASE("train, eval, and infer run end to end") {
    TempDir dir("tuber_cli_pipe");
    const std::string cfg = write_config(dir);
    const std::string data = dir.str() + "/data";
    REQUIRE(run(tuber_bin() + " generate-data --config " + cfg + " --count 10 --out " + data)
                .code == 0);

    const std::string out = dir.str() + "/out";
    auto train = run(tuber_bin() + " train --config " + cfg + " --data " + data + " --out " + out);
    CHECK(train.code == 0);
    CHECK(train.out.find("epoch 0") != std::string::npos);
    CHECK(std::filesystem::exists(out + "/best.ckpt"));
    CHECK(std::filesystem::exists(out + "/last.ckpt"));
    const std::string csv = slurp(out + "/metrics.csv");
    CHECK(csv.rfind("step,epoch,train_loss,val_frame_map,lr\n", 0) == 0);

    // A second run from the same inputs must reproduce both artifacts exactly.
    const std::string out2 = dir.str() + "/out2";
    REQUIRE(run(tuber_bin() + " train --config " + cfg + " --data " + data + " --out " + out2)
                .code == 0);
    CHECK(slurp(out + "/last.ckpt") == slurp(out2 + "/last.ckpt"));
    CHECK(csv == slurp(out2 + "/metrics.csv"));

    const std::string report = dir.str() + "/report.json";
    auto ev = run(tuber_bin() + " eval --ckpt " + out + "/last.ckpt --data " + data +
                  " --report " + report + " --workers 2");
    CHECK(ev.code == 0);
    CHECK(ev.out.find("frame-mAP@0.50") != std::string::npos);
    const json rep = json::parse(slurp(report));
    CHECK(rep.at("clip_count").get<int>() == 10);
    CHECK(rep.at("use_switch").get<bool>());
    CHECK(rep.at("frame_map").contains("map"));
    CHECK(rep.at("frame_map").contains("per_class"));
    CHECK(rep.at("video_map").contains("at_02"));
    CHECK(rep.at("video_map").contains("at_05"));
    CHECK(rep.at("video_map").contains("avg_05_095"));

    auto off = run(tuber_bin() + " eval --ckpt " + out + "/last.ckpt --data " + data +
                   " --no-switch --report " + report);
    CHECK(off.code == 0);
    CHECK_FALSE(json::parse(slurp(report)).at("use_switch").get<bool>());

    const std::string det = dir.str() + "/det.json";
    const std::string frames = dir.str() + "/frames";
    auto inf = run(tuber_bin() + " infer --ckpt " + out + "/last.ckpt --clip " + data +
                   "/clip_000002.bin --out " + det + " --dump-frames " + frames);
    CHECK(inf.code == 0);
    const json d = json::parse(slurp(det));
    CHECK(d.contains("video_id"));
    REQUIRE(d.at("clips").size() == 1);
    CHECK(d.at("clips")[0].at("clip_index").get<int>() == 0);
    const auto& tubelets = d.at("clips")[0].at("tubelets");
    CHECK(tubelets.size() <= 4);
    for (const auto& tube : tubelets) {
        CHECK(tube.at("class_id").get<int>() >= 0);
        CHECK(tube.at("score").get<double>() >= 0.0);
        CHECK(tube.at("score").get<double>() <= 1.0);
        REQUIRE(tube.at("frames").size() == 4);
        for (const auto& fr : tube.at("frames")) {
            const int t = fr.at("t").get<int>();
            CHECK(t >= 0);
            CHECK(t < 4);
            REQUIRE(fr.at("box").size() == 4);
            for (const auto& v : fr.at("box")) {
                CHECK(v.get<double>() >= 0.0);
                CHECK(v.get<double>() <= 1.0);
            }
            fr.at("active").get<bool>();
        }
    }

    // Annotation granularity: one image per output frame, 24x24 binary pixmap.
    for (int t = 0; t < 4; ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%03d.ppm", t);
        const std::string img = slurp(frames + "/" + name);
        CHECK(img.rfind("P6\n24 24\n255\n", 0) == 0);
        CHECK(img.size() == 13 + 24 * 24 * 3);
    }

    const std::string det2 = dir.str() + "/det2.json";
    REQUIRE(run(tuber_bin() + " infer --ckpt " + out + "/last.ckpt --clip " + data +
                "/clip_000002.bin --out " + det2)
                .code == 0);
    CHECK(slurp(det) == slurp(det2));

    std::ofstream(dir.str() + "/garbage.bin") << "not a tensor";
    CHECK(run(tuber_bin() + " infer --ckpt " + out + "/last.ckpt --clip " + dir.str() +
              "/garbage.bin --out " + det2)
              .code == 2);

    CHECK(run(tuber_bin() + " eval --ckpt " + out + "/last.ckpt --data /no/such/dir").code == 2);
}

TEST_CASE("grad-check covers every scope and rejects unknown ones") {
    for (const std::string scope : {"primitives", "blocks", "end2end"}) {
        auto r = run(tuber_bin() + " grad-check --scope " + scope);
        CHECK(r.code == 0);
        CHECK(r.out.find("FAIL") == std::string::npos);
        CHECK(r.out.find("all ") != std::string::npos);
    }
    CHECK(run(tuber_bin() + " grad-check --scope everything").code == 1);
}

TEST_CASE("bench-attention reports the factorized interaction counts") {
    auto r = run(tuber_bin() + " bench-attention");
    CHECK(r.code == 0);
    CHECK(r.out.find("factorized 22560") != std::string::npos);
    CHECK(r.out.find("full 230400") != std::string::npos);
    CHECK(r.out.find("peak score buffer") != std::string::npos);
}

TEST_CASE("usage errors exit with 1") {
    CHECK(run(tuber_bin() + " --help").code == 0);
    CHECK(run(tuber_bin()).code == 1);
    CHECK(run(tuber_bin() + " no-such-command").code == 1);
    CHECK(run(tuber_bin() + " train --config only.json").code == 1);  // missing required flags
}
