#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args)
{
    const std::string cmd = std::string(MWDML_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("mwdml_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream(path) << text;
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kConfig = R"({
  "dgp": {"shape": [4, 3],
          "tau": {"name": "additive", "params": {"offset": 1.0}},
          "latent": {"default": {"kind": "rademacher"}}},
  "model": {"name": "location"},
  "oracle": {"mode": "exact"},
  "replications": 5,
  "seed": 1
})";

}  // namespace

TEST_SUITE("cli")
{
    TEST_CASE("partition writes the groups")
    {
        const auto dir = scratch("partition");
        CHECK(run("partition --shape 3,2 --mask 11 --out " + dir.string()) == 0);
        const auto text = read_file(dir / "partition.csv");
        CHECK(text == "group_id,i_1,i_2\n1,1,1\n1,2,2\n2,2,1\n2,3,2\n3,3,1\n3,1,2\n");
    }

    TEST_CASE("simulate and mc succeed on a valid config")
    {
        const auto dir = scratch("ok");
        write_file(dir / "c.json", kConfig);
        CHECK(run("simulate --config " + (dir / "c.json").string() + " --out " + (dir / "sim").string()) == 0);
        CHECK(run("mc --config " + (dir / "c.json").string() + " --out " + (dir / "mc").string()) == 0);
        CHECK(fs::exists(dir / "mc" / "summary.json"));
        CHECK(fs::exists(dir / "mc" / "replications.csv"));
    }

    TEST_CASE("configuration problems exit with 2")
    {
        const auto dir = scratch("bad");
        write_file(dir / "bad.json", R"({"dgp": {"shape": [0, 3]}})");
        CHECK(run("mc --config " + (dir / "bad.json").string() + " --out " + dir.string()) == 2);
        write_file(dir / "broken.json", "{ nope");
        CHECK(run("estimate --config " + (dir / "broken.json").string()) == 2);
        CHECK(run("mc") == 2);                                     // no config
        CHECK(run("partition --shape 3,x --mask 11") == 2);        // malformed shape
        CHECK(run("mc --threads 0 --config " + (dir / "bad.json").string()) == 2);
    }

    TEST_CASE("I/O problems exit with 3")
    {
        const auto dir = scratch("io");
        CHECK(run("mc --config " + (dir / "missing.json").string()) == 3);
        write_file(dir / "c.json", kConfig);
        write_file(dir / "blocker", "x");  // a file where a directory is expected
        CHECK(run("mc --config " + (dir / "c.json").string() + " --out " + (dir / "blocker" / "sub").string()) == 3);
    }
}
