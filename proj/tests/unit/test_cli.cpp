#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "retrocap/cli.hpp"
#include "retrocap/embedding_store.hpp"
#include "retrocap/toy_corpus.hpp"

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "retrocap");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = retrocap::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s, const std::string& prefix) {
  std::istringstream in(s);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.rfind(prefix, 0) == 0;
  return n;
}

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "retrocap_cli_test";
  std::filesystem::create_directories(dir);
  return dir;
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Cli, HelpExitsZero) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"train", "--help"}).code, 0);
}

TEST(Cli, UnknownFlagIsNamed) {
  const auto r = run({"retrieve", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);
}

TEST(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(run({}).code, 1); }

TEST(Cli, DiagnoseNeedsSeed) { EXPECT_EQ(run({"diagnose", "--synthetic"}).code, 1); }

TEST(Cli, DiagnoseSweepReport) {
  const auto r = run({"diagnose", "--synthetic", "--seed", "1", "--n", "200", "--dim", "32", "--queries", "20"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(r.out, "sigma_r="), 11u);
  const auto again = run({"diagnose", "--synthetic", "--seed", "1", "--n", "200", "--dim", "32", "--queries", "20"});
  EXPECT_EQ(again.out, r.out);
}

TEST(Cli, DiagnoseRejectsBadSweep) {
  EXPECT_EQ(run({"diagnose", "--synthetic", "--seed", "1", "--sweep", "0:x:1"}).code, 1);
}

TEST(Cli, EvalSelfReferenced) {
  const auto dir = temp_dir();
  write(dir / "cands.txt", "a dog runs on grass\na red bus on a street\n");
  write(dir / "refs.txt", "a dog runs on grass\na red bus on a street\n");
  const auto r =
      run({"eval", "--candidates", (dir / "cands.txt").string(), "--references", (dir / "refs.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n') + 1), "bleu@4=1.000000 cider=10.000000\n");
  EXPECT_EQ(count_lines(r.out, "item="), 2u);
  EXPECT_EQ(run({"eval", "--candidates", (dir / "missing.txt").string(), "--references",
                 (dir / "refs.txt").string()})
                .code,
            2);
}

TEST(Cli, FilterEntitiesFromFile) {
  const auto dir = temp_dir();
  write(dir / "pool.txt", "a dog and a cat\ntwo dogs on a bench\na dog sleeping\n");
  const auto r = run({"filter-entities", "--in", (dir / "pool.txt").string(), "--tau", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("There are dog in the image."), std::string::npos) << r.out;
  const auto none = run({"filter-entities", "--in", (dir / "pool.txt").string(), "--tau", "4"});
  EXPECT_NE(none.out.find("There is nothing in the image."), std::string::npos) << none.out;
}

TEST(Cli, RetrieveFromFiles) {
  const auto dir = temp_dir();
  const std::vector<std::string> captions = {"a dog on grass", "a red bus", "a cat on a sofa"};
  retrocap::save_embeddings(dir / "index.bin", retrocap::hash_embed_all(captions, 16, 2));
  retrocap::save_embeddings(dir / "query.bin",
                            retrocap::EmbeddingMatrix::from_rows(16, {retrocap::hash_embed("a dog", 16, 2)}));
  write(dir / "index.txt", "a dog on grass\na red bus\na cat on a sofa\n");
  const std::vector<std::string> base = {"retrieve", "--index-embeddings", (dir / "index.bin").string(),
                                         "--index-corpus", (dir / "index.txt").string(), "--query-embeddings",
                                         (dir / "query.bin").string(), "--k", "2"};
  const auto r = run(base);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(r.out, "query=0 rank="), 2u);
  EXPECT_EQ(r.out.rfind("query=0 rank=0 index=0 ", 0), 0u) << r.out;

  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  };
  EXPECT_EQ(with({"--injection-mode", "sideways"}).code, 1);
  EXPECT_EQ(with({"--sigma-r", "0.1"}).code, 1);  // noise needs a seed
  EXPECT_EQ(with({"--sigma-r", "0.1", "--seed", "4"}).out, with({"--sigma-r", "0.1", "--seed", "4"}).out);

  write(dir / "short.txt", "a dog on grass\n");
  const auto mismatch = run({"retrieve", "--index-embeddings", (dir / "index.bin").string(), "--index-corpus",
                             (dir / "short.txt").string(), "--query-embeddings", (dir / "query.bin").string()});
  EXPECT_EQ(mismatch.code, 2);
}
