#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "functorium/dataset.hpp"
#include "functorium/evaluate.hpp"
#include "functorium/io.hpp"
#include "functorium/task.hpp"

using namespace functorium;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("functorium-test-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "-" +
            std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, -2.5e-300, 1.0 / 3.0, 123456789.125, 0.0}) {
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK_THROWS(parse_double("1.5x"));
  CHECK_THROWS(parse_double(""));
}

TEST_CASE("embedding and dataset invariants") {
  CHECK_THROWS(EmbeddingSpec({{"A", 0}}));
  EmbeddingSpec emb({{"A", 2}, {"Z", 3}});
  DatasetFunctor d(emb, {{"A", Tensor::matrix({{1, 2}})}});
  CHECK(d.size("A") == 1);
  CHECK(d.empty("Z"));
  CHECK(d.points("Z").cols() == 3);
  CHECK_THROWS_AS(DatasetFunctor(emb, {{"A", Tensor::matrix({{1, 2, 3}})}}), ShapeError);
  CHECK_THROWS(DatasetFunctor(emb, {{"Q", Tensor::matrix({{1}})}}));
}

TEST_CASE("csv parsing") {
  auto [name, t] = parse_dataset_csv("A,2\n# comment\n1,2\n3.5,-4\n\n5,6 # tail\n");
  CHECK(name == "A");
  CHECK(t == Tensor::matrix({{1, 2}, {3.5, -4}, {5, 6}}));
  CHECK_THROWS(parse_dataset_csv("A,2\n1,2,3\n"));
  CHECK_THROWS(parse_dataset_csv("1,2\n"));
  CHECK_THROWS(parse_dataset_csv(""));
  CHECK_THROWS_AS(parse_dataset_csv("A,1\nnan\n"), NumericError);
  CHECK_THROWS_AS(parse_dataset_csv("A,1\ninf\n"), NumericError);
  const std::string text = format_dataset_csv("A", t);
  CHECK(parse_dataset_csv(text).second == t);
}

TEST_CASE("directory loading") {
  TempDir dir;
  EmbeddingSpec emb({{"A", 2}, {"B", 2}});
  write(dir.path / "A.csv", "A,2\n1,2\n3,4\n5,6\n");
  std::vector<std::string> warnings;
  DatasetFunctor d = load_dataset(dir.path, emb, &warnings);
  CHECK(d.size("A") == 3);
  CHECK(d.empty("B"));
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("B") != std::string::npos);

  write(dir.path / "B.csv", "B,3\n1,2,3\n");
  CHECK_THROWS_AS(load_dataset(dir.path, emb), std::runtime_error);
  write(dir.path / "B.csv", "B,2\n1,nan\n");
  CHECK_THROWS_AS(load_dataset(dir.path, emb), NumericError);
  write(dir.path / "B.csv", "A,2\n1,2\n");
  CHECK_THROWS_AS(load_dataset(dir.path, emb), std::runtime_error);

  TempDir empty;
  warnings.clear();
  DatasetFunctor none = load_dataset(empty.path, emb, &warnings);
  CHECK(none.empty("A"));
  CHECK(none.empty("B"));
  CHECK(warnings.size() == 2);

  TempDir out;
  save_dataset(out.path, d);
  CHECK(load_dataset(out.path, emb).points("A") == d.points("A"));
}

TEST_CASE("atomic writes replace the target") {
  TempDir dir;
  write_file_atomic(dir.path / "x.txt", "one");
  write_file_atomic(dir.path / "x.txt", "two");
  CHECK(read_file(dir.path / "x.txt") == "two");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir.path)) files += e.is_regular_file();
  CHECK(files == 1);
}

TEST_CASE("sampling") {
  EmbeddingSpec emb({{"A", 1}});
  std::vector<double> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(i);
  DatasetFunctor d(emb, {{"A", Tensor::matrix(10, 1, pts)}});
  Rng rng(5);
  Tensor b = sample_batch(d, "A", 4, rng);
  CHECK(b.shape() == Shape{4, 1});
  for (double v : b.data()) CHECK((v >= 0 && v <= 9 && v == std::floor(v)));
  Rng r1(9), r2(9);
  CHECK(sample_batch(d, "A", 8, r1) == sample_batch(d, "A", 8, r2));

  Tensor z = sample_batch(LatentSpec{"Z", 100}, 2, rng);
  CHECK(z.shape() == Shape{2, 100});
  for (double v : z.data()) CHECK((v >= 0.0 && v <= 1.0));

  DatasetFunctor empty(EmbeddingSpec({{"A", 1}}), {});
  CHECK_THROWS_AS(sample_batch(empty, "A", 1, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_batch(d, "A", 0, rng), std::invalid_argument);
}

TEST_CASE("two-domain toy task") {
  TaskSpec t = gen_cyclegan_toy(7, 2048);
  CHECK(t.schema.relations().size() == 2);
  CHECK(t.schema.name() == parse_schema(kCycleGanSchemaText).name());
  CHECK(t.dataset.size("A") == 2048);
  CHECK(t.dataset.size("B") == 2048);
  // B = T(A') has mean T(0) = (2, 0); 3 sigma / sqrt(n) with sigma = 0.5.
  const Tensor& b = t.dataset.points("B");
  double m0 = 0, m1 = 0;
  for (std::size_t r = 0; r < b.rows(); ++r) {
    m0 += b.at(r, 0);
    m1 += b.at(r, 1);
  }
  m0 /= 2048.0;
  m1 /= 2048.0;
  const double bound = 3 * 0.5 / std::sqrt(2048.0);
  CHECK(std::abs(m0 - 2.0) < bound);
  CHECK(std::abs(m1) < bound);
  REQUIRE(t.oracle.has_value());
  auto r = functoriality_residual(t.oracle->model(), {{"A", t.dataset.points("A")},
                                                      {"B", t.dataset.points("B")}});
  for (double v : r) CHECK(v < 1e-9);
  CHECK_THROWS(gen_cyclegan_toy(7, 15));
  // Same seed, same data; the two domains are drawn independently.
  CHECK(gen_cyclegan_toy(7, 64).dataset.points("A") == gen_cyclegan_toy(7, 64).dataset.points("A"));
  CHECK(gen_cyclegan_toy(8, 64).dataset.points("A") != gen_cyclegan_toy(7, 64).dataset.points("A"));
  const Tensor a = t.dataset.points("A");
  const Tensor ta = t.oracle->model().eval_arrow("f", a);
  CHECK(max_abs_diff(ta, b) > 0.1);
}

TEST_CASE("product toy task") {
  TaskSpec t = gen_product_toy(3, 1000);
  REQUIRE(t.oracle.has_value());
  REQUIRE(t.product.has_value());
  CHECK(t.object_dim("AxB_Z") == 4);
  CHECK(t.object_dim("AB") == 4);
  CHECK(t.latents.size() == 1);
  Rng rng(1);
  const Tensor az = t.sample("AxB_Z", 1000, rng);
  for (std::size_t r = 0; r < az.rows(); ++r) {
    CHECK((az.at(r, 2) >= 0.0 && az.at(r, 2) < 1.0));
  }
  Model oracle = t.oracle->model();
  const Tensor round = oracle.eval_arrow("d", oracle.eval_arrow("c", az));
  CHECK(max_abs_diff(round, az) < 1e-9);
  const Tensor ab = t.dataset.points("AB");
  const Tensor back = oracle.eval_arrow("d", ab);
  for (std::size_t r = 0; r < ab.rows(); ++r) {
    CHECK(back.at(r, 0) == ab.at(r, 0));
    CHECK(back.at(r, 1) == ab.at(r, 1));
  }
  // Fixed z across several base points: identical offsets.
  Tensor fixed(Shape{5, 4});
  for (std::size_t r = 0; r < 5; ++r) {
    fixed.at(r, 0) = 0.3 * static_cast<double>(r) - 0.7;
    fixed.at(r, 1) = 1.1 - 0.4 * static_cast<double>(r);
    fixed.at(r, 2) = 0.37;
    fixed.at(r, 3) = 0.81;
  }
  const Tensor off = t.product->attribute(oracle.eval_arrow("c", fixed));
  const auto [o1, o2] = product_offset(0.37, 0.81);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(std::abs(off.at(r, 0) - o1) < 1e-9);
    CHECK(std::abs(off.at(r, 1) - o2) < 1e-9);
  }
  // Radius of the offset ranges over [0.25, 0.5].
  const auto [lo1, lo2] = product_offset(0.0, 0.0);
  CHECK(std::hypot(lo1, lo2) == doctest::Approx(0.25));
  CHECK_THROWS(gen_product_toy(1, 8));
}

TEST_CASE("builtin tasks") {
  CHECK(builtin_task_names() == std::vector<std::string>{"cyclegan-toy", "product-toy"});
  CHECK_THROWS_WITH(make_builtin_task("nope", 1, 32), doctest::Contains("cyclegan-toy"));
}

TEST_CASE("task validation") {
  Schema s = parse_schema("schema S { objects: A, B arrows: f : A -> B }");
  EmbeddingSpec emb({{"A", 2}, {"B", 3}});
  TaskSpec t = make_task("x", s, emb, DatasetFunctor(emb, {}));
  CHECK(t.object_dims() == std::map<std::string, std::size_t>{{"A", 2}, {"B", 3}});
  t.factors["A"] = {Factor{"A", 1, false}};
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t.factors["A"] = {Factor{"A", 1, false}, Factor{"Z", 1, true}};
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t.latents.push_back(LatentSpec{"Z", 1});
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);  // data factor A has dim 2 in the dataset
}

TEST_CASE("energy distance") {
  const Tensor x = Tensor::matrix({{0, 0}, {1, 0}, {0, 2}});
  CHECK(energy_distance(x, x) == doctest::Approx(0.0).epsilon(1e-15));
  // Single points: 2|x-y| - 0 - 0.
  CHECK(energy_distance(Tensor::matrix({{0, 0}}), Tensor::matrix({{3, 4}})) == doctest::Approx(10.0));
  // Hand evaluation on {0, 2} vs {1}: 2*1 - 1 - 0 = 1.
  CHECK(energy_distance(Tensor::matrix({{0}, {2}}), Tensor::matrix({{1}})) == doctest::Approx(1.0));
  CHECK_THROWS(energy_distance(x, Tensor::matrix({{1}})));
  CHECK(total_std(Tensor::matrix({{0, 0}, {2, 0}})) == doctest::Approx(1.0));
}
