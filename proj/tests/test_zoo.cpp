#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "attrib/idx.hpp"
#include "attrib/model_io.hpp"
#include "attrib/rng.hpp"
#include "attrib/zoo.hpp"
#include "test_util.hpp"

using namespace attrib;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

bool params_identical(const ModelGraph& a, const ModelGraph& b) {
  if (a.node_count() != b.node_count()) return false;
  for (int id = 0; id < a.node_count(); ++id) {
    if (!(a.node(id).weights == b.node(id).weights)) return false;
    if (!(a.node(id).bias == b.node(id).bias)) return false;
  }
  return true;
}

fs::path tmp_file(const std::string& name) {
  return fs::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("build is deterministic per seed") {
  ArchParams p;
  p.arch = Arch::ConvPlain;
  p.height = 16;
  p.width = 16;
  CHECK(params_identical(build(p, 5), build(p, 5)));
  CHECK_FALSE(params_identical(build(p, 5), build(p, 6)));
}

TEST_CASE("build rejects invalid parameters") {
  ArchParams p;
  p.classes = 0;
  CHECK_THROWS(build(p, 1));
  p = ArchParams{};
  p.arch = Arch::ConvPlain;
  p.height = 12;  // not divisible by 8
  CHECK_THROWS(build(p, 1));
}

TEST_CASE("he init: sample weight variance close to 2/fan_in") {
  // dense 1000 -> 100 gives 1e5 draws
  ArchParams p;
  p.arch = Arch::MlpSmall;
  p.in_channels = 1;
  p.height = 1;
  p.width = 1000;
  p.hidden = 100;
  p.classes = 2;
  const ModelGraph m = build(p, 123);
  const int fc1 = m.find_node("fc1");
  const Tensor& w = m.node(fc1).weights;
  REQUIRE(w.size() == 100000);
  double sum = 0, sum_sq = 0;
  for (size_t i = 0; i < w.size(); ++i) {
    sum += w[i];
    sum_sq += w[i] * w[i];
  }
  const double n = static_cast<double>(w.size());
  const double var = sum_sq / n - (sum / n) * (sum / n);
  const double expect = 2.0 / 1000.0;
  CHECK(var > 0.9 * expect);
  CHECK(var < 1.1 * expect);
  // biases start at zero
  CHECK(m.node(fc1).bias.sum() == 0.0);
}

TEST_CASE("conv_residual contains a residual add") {
  ArchParams p;
  p.arch = Arch::ConvResidual;
  p.height = 16;
  p.width = 16;
  const ModelGraph m = build(p, 1);
  CHECK(!m.nodes_of_kind(LayerKind::ResidualAdd).empty());
}

TEST_CASE("randomize") {
  ArchParams p;
  p.arch = Arch::ConvPlain;
  p.height = 16;
  p.width = 16;
  const ModelGraph m = build(p, 9);
  RandomizationPlan plan = default_plan(m, 1000);

  SUBCASE("empty group leaves the model bit-identical") {
    RandomizationPlan empty;
    empty.groups = {{}};
    empty.base_seed = 1;
    CHECK(params_identical(randomize(m, empty, 0), m));
  }
  SUBCASE("stage 0 touches only the dense head") {
    const ModelGraph r = randomize(m, plan, 0);
    std::set<int> head(plan.groups[0].begin(), plan.groups[0].end());
    for (int id = 0; id < m.node_count(); ++id) {
      if (head.count(id)) {
        CHECK_FALSE(m.node(id).weights == r.node(id).weights);
      } else {
        CHECK(m.node(id).weights == r.node(id).weights);
        CHECK(m.node(id).bias == r.node(id).bias);
      }
    }
  }
  SUBCASE("different seeds change the head, phi stays identical") {
    RandomizationPlan p2 = plan;
    p2.base_seed = 2000;
    const ModelGraph r1 = randomize(m, plan, 0);
    const ModelGraph r2 = randomize(m, p2, 0);
    const int head = m.find_node("head");
    CHECK_FALSE(r1.node(head).weights == r2.node(head).weights);
    const int conv1 = m.find_node("conv1");
    CHECK(r1.node(conv1).weights == r2.node(conv1).weights);
  }
  SUBCASE("cascading slot sets grow strictly") {
    std::set<int> prev;
    for (int stage = 0; stage < static_cast<int>(plan.groups.size()); ++stage) {
      const ModelGraph r = randomize(m, plan, stage);
      std::set<int> changed;
      for (int id = 0; id < m.node_count(); ++id) {
        if (!(m.node(id).weights == r.node(id).weights)) changed.insert(id);
      }
      for (int id : prev) CHECK(changed.count(id));
      CHECK(changed.size() > prev.size());
      prev = changed;
    }
  }
  SUBCASE("single mode touches one group only") {
    const ModelGraph r = randomize(m, plan, 1, /*cascading=*/false);
    std::set<int> group(plan.groups[1].begin(), plan.groups[1].end());
    for (int id = 0; id < m.node_count(); ++id) {
      if (group.count(id)) {
        CHECK_FALSE(m.node(id).weights == r.node(id).weights);
      } else {
        CHECK(m.node(id).weights == r.node(id).weights);
      }
    }
  }
  SUBCASE("randomized model accepts the same inputs") {
    const ModelGraph r =
        randomize(m, plan, static_cast<int>(plan.groups.size()) - 1);
    const Tensor x = random_input(3, {1, 16, 16});
    CHECK(forward(r, x).logits(r).size() == 2);
  }
  SUBCASE("phi outputs bit-identical under head randomization") {
    const ModelGraph r = randomize(m, plan, 0);
    const int cut = m.find_node("flatten");
    const auto [phi_a, ga] = split_at(m, cut);
    const auto [phi_b, gb] = split_at(r, cut);
    const Tensor x = random_input(4, {1, 16, 16});
    CHECK(forward(phi_a, x).logits(phi_a) == forward(phi_b, x).logits(phi_b));
  }
  SUBCASE("stage out of range") {
    CHECK_THROWS(randomize(m, plan, static_cast<int>(plan.groups.size())));
  }
}

TEST_CASE("plan validation") {
  ArchParams p;
  p.arch = Arch::ConvPlain;
  p.height = 16;
  p.width = 16;
  const ModelGraph m = build(p, 9);
  RandomizationPlan bad;
  const int head = m.find_node("head");
  const int conv1 = m.find_node("conv1");
  SUBCASE("duplicate nodes rejected") {
    bad.groups = {{head}, {head}};
    CHECK_THROWS(bad.validate(m));
  }
  SUBCASE("bottom-up order rejected") {
    bad.groups = {{conv1}, {head}};
    CHECK_THROWS(bad.validate(m));
  }
  SUBCASE("parameterless node rejected") {
    bad.groups = {{m.find_node("pool1")}};
    CHECK_THROWS(bad.validate(m));
  }
}

TEST_CASE("synth datasets") {
  SUBCASE("n = 0 errors") {
    SynthSpec s;
    s.n = 0;
    CHECK_THROWS(synth_dataset(s, 1));
  }
  SUBCASE("labels balanced within one") {
    SynthSpec s;
    s.kind = SynthKind::BarShapes;
    s.n = 33;
    s.classes = 2;
    const Dataset d = synth_dataset(s, 7);
    int c0 = 0, c1 = 0;
    for (int l : d.labels) (l == 0 ? c0 : c1)++;
    CHECK(std::abs(c0 - c1) <= 1);
  }
  SUBCASE("bar pixels brighter than background") {
    SynthSpec s;
    s.kind = SynthKind::BarShapes;
    s.n = 40;
    s.height = 24;
    s.width = 24;
    const Dataset d = synth_dataset(s, 11);
    double bar_sum = 0, bg_sum = 0;
    size_t bar_n = 0, bg_n = 0;
    for (size_t i = 0; i < d.images.size(); ++i) {
      if (d.images[i] >= 0.75) {
        bar_sum += d.images[i];
        ++bar_n;
      } else {
        bg_sum += d.images[i];
        ++bg_n;
      }
    }
    REQUIRE(bar_n > 0);
    CHECK(bar_sum / bar_n > 2.0 * (bg_sum / bg_n));
    CHECK(bar_n < bg_n);
  }
  SUBCASE("deterministic and in range") {
    SynthSpec s;
    s.kind = SynthKind::Blobs;
    s.n = 8;
    const Dataset a = synth_dataset(s, 3), b = synth_dataset(s, 3);
    CHECK(a.images == b.images);
    for (size_t i = 0; i < a.images.size(); ++i) {
      CHECK(a.images[i] >= 0.0);
      CHECK(a.images[i] <= 1.0);
    }
  }
}

TEST_CASE("training") {
  SUBCASE("separable blobs reach 95% train accuracy") {
    SynthSpec s;
    s.kind = SynthKind::Blobs;
    s.n = 64;
    s.height = 8;
    s.width = 8;
    const Dataset d = synth_dataset(s, 21);
    ArchParams p;
    p.arch = Arch::MlpSmall;
    p.height = 8;
    p.width = 8;
    p.hidden = 16;
    const ModelGraph m = build(p, 22);
    TrainOptions opt;
    opt.epochs = 50;
    opt.lr = 0.1;
    opt.seed = 23;
    const TrainResult r = train(m, d, opt);
    CHECK(accuracy(r.model, d) >= 0.95);
    CHECK(r.log.size() == 50);
  }
  SUBCASE("lr = 0 leaves parameters unchanged") {
    SynthSpec s;
    s.n = 8;
    const Dataset d = synth_dataset(s, 31);
    ArchParams p;
    p.arch = Arch::MlpSmall;
    const ModelGraph m = build(p, 32);
    TrainOptions opt;
    opt.epochs = 2;
    opt.lr = 0.0;
    opt.seed = 33;
    CHECK(params_identical(train(m, d, opt).model, m));
  }
  SUBCASE("same seed reproduces identical parameters") {
    SynthSpec s;
    s.n = 16;
    const Dataset d = synth_dataset(s, 41);
    ArchParams p;
    p.arch = Arch::MlpSmall;
    const ModelGraph m = build(p, 42);
    TrainOptions opt;
    opt.epochs = 3;
    opt.lr = 0.05;
    opt.seed = 43;
    CHECK(params_identical(train(m, d, opt).model, train(m, d, opt).model));
  }
}

TEST_CASE("idx loader") {
  const fs::path img_path = tmp_file("attrib_test_images.idx");
  const fs::path lab_path = tmp_file("attrib_test_labels.idx");
  const auto write_file = [](const fs::path& p,
                             const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  };
  // 1 image of 2x2, pixels [0,255,128,64]
  const std::vector<unsigned char> img_bytes = {
      0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 255, 128, 64};
  const std::vector<unsigned char> lab_bytes = {0, 0, 8, 1, 0, 0, 0, 1, 1};

  SUBCASE("parses pixels and scales to [0,1]") {
    write_file(img_path, img_bytes);
    write_file(lab_path, lab_bytes);
    const Dataset d = load_idx(img_path.string(), lab_path.string());
    CHECK(d.images.shape() == std::vector<size_t>{1, 1, 2, 2});
    CHECK(d.images[0] == 0.0);
    CHECK(d.images[1] == 1.0);
    CHECK(d.images[2] == 128.0 / 255.0);
    CHECK(d.images[3] == 64.0 / 255.0);
    CHECK(d.labels == std::vector<int>{1});
    CHECK(d.provenance == "idx-file");
  }
  SUBCASE("wrong magic") {
    auto bad = img_bytes;
    bad[3] = 7;
    write_file(img_path, bad);
    write_file(lab_path, lab_bytes);
    CHECK_THROWS_WITH_AS(load_idx(img_path.string(), lab_path.string()),
                         doctest::Contains("magic"), std::runtime_error);
  }
  SUBCASE("count mismatch") {
    write_file(img_path, img_bytes);
    auto bad = lab_bytes;
    bad[7] = 2;  // claims 2 labels
    write_file(lab_path, bad);
    CHECK_THROWS_WITH_AS(load_idx(img_path.string(), lab_path.string()),
                         doctest::Contains("mismatch"), std::runtime_error);
  }
  SUBCASE("truncated pixel data") {
    auto bad = img_bytes;
    bad.pop_back();
    write_file(img_path, bad);
    write_file(lab_path, lab_bytes);
    CHECK_THROWS_WITH_AS(load_idx(img_path.string(), lab_path.string()),
                         doctest::Contains("truncated"), std::runtime_error);
  }
}

TEST_CASE("model serialization") {
  ArchParams p;
  p.arch = Arch::ConvResidual;
  p.height = 16;
  p.width = 16;
  const ModelGraph m = build(p, 77);
  const fs::path path = tmp_file("attrib_test_model.bin");

  SUBCASE("round trip is bit-exact") {
    ModelGraph marked = m;
    marked.set_split_marker(marked.find_node("block1.add"));
    serialize(marked, path.string());
    const ModelGraph r = deserialize(path.string());
    CHECK(params_identical(marked, r));
    CHECK(r.node_count() == marked.node_count());
    CHECK(r.split_marker() == marked.split_marker());
    const Tensor x = random_input(5, {1, 16, 16});
    CHECK(forward(marked, x).logits(marked) == forward(r, x).logits(r));
  }
  SUBCASE("corrupted byte fails the checksum") {
    serialize(m, path.string());
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    char c;
    f.seekg(350);
    f.get(c);
    f.seekp(350);
    f.put(static_cast<char>(c ^ 0x40));
    f.close();
    CHECK_THROWS_WITH_AS(deserialize(path.string()),
                         doctest::Contains("checksum"), std::runtime_error);
  }
  SUBCASE("empty file") {
    std::ofstream(path, std::ios::binary).close();
    CHECK_THROWS_WITH_AS(deserialize(path.string()),
                         doctest::Contains("empty"), std::runtime_error);
  }
  SUBCASE("version mismatch") {
    std::ofstream out(path, std::ios::binary);
    out << "attrib-model v9\nmeta {}\nparams 0\nfnv1a64 0\n";
    out.close();
    CHECK_THROWS_WITH_AS(deserialize(path.string()),
                         doctest::Contains("version"), std::runtime_error);
  }
}

TEST_CASE("split_at on a random mlp: interior composition is exact") {
  const ModelGraph m = random_mlp(61, 8, {10, 6}, 4, false);
  const Tensor x = random_input(62, {8}, -1, 1);
  const Tensor full = forward(m, x).logits(m);
  for (int node = 1; node < m.node_count(); ++node) {
    const auto [phi, g] = split_at(m, node);
    CHECK(forward(g, forward(phi, x).logits(phi)).logits(g) == full);
  }
}
