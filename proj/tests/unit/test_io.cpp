#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gedfn/checkpoint.hpp"
#include "gedfn/errors.hpp"
#include "gedfn/hash.hpp"
#include "gedfn/io.hpp"
#include "gedfn/manifest.hpp"
#include "gedfn/trainer.hpp"
#include "support.hpp"

using namespace gedfn;

TEST_SUITE("io") {

TEST_CASE("zscore of 1,2,3") {
  Eigen::MatrixXd X(3, 1);
  X << 1, 2, 3;
  auto z = zscore(X);
  Eigen::MatrixXd expected(3, 1);
  expected << -1, 0, 1;
  CHECK(z.X == expected);
  CHECK(z.dropped.empty());
}

TEST_CASE("zscore statistics and idempotence") {
  auto X = testing::random_matrix(100, 5, 9, 3.0);
  X.array() += 7.0;
  auto z = zscore(X);
  for (int c = 0; c < 5; ++c) {
    const auto col = z.X.col(c);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / 99.0);
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::abs(sd - 1.0) < 1e-12);
  }
  auto again = zscore(z.X);
  CHECK((again.X - z.X).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zscore drops constant columns") {
  Eigen::MatrixXd X(4, 3);
  X << 1, 5, 2, 2, 5, 2, 3, 5, 2, 4, 5, 3;
  auto z = zscore(X);
  CHECK(z.kept == std::vector<int>{0, 2});
  CHECK(z.dropped == std::vector<int>{1});
  CHECK(z.X.cols() == 2);
}

TEST_CASE("doubles survive text round trips") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 10.0);
  for (int k = 0; k < 2000; ++k) {
    const double v = normal(rng) * std::pow(10.0, (k % 40) - 20);
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(parse_double(format_double(std::numeric_limits<double>::denorm_min())) ==
        std::numeric_limits<double>::denorm_min());
  CHECK_THROWS_AS(parse_double("1.5x"), IngestionError);
  CHECK_THROWS_AS(parse_double(""), IngestionError);
}

TEST_CASE("features outside the graph are screened out") {
  testing::TempDir dir("screen");
  testing::write_text(dir / "expr.csv", "id,g1,g2,g3\na,1,2,3\nb,4,5,7\nc,0,1,1\n");
  testing::write_text(dir / "labels.csv", "id,label\na,1\nb,0\nc,1\n");
  testing::write_text(dir / "edges.txt", "g1 g2\n");
  auto ing = ingest(dir / "expr.csv", dir / "labels.csv", dir / "edges.txt");
  CHECK(ing.data.feature_names == std::vector<std::string>{"g1", "g2"});
  CHECK(ing.data.X.cols() == 2);
  CHECK(ing.data.expression_features == 3);
  CHECK(ing.graph.vertex_count() == 2);
  CHECK(ing.graph.has_edge(0, 1));
  CHECK(ing.data.y == std::vector<int>{1, 0, 1});
}

TEST_CASE("ingestion errors") {
  testing::TempDir dir("errors");
  testing::write_text(dir / "dup.csv", "id,g1,g1\na,1,2\n");
  CHECK_THROWS_AS(read_expression(dir / "dup.csv"), IngestionError);
  testing::write_text(dir / "dupsample.csv", "id,g1\na,1\na,2\n");
  CHECK_THROWS_AS(read_expression(dir / "dupsample.csv"), IngestionError);
  testing::write_text(dir / "ragged.csv", "id,g1,g2\na,1\n");
  CHECK_THROWS_AS(read_expression(dir / "ragged.csv"), IngestionError);
  testing::write_text(dir / "text.csv", "id,g1\na,high\n");
  CHECK_THROWS_AS(read_expression(dir / "text.csv"), IngestionError);

  testing::write_text(dir / "expr.csv", "id,g1,g2\na,1,2\nb,3,5\n");
  testing::write_text(dir / "labels.csv", "a,1\nb,0\n");
  testing::write_text(dir / "other.txt", "x y\n");
  CHECK_THROWS_AS(ingest(dir / "expr.csv", dir / "labels.csv", dir / "other.txt"), IngestionError);

  testing::write_text(dir / "bad_labels.csv", "sample,label\na,perhaps\nb,maybe\nc,0\n");
  CHECK_THROWS_WITH_AS(read_labels(dir / "bad_labels.csv"), doctest::Contains("maybe, perhaps"),
                       IngestionError);
  CHECK_THROWS_AS(read_expression(dir / "missing.csv"), IngestionError);
}

TEST_CASE("labels with a positive value") {
  testing::TempDir dir("labels");
  testing::write_text(dir / "er.tsv", "sample\tlabel\nA\tPositive\nB\tNegative\nC\tPositive\n");
  auto labels = read_labels(dir / "er.tsv", std::string("Positive"));
  CHECK(labels.at("A") == 1);
  CHECK(labels.at("B") == 0);
  CHECK(labels.size() == 3);
  testing::write_text(dir / "three.tsv", "A\tPositive\nB\tNegative\nC\tUnknown\n");
  CHECK_THROWS_WITH_AS(read_labels(dir / "three.tsv", std::string("Positive")),
                       doctest::Contains("Negative, Unknown"), IngestionError);
}

TEST_CASE("edge lists skip loops, repeats and comments") {
  testing::TempDir dir("edges");
  testing::write_text(dir / "e.txt", "# header\nb a\na b\nc c\nc\td  # tab\nlonely\n\n");
  auto e = read_edge_list(dir / "e.txt");
  CHECK(e.names == std::vector<std::string>{"b", "a", "c", "d", "lonely"});
  CHECK(e.edges == std::vector<Edge>{{0, 1}, {2, 3}});
  testing::write_text(dir / "bad.txt", "a b c\n");
  CHECK_THROWS_AS(read_edge_list(dir / "bad.txt"), IngestionError);
}

TEST_CASE("synthetic export round trips bitwise") {
  SimulationConfig cfg;
  cfg.p = 150;
  cfg.n = 40;
  cfg.p0 = 10;
  cfg.n_cores = 1;
  auto ds = generate_dataset(cfg, 3);
  testing::TempDir dir("roundtrip");
  export_dataset(dir.path(), ds);
  auto ing = ingest(dir / "expression.csv", dir / "labels.csv", dir / "edges.txt");
  CHECK(ing.data.X == ds.X);
  CHECK(ing.data.y == ds.y);
  CHECK(ing.graph.edges() == ds.graph.edges());
  CHECK(ing.data.feature_names == numbered_names("f", 150));
}

TEST_CASE("ingestion ignores file ordering") {
  testing::TempDir dir("order");
  testing::write_text(dir / "a.csv", "id,g2,g1,g3\ns2,1.5,2,3\ns1,4,5,6\ns3,7,8,9.25\n");
  testing::write_text(dir / "b.tsv", "id\tg3\tg1\tg2\ns3\t9.25\t8\t7\ns1\t6\t5\t4\ns2\t3\t2\t1.5\n");
  testing::write_text(dir / "la.csv", "s1,0\ns2,1\ns3,1\n");
  testing::write_text(dir / "lb.csv", "s3,1\ns1,0\ns2,1\n");
  testing::write_text(dir / "ea.txt", "g1 g2\ng2 g3\n");
  testing::write_text(dir / "eb.txt", "g3 g2\ng2 g1\n");
  auto a = ingest(dir / "a.csv", dir / "la.csv", dir / "ea.txt");
  auto b = ingest(dir / "b.tsv", dir / "lb.csv", dir / "eb.txt");
  CHECK(a.data.X == b.data.X);
  CHECK(a.data.y == b.data.y);
  CHECK(a.data.sample_ids == b.data.sample_ids);
  CHECK(adjacency(a.graph).dense() == adjacency(b.graph).dense());
}

TEST_CASE("transposed expression files") {
  testing::TempDir dir("transposed");
  testing::write_text(dir / "t.csv", "gene,s1,s2\ng1,1,2\ng2,3,4\ng3,5,6\n");
  auto t = read_expression(dir / "t.csv", true);
  CHECK(t.sample_ids == std::vector<std::string>{"s1", "s2"});
  CHECK(t.feature_names == std::vector<std::string>{"g1", "g2", "g3"});
  CHECK(t.values(1, 2) == 6.0);
}

TEST_CASE("standardize drops constant features from the graph too") {
  testing::TempDir dir("constant");
  testing::write_text(dir / "x.csv", "id,g1,g2,g3\na,1,5,0\nb,2,5,1\nc,4,5,3\n");
  testing::write_text(dir / "y.csv", "a,0\nb,1\nc,1\n");
  testing::write_text(dir / "e.txt", "g1 g2\ng2 g3\ng1 g3\n");
  auto ing = ingest(dir / "x.csv", dir / "y.csv", dir / "e.txt");
  auto dropped = standardize(ing);
  CHECK(dropped == std::vector<std::string>{"g2"});
  CHECK(ing.data.feature_names == std::vector<std::string>{"g1", "g3"});
  CHECK(ing.graph.vertex_count() == 2);
  CHECK(ing.graph.has_edge(0, 1));
  CHECK(ing.data.feature_index.at("g3") == 1);
}

TEST_CASE("features can be re-read for scoring") {
  testing::TempDir dir("features");
  testing::write_text(dir / "x.csv", "id,g1,g2,g3\na,1,5,0\nb,2,5,1\nc,4,6,3\n");
  testing::write_text(dir / "y.csv", "a,0\nc,1\n");
  auto d = ingest_for_features(dir / "x.csv", dir / "y.csv", {"g3", "g1"});
  CHECK(d.sample_ids == std::vector<std::string>{"a", "c"});
  CHECK(d.X(1, 0) == 3.0);
  CHECK(d.unlabeled_samples == 1);
  auto all = ingest_for_features(dir / "x.csv", std::nullopt, {"g2"});
  CHECK(all.X.rows() == 3);
  CHECK_THROWS_AS(ingest_for_features(dir / "x.csv", std::nullopt, {"g9"}), IngestionError);
}

TEST_CASE("key value files") {
  testing::TempDir dir("kv");
  testing::write_text(dir / "c.ini", "# comment\n[section]\nlr = 0.001\nepochs=40 ; trailing\n\n");
  auto kv = read_key_values(dir / "c.ini");
  CHECK(kv.at("lr") == "0.001");
  CHECK(kv.at("epochs") == "40");
  CHECK(kv.size() == 2);
  testing::write_text(dir / "bad.ini", "novalue\n");
  CHECK_THROWS_AS(read_key_values(dir / "bad.ini"), IngestionError);
}

TEST_CASE("atomic writes leave no temporary file") {
  testing::TempDir dir("atomic");
  write_file_atomic(dir / "sub" / "f.txt", "hello");
  CHECK(read_file(dir / "sub" / "f.txt") == "hello");
  write_file_atomic(dir / "sub" / "f.txt", "bye");
  CHECK(read_file(dir / "sub" / "f.txt") == "bye");
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "sub")) files += e.is_regular_file();
  CHECK(files == 1);
  CHECK(file_hash(dir / "sub" / "f.txt") == hex64(fnv1a64("bye")));
}

TEST_CASE("checkpoints round trip") {
  testing::TempDir dir("ckpt");
  for (int p : {12, 2200}) {
    auto graph = generate_ba_graph(p, 1, 4);
    Network net(NetworkSpec::graph_embedded(adjacency(graph), {5}));
    auto params = net.init_params(2);
    Checkpoint ck;
    ck.spec = net.spec();
    ck.params = params;
    ck.optimizer = AdamState::zeros_like(params);
    ck.optimizer.step = 17;
    ck.optimizer.m.layers[0].bias.setConstant(0.25);
    ck.seed = 99;
    ck.metadata["feature_names"] = numbered_names("g", p);
    save_checkpoint(dir / "m.ckpt", ck);
    auto back = load_checkpoint(dir / "m.ckpt");
    CHECK(back.params == params);
    CHECK(back.optimizer.m == ck.optimizer.m);
    CHECK(back.optimizer.v == ck.optimizer.v);
    CHECK(back.optimizer.step == 17);
    CHECK(back.seed == 99);
    CHECK(back.spec.mask->fingerprint() == ck.spec.mask->fingerprint());
    CHECK(back.metadata == ck.metadata);
    auto X = testing::random_matrix(3, p, 1);
    CHECK(Network(back.spec).predict(back.params, X) == net.predict(params, X));
  }
  Network dense(NetworkSpec::dense(4, {3, 2}));
  Checkpoint ck;
  ck.spec = dense.spec();
  ck.params = dense.init_params(1);
  save_checkpoint(dir / "d.ckpt", ck);
  auto back = load_checkpoint(dir / "d.ckpt");
  CHECK_FALSE(back.spec.mask.has_value());
  CHECK(back.params == ck.params);
  CHECK(back.optimizer.m.layers.empty());
}

TEST_CASE("damaged checkpoints are rejected") {
  testing::TempDir dir("damaged");
  Network net(NetworkSpec::graph_embedded(adjacency(generate_ba_graph(10, 1, 1)), {3}));
  Checkpoint ck;
  ck.spec = net.spec();
  ck.params = net.init_params(1);
  save_checkpoint(dir / "m.ckpt", ck);
  const std::string bytes = read_file(dir / "m.ckpt");

  testing::write_text(dir / "short.ckpt", bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), IngestionError);
  testing::write_text(dir / "long.ckpt", bytes + "x");
  CHECK_THROWS_AS(load_checkpoint(dir / "long.ckpt"), IngestionError);
  testing::write_text(dir / "magic.ckpt", "NOTACKPT" + bytes.substr(8));
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), IngestionError);
  std::string tampered = bytes;
  const auto pos = tampered.find("\"fingerprint\":\"") + 15;
  tampered[pos] = tampered[pos] == '0' ? '1' : '0';
  testing::write_text(dir / "fp.ckpt", tampered);
  CHECK_THROWS_AS(load_checkpoint(dir / "fp.ckpt"), IngestionError);
}

TEST_CASE("manifests round trip") {
  testing::TempDir dir("manifest");
  RunManifest m;
  m.subcommand = "train";
  m.config = {{"lr", "0.001"}, {"epochs", "5"}};
  m.seeds = {{"seed", 18446744073709551615ull}};
  m.input_hashes = {{"x.csv", "00ff"}};
  m.warnings = {"constant feature dropped: g2"};
  m.outputs = {"metrics.csv"};
  m.wall_seconds = 1.5;
  m.write(dir.path());
  auto back = RunManifest::read(dir / "manifest.json");
  CHECK(back.to_json() == m.to_json());
  CHECK(back.version == GEDFN_VERSION);
  CHECK(m.config_text() == "epochs=5\nlr=0.001\n");
  testing::write_text(dir / "bad.json", "{\"subcommand\": 3}");
  CHECK_THROWS_AS(RunManifest::read(dir / "bad.json"), IngestionError);
}

}  // TEST_SUITE
